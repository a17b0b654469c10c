"""
Independent dense-matrix reference computations.

Nothing here imports the package under test. Everything is done with full
2^n x 2^n matrices built from Kronecker products, which is slow but hard to
get wrong. Running this file regenerates ``fixtures/oracle_values.json``;
the tests only read the frozen file.

Term lists for the 3- and 4-party witnesses are transcribed by hand from the
published inequalities, not generated.
"""
from __future__ import annotations

import itertools
import json
from functools import reduce
from pathlib import Path

import numpy as np

FIXTURE = Path(__file__).parent / "fixtures" / "oracle_values.json"

PAULI = {
    "1": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# eigenvectors, "+" first
EIG = {
    "x": [np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)],
    "y": [np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2)],
    "z": [np.array([1, 0]), np.array([0, 1])],
}
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

# (coefficient numerator over 16, string); transcribed, "1" = identity
WITNESS_TERMS = {
    (3, "I1"): [(2, "xxx"), (-2, "yyx"), (-2, "yxy"), (-2, "xyy"),
                (-3, "111"), (1, "zz1"), (1, "z1z"), (1, "1zz")],
    (3, "I2"): [(2, "yyy"), (-2, "xxy"), (-2, "xyx"), (-2, "yxx"),
                (-3, "111"), (1, "zz1"), (1, "z1z"), (1, "1zz")],
    (4, "I1"): [(2, "xxxx"), (-2, "yyxx"), (-2, "yxyx"), (-2, "xyyx"), (-2, "xxyy"),
                (-2, "xyxy"), (-2, "yxxy"), (2, "yyyy"),
                (-7, "1111"), (1, "zz11"), (1, "z11z"), (1, "11zz"), (1, "z1z1"),
                (1, "1z1z"), (1, "1zz1"), (1, "zzzz")],
    (4, "I2"): [(2, "xxxy"), (2, "xxyx"), (2, "xyxx"), (2, "yxxx"), (-2, "xyyy"),
                (-2, "yxyy"), (-2, "yyxy"), (-2, "yyyx"),
                (-7, "1111"), (1, "zz11"), (1, "z11z"), (1, "11zz"), (1, "z1z1"),
                (1, "1z1z"), (1, "1zz1"), (1, "zzzz")],
}


def kron(*ms):
    return reduce(np.kron, ms)


def pauli_matrix(s: str) -> np.ndarray:
    return kron(*[PAULI[c] for c in s])


def witness_operator(n: int, variant: str) -> np.ndarray:
    return sum(c / 16 * pauli_matrix(s) for c, s in WITNESS_TERMS[(n, variant)])


def ghz(n: int, phase: float) -> np.ndarray:
    v = np.zeros(2**n, dtype=complex)
    v[0] = 1 / np.sqrt(2)
    v[-1] = np.exp(1j * phase) / np.sqrt(2)
    return v


def expval(op: np.ndarray, rho: np.ndarray) -> float:
    return float(np.real(np.trace(op @ rho)))


def single(op: np.ndarray, q: int, n: int) -> np.ndarray:
    return kron(*[op if k == q else np.eye(2) for k in range(n)])


def cnot(control: int, target: int, n: int) -> np.ndarray:
    p0 = np.diag([1, 0]).astype(complex)
    p1 = np.diag([0, 1]).astype(complex)
    a = kron(*[p0 if k == control else np.eye(2) for k in range(n)])
    b = kron(*[p1 if k == control else (PAULI["x"] if k == target else np.eye(2)) for k in range(n)])
    return a + b


def attacked(n: int, phase: float) -> np.ndarray:
    """Parties 0..n-1, ancillas n..2n-3; H then CNOT on each of parties 1..n-2."""
    total = 2 * n - 2
    v = np.kron(ghz(n, phase), np.eye(2 ** (n - 2))[:, 0])
    for j, t in enumerate(range(1, n - 1)):
        v = single(HAD, t, total) @ v
        v = cnot(t, n + j, total) @ v
    return v


def partial_trace_tail(rho: np.ndarray, keep: int, total: int) -> np.ndarray:
    d, e = 2**keep, 2 ** (total - keep)
    return np.einsum("ajbj->ab", rho.reshape(d, e, d, e))


def marginal_values(n: int, p: float, phi_phase: float) -> dict:
    total = 2 * n - 2
    rho = sum(
        w * np.outer(v, v.conj())
        for w, v in ((p, attacked(n, 0.0)), (1 - p, attacked(n, phi_phase)))
    )
    red = partial_trace_tail(rho, n, total)
    return {v: expval(witness_operator(n, v), red) for v in ("I1", "I2")}


def announced_values(n: int, q_z: float, p_psi: float, phi_phase: float) -> dict:
    """Exact expectation of the term-wise estimator on announced data for the
    intercept attack: the adversary sees the honest bases first, draws its own
    basis like an honest party, discriminates assuming the phase-0 state and
    announces the most likely bit for an ideal GHZ (coin flip on ties)."""
    h = n - 1
    held = n - 1  # adversary party + ancillas
    states = {"Psi": attacked(n, 0.0), "Phi": attacked(n, phi_phase)}
    tag_w = {"Psi": p_psi, "Phi": 1 - p_psi}
    pb = {"x": (1 - q_z) / 2, "y": (1 - q_z) / 2, "z": q_z}
    ideal = ghz(n, 0.0)

    def honest_bra(bases, bits):
        return kron(*[EIG[b][o] for b, o in zip(bases, bits)])

    models = []  # (weight, tag, bases, {bits: prob})
    for tag in ("Psi", "Phi"):
        if tag_w[tag] == 0:
            continue
        for drawn in itertools.product("xyz", repeat=n):
            w = tag_w[tag] * np.prod([pb[b] for b in drawn])
            if w == 0:
                continue
            hb = drawn[:h]
            outs = list(itertools.product((0, 1), repeat=h))
            # conditional held states under the phase-0 assumption
            chis = []
            for o in outs:
                bra = honest_bra(hb, o).conj()
                m = states["Psi"].reshape(2**h, 2**held)
                chi = bra @ m
                chis.append(chi / np.linalg.norm(chi))
            G = np.array([[abs(np.vdot(a, b)) for b in chis] for a in chis])
            assert np.allclose(G, np.eye(len(chis)), atol=1e-10), "not orthonormal"
            dist = {}
            m_true = states[tag].reshape(2**h, 2**held)
            for o in outs:
                amp_o = honest_bra(hb, o).conj() @ m_true
                for k, ok in enumerate(outs):
                    pr = abs(np.vdot(chis[k], amp_o)) ** 2
                    if pr < 1e-15:
                        continue
                    # ML bit for the guessed honest outcome ok
                    score = [
                        abs(np.vdot(kron(honest_bra(hb, ok), EIG[drawn[-1]][c]), ideal)) ** 2
                        for c in (0, 1)
                    ]
                    if abs(score[0] - score[1]) < 1e-12:
                        choices = [(0, 0.5), (1, 0.5)]
                    else:
                        choices = [(int(score[1] > score[0]), 1.0)]
                    for c, pc in choices:
                        key = tuple(o) + (c,)
                        dist[key] = dist.get(key, 0.0) + pr * pc
            models.append((w, tag, drawn, dist))

    def value(variant, tag):
        sel = [m for m in models if tag is None or m[1] == tag]
        if not sel:
            return None
        total = 0.0
        for c, s in WITNESS_TERMS[(n, variant)]:
            support = [i for i, ch in enumerate(s) if ch != "1"]
            if not support:
                total += c / 16
                continue
            num = den = 0.0
            for w, _, bases, dist in sel:
                if any(bases[i] != s[i] for i in support):
                    continue
                corr = sum(pr * (-1) ** sum(bits[i] for i in support) for bits, pr in dist.items())
                num += w * corr
                den += w
            total += c / 16 * num / den
        return total

    return {
        f"{v}_{lab}": value(v, t)
        for v in ("I1", "I2")
        for lab, t in (("pooled", None), ("Psi", "Psi"), ("Phi", "Phi"))
    }


def phase_for_i2(n: int) -> float:
    plus = expval(witness_operator(n, "I2"), np.outer(ghz(n, np.pi / 2), ghz(n, np.pi / 2).conj()))
    minus = expval(witness_operator(n, "I2"), np.outer(ghz(n, -np.pi / 2), ghz(n, -np.pi / 2).conj()))
    return np.pi / 2 if plus > minus else -np.pi / 2


def compute_all() -> dict:
    out: dict = {"ghz": {}, "marginal": {}, "announced": {}, "phase": {}}
    for n in (3, 4):
        rho0 = np.outer(ghz(n, 0.0), ghz(n, 0.0).conj())
        out["ghz"][f"n{n}_I1_phase0"] = expval(witness_operator(n, "I1"), rho0)
        for lab, ph in (("plus", np.pi / 2), ("minus", -np.pi / 2)):
            r = np.outer(ghz(n, ph), ghz(n, ph).conj())
            out["ghz"][f"n{n}_I2_{lab}"] = expval(witness_operator(n, "I2"), r)
        out["phase"][f"n{n}"] = phase_for_i2(n)
    for n, p in ((3, 0.0), (3, 0.25), (3, 0.5), (3, 1.0), (4, 0.5)):
        out["marginal"][f"n{n}_p{p}"] = marginal_values(n, p, phase_for_i2(n))
    for n in (3, 4):
        out["announced"][f"n{n}_qz0.2_p0.5"] = announced_values(n, 0.2, 0.5, phase_for_i2(n))
    out["announced"]["n3_qz0.2_p1.0"] = announced_values(3, 0.2, 1.0, phase_for_i2(3))
    return out


if __name__ == "__main__":
    FIXTURE.parent.mkdir(exist_ok=True)
    FIXTURE.write_text(json.dumps(compute_all(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {FIXTURE}")
