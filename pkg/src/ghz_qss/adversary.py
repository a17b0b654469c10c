"""
Dishonest-participant attacks on the GHZ secret-sharing protocol.

The adversary is the last party. It intercepts the qubits flying to every
other non-dealer party, rotates each with a Hadamard and copies it into a
private ancilla with a CNOT, then forwards it. Once the honest parties have
announced their bases it measures its own qubit plus ancillas in a basis that
discriminates the honest outcomes (assuming the standard GHZ state was sent)
and announces whatever keeps the parity checks happy.

Register layout for ``n`` parties: qubits ``0..n-1`` are the parties (dealer
first, adversary last), followed by one ancilla per intercepted party.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import (
    CNOT,
    Basis,
    Ensemble,
    H,
    PureState,
    apply_gate,
    basis_probabilities,
    conditional_state,
    discriminating_basis,
    ghz_state,
    gram_schmidt,
    complete_basis,
    measure_in_basis,
    project_outcomes,
)
from .errors import ArgumentError, DiscriminationError, NoKnowledgeError, ValidationError
from .witness import Variant, build_witness, calibrate_phase, evaluate_exact

PSI = "PsiStandard"
PHI = "PhiImaginary"


def intercept_entangle(state: PureState, target_qubits: Sequence[int]) -> PureState:
    """Hadamard on each target, then CNOT(target -> fresh ancilla).

    Ancillas are appended in the order of ``target_qubits``.
    """
    targets = [int(t) for t in target_qubits]
    if len(set(targets)) != len(targets):
        raise ArgumentError("duplicate intercept target")
    n0 = state.n_qubits
    out = state.with_ancillas(len(targets))
    for j, t in enumerate(targets):
        if not 0 <= t < n0:
            raise ArgumentError(f"intercept target {t} out of range")
        out = apply_gate(out, H, t)
        out = apply_gate(out, CNOT, (t, n0 + j))
    return out


# -- parametrized two-qubit cheat unitaries -------------------------------------------


def composite_unitary(params: Sequence[float], dim: int = 4) -> np.ndarray:
    """Composite parametrization of U(dim) from dim**2 angles.

    ``params`` is read as a dim x dim matrix L (row-major). Diagonal entries are
    global phases on each basis vector, entries above the diagonal are rotation
    angles in the (m, n) plane and entries below are the relative phases:

        U = prod_{m<n} [exp(i P_n L[n,m]) exp(i Y_mn L[m,n])] * prod_l exp(i P_l L[l,l])

    with P_l = |l><l| and Y_mn = -i|m><n| + i|n><m|. All zeros give identity.
    """
    L = np.asarray(params, dtype=float)
    if L.size != dim * dim:
        raise ArgumentError(f"need {dim * dim} angles, got {L.size}")
    L = L.reshape(dim, dim)
    U = np.eye(dim, dtype=complex)
    for m in range(dim - 1):
        for n in range(m + 1, dim):
            phase = np.eye(dim, dtype=complex)
            phase[n, n] = np.exp(1j * L[n, m])
            rot = np.eye(dim, dtype=complex)
            c, s = np.cos(L[m, n]), np.sin(L[m, n])
            rot[m, m] = rot[n, n] = c
            rot[m, n] = s
            rot[n, m] = -s
            U = U @ phase @ rot
    U = U @ np.diag(np.exp(1j * np.diag(L)))
    if not np.allclose(U.conj().T @ U, np.eye(dim), atol=1e-9):
        raise ValidationError("composite parametrization produced a non-unitary matrix")
    return U


def random_cheat_params(rng: np.random.Generator, dim: int = 4) -> np.ndarray:
    """Uniform sample over the parameter box: phases in [0, 2pi), rotation
    angles in [0, pi/2]."""
    L = rng.uniform(0, 2 * np.pi, size=(dim, dim))
    iu = np.triu_indices(dim, 1)
    L[iu] = rng.uniform(0, np.pi / 2, size=len(iu[0]))
    return L.reshape(-1)


@dataclass(frozen=True)
class CheatUnitaryParams:
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != 16:
            raise ArgumentError(f"need 16 parameters, got {len(self.values)}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @classmethod
    def identity(cls) -> "CheatUnitaryParams":
        return cls((0.0,) * 16)

    def matrix(self) -> np.ndarray:
        return composite_unitary(self.values)


# -- adversary strategy ----------------------------------------------------------------


@dataclass(frozen=True)
class RoundView:
    """What the adversary can see when it has to announce.

    ``honest_bases`` is None when the ordering policy hides the honest bases
    at the adversary's turn. ``visible_seqs`` are the sequence numbers of the
    transcript events that were consumed.
    """

    honest_bases: tuple[Basis, ...] | None
    visible_seqs: tuple[int, ...] = ()


@dataclass(frozen=True)
class Knowledge:
    """Per-round private record of the adversary."""

    discriminated: bool
    measurement_index: int | None = None
    inferred_honest_bits: tuple[int, ...] | None = None
    used_seqs: tuple[int, ...] = ()

    @property
    def inferred_dealer_bit(self) -> int | None:
        return None if self.inferred_honest_bits is None else self.inferred_honest_bits[0]


@dataclass(frozen=True)
class Response:
    basis: Basis
    bit: int
    knowledge: Knowledge


@dataclass(frozen=True)
class DiscriminationTable:
    basis: np.ndarray  # columns: measurement vectors on the held qubits
    orthogonal: bool
    inferred: tuple[tuple[int, ...], ...]  # honest bits guessed for each outcome index


def _bits(index: int, width: int) -> tuple[int, ...]:
    return tuple(int(b) for b in format(index, f"0{width}b")) if width else ()


class InterceptEntangleAdversary:
    """Intercept-entangle attacker for ``n_parties`` >= 3.

    prior: "psi" assumes the standard GHZ state was sent; "bayes" weights the
    two preparations by ``p_psi`` when choosing which bit to announce.
    basis_policy: "mimic" announces a basis drawn like an honest party;
    "psi-valid" picks one that makes the combination usable as key for the
    standard state (requires seeing the honest bases first).
    """

    def __init__(
        self,
        n_parties: int,
        phi_phase: float | None = None,
        prior: str = "psi",
        basis_policy: str = "mimic",
        p_psi: float = 0.5,
    ):
        if n_parties < 3:
            raise ArgumentError("attack needs at least 3 parties")
        if prior not in ("psi", "bayes"):
            raise ArgumentError(f"unknown adversary prior {prior!r}")
        if basis_policy not in ("mimic", "psi-valid"):
            raise ArgumentError(f"unknown basis policy {basis_policy!r}")
        self.n = n_parties
        self.party = n_parties - 1
        self.honest = list(range(n_parties - 1))
        self.targets = list(range(1, n_parties - 1))
        self.ancillas = list(range(n_parties, n_parties + len(self.targets)))
        self.held = [self.party] + self.ancillas
        self.n_register = n_parties + len(self.targets)
        self.phi_phase = calibrate_phase(n_parties).phase if phi_phase is None else phi_phase
        self.prior = prior
        self.basis_policy = basis_policy
        self.p_psi = p_psi
        self._cache: dict = {}

    # states

    def tag_phase(self, tag: str) -> float:
        return 0.0 if tag == PSI else self.phi_phase

    def attacked_state(self, tag: str) -> PureState:
        key = ("state", tag)
        if key not in self._cache:
            self._cache[key] = intercept_entangle(ghz_state(self.n, self.tag_phase(tag)), self.targets)
        return self._cache[key]

    # discrimination

    def conditional_states(self, honest_bases: Sequence[Basis], tag: str = PSI):
        """(probability, held-qubit state) for every honest outcome string."""
        st = self.attacked_state(tag)
        out = []
        for idx in range(2 ** len(self.honest)):
            bits = _bits(idx, len(self.honest))
            out.append(conditional_state(st, self.honest, honest_bases, bits))
        return out

    def discrimination(self, honest_bases: Sequence[Basis]) -> DiscriminationTable:
        honest_bases = tuple(Basis.parse(b) for b in honest_bases)
        key = ("disc", honest_bases)
        if key in self._cache:
            return self._cache[key]
        conds = self.conditional_states(honest_bases, PSI)
        live = [(i, p, s) for i, (p, s) in enumerate(conds) if s is not None]
        try:
            M = discriminating_basis([s for _, _, s in live])
            orthogonal = True
        except DiscriminationError:
            vecs = np.stack([s.amplitudes for _, _, s in live], axis=1)
            M = complete_basis(gram_schmidt(vecs))
            orthogonal = False
        # maximum-likelihood honest outcome for each measurement result
        like = np.zeros((M.shape[1], len(conds)))
        for i, p, s in live:
            like[:, i] = p * np.abs(M.conj().T @ s.amplitudes) ** 2
        inferred = tuple(_bits(int(np.argmax(row)), len(self.honest)) for row in like)
        table = DiscriminationTable(M, orthogonal, inferred)
        self._cache[key] = table
        return table

    # announcements

    def choose_basis(self, view: RoundView, drawn: Basis) -> Basis:
        if self.basis_policy == "mimic" or view.honest_bases is None:
            return drawn
        if Basis.Z in view.honest_bases:
            return Basis.Z
        n_y = sum(b is Basis.Y for b in view.honest_bases)
        return Basis.X if n_y % 2 == 0 else Basis.Y

    def bit_rule(self, all_bases: Sequence[Basis], honest_bits: Sequence[int]) -> int:
        """Bit that an ideal GHZ would most likely show next to ``honest_bits``.

        Returns -1 on a tie (caller draws a random bit).
        """
        all_bases = tuple(all_bases)
        key = ("rule", all_bases, tuple(honest_bits))
        if key in self._cache:
            return self._cache[key]
        weights = {PSI: 1.0} if self.prior == "psi" else {PSI: self.p_psi, PHI: 1 - self.p_psi}
        score = [0.0, 0.0]
        for tag, w in weights.items():
            if w == 0:
                continue
            ideal = ghz_state(self.n, self.tag_phase(tag))
            for c in (0, 1):
                prob, _ = project_outcomes(ideal, range(self.n), all_bases, tuple(honest_bits) + (c,))
                score[c] += w * prob
        bit = -1 if abs(score[0] - score[1]) < 1e-12 else int(score[1] > score[0])
        self._cache[key] = bit
        return bit

    def respond(
        self,
        view: RoundView,
        state: PureState,
        drawn_basis: Basis,
        u_measure: float,
        u_tie: float,
    ) -> tuple[Response, PureState]:
        """Per-round decision on a live register.

        ``state`` is the full register after the honest parties measured; only
        the held qubits are touched. Discrimination needs the honest bases, so
        without them the adversary announces a coin flip (and can still
        discriminate later for its own inference, which the caller does once
        the bases become public).
        """
        basis = self.choose_basis(view, drawn_basis)
        if view.honest_bases is None:
            return (
                Response(basis, int(u_tie < 0.5), Knowledge(False, used_seqs=view.visible_seqs)),
                state,
            )
        table = self.discrimination(view.honest_bases)
        k, post = measure_in_basis(state, self.held, table.basis, u_measure)
        guess = table.inferred[k]
        bit = self.bit_rule(tuple(view.honest_bases) + (basis,), guess)
        if bit < 0:
            bit = int(u_tie < 0.5)
        know = Knowledge(True, k, guess, view.visible_seqs)
        return Response(basis, bit, know), post

    def joint_distribution(self, tag: str, honest_bases: Sequence[Basis]) -> np.ndarray:
        """P(honest outcome index, discrimination index) as a 2-d array."""
        honest_bases = tuple(Basis.parse(b) for b in honest_bases)
        key = ("joint", tag, honest_bases)
        if key in self._cache:
            return self._cache[key]
        table = self.discrimination(honest_bases)
        conds = self.conditional_states(honest_bases, tag)
        J = np.zeros((len(conds), table.basis.shape[1]))
        for i, (p, s) in enumerate(conds):
            if s is None:
                continue
            J[i] = p * np.abs(table.basis.conj().T @ s.amplitudes) ** 2
        self._cache[key] = J
        return J


def discriminate_and_respond(
    adversary: InterceptEntangleAdversary,
    view: RoundView,
    state: PureState,
    drawn_basis: Basis | str,
    u_measure: float,
    u_tie: float,
) -> tuple[Basis, int]:
    resp, _ = adversary.respond(view, state, Basis.parse(drawn_basis), u_measure, u_tie)
    return resp.basis, resp.bit


def infer_dealer_bit(knowledge: Knowledge | None) -> int:
    """The adversary's guess of the dealer's bit for a sifted round."""
    if knowledge is None or not knowledge.discriminated:
        raise NoKnowledgeError("adversary did not discriminate this round")
    return knowledge.inferred_dealer_bit


# -- state-level analysis -----------------------------------------------------------


def attacked_mixture(n_parties: int, p_psi: float, phi_phase: float | None = None,
                     unitary: np.ndarray | None = None) -> Ensemble:
    """p_psi * |attacked Psi><..| + (1 - p_psi) * |attacked Phi><..|, optionally
    followed by a two-qubit unitary on the adversary's qubit and first ancilla."""
    adv = InterceptEntangleAdversary(n_parties, phi_phase)
    states = [adv.attacked_state(PSI), adv.attacked_state(PHI)]
    if unitary is not None:
        states = [apply_gate(s, unitary, (adv.party, adv.ancillas[0])) for s in states]
    members = [(w, s) for w, s in zip((p_psi, 1 - p_psi), states) if w > 0]
    return Ensemble(tuple(members))


def marginal_witness_values(ensemble: Ensemble, n_parties: int) -> dict[str, float]:
    """Both witnesses on the parties' reduced state (ancillas traced out)."""
    qubits = list(range(n_parties))
    return {
        v.value: evaluate_exact(build_witness(n_parties, v), ensemble, qubits)
        for v in Variant
    }


@dataclass(frozen=True)
class SweepPoint:
    params: tuple[float, ...]
    i1: float
    i2: float

    @property
    def worst(self) -> float:
        return min(self.i1, self.i2)


@dataclass
class SweepResult:
    points: list[SweepPoint]
    identity: SweepPoint
    best: SweepPoint
    p_psi: float
    phi_phase: float
    mode: str
    refined: list[SweepPoint] = field(default_factory=list)

    @property
    def max_min(self) -> float:
        return max(p.worst for p in self.points + self.refined)

    def to_table(self) -> str:
        head = "\t".join([f"p{i}" for i in range(16)] + ["I1", "I2"])
        rows = [head]
        for pt in self.points + self.refined:
            rows.append("\t".join([f"{v:.10g}" for v in pt.params] + [f"{pt.i1:.12g}", f"{pt.i2:.12g}"]))
        return "\n".join(rows) + "\n"


class _SweepEvaluator:
    def __init__(self, p_psi: float, phi_phase: float | None, mode: str):
        adv = InterceptEntangleAdversary(3, phi_phase)
        self.psi = adv.attacked_state(PSI)
        self.phi = adv.attacked_state(PHI)
        self.pair = (adv.party, adv.ancillas[0])
        self.p = p_psi
        self.mode = mode
        self.phase = adv.phi_phase
        self.w1 = build_witness(3, Variant.I1)
        self.w2 = build_witness(3, Variant.I2)

    def __call__(self, params) -> SweepPoint:
        U = composite_unitary(params)
        a = apply_gate(self.psi, U, self.pair)
        b = apply_gate(self.phi, U, self.pair)
        q = [0, 1, 2]
        if self.mode == "mixture":
            mix = Ensemble(tuple((w, s) for w, s in ((self.p, a), (1 - self.p, b)) if w > 0))
            i1 = evaluate_exact(self.w1, mix, q)
            i2 = evaluate_exact(self.w2, mix, q)
        else:
            # each witness on the preparation it is tested against
            i1 = evaluate_exact(self.w1, a, q)
            i2 = evaluate_exact(self.w2, b, q)
        return SweepPoint(tuple(float(x) for x in params), i1, i2)


def cheat_tradeoff_sweep(
    samples: int = 10_000,
    p_psi: float = 0.5,
    seed: int = 0,
    refine_iters: int = 200,
    phi_phase: float | None = None,
    mode: str = "mixture",
) -> SweepResult:
    """Random search over cheat unitaries on (adversary qubit, ancilla).

    Every sample is scored by min(I1, I2) on the honest parties' reduced
    state; the best one is then polished by a shrinking coordinate search.
    ``mode="per-tag"`` scores I1 on the attacked standard state and I2 on the
    attacked imaginary state instead of both on the mixture.
    """
    if samples < 1:
        raise ArgumentError("need at least one sample")
    if mode not in ("mixture", "per-tag"):
        raise ArgumentError(f"unknown sweep mode {mode!r}")
    ev = _SweepEvaluator(p_psi, phi_phase, mode)
    rng = np.random.default_rng(seed)
    identity = ev(np.zeros(16))
    points = [ev(random_cheat_params(rng)) for _ in range(samples)]
    best = max(points, key=lambda pt: pt.worst)
    refined = _coordinate_refine(ev, best, refine_iters)
    overall = max([best] + refined, key=lambda pt: pt.worst)
    return SweepResult(points, identity, overall, p_psi, ev.phase, mode, refined)


def _coordinate_refine(ev, start: SweepPoint, iters: int) -> list[SweepPoint]:
    x = np.array(start.params)
    cur = start
    step = 0.25
    out = []
    it = 0
    while it < iters and step > 1e-6:
        improved = False
        for i in range(16):
            if it >= iters:
                break
            for d in (step, -step):
                y = x.copy()
                y[i] += d
                pt = ev(y)
                out.append(pt)
                it += 1
                if pt.worst > cur.worst:
                    x, cur, improved = y, pt, True
                    break
        if not improved:
            step /= 2
    return out
