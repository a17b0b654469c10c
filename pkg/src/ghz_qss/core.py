"""
Exact pure-state simulation for small qubit registers.

Conventions
-----------
* Qubit 0 is the most significant bit of the basis index, so the amplitude
  vector reads left-to-right like ket notation: index 0b011 is |011>.
* Mixtures are weighted lists of pure states (:class:`Ensemble`). Reduced
  expectations are full-register expectations with identity letters on the
  traced qubits; no density matrix is ever built.
* All objects are immutable; every operation returns a new value and takes
  its randomness as an explicit argument.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ArgumentError,
    CapacityError,
    DiscriminationError,
    MeasurementError,
    ValidationError,
)

NORM_TOL = 1e-9
ORTHO_TOL = 1e-9

_max_qubits = 20


def max_qubits() -> int:
    return _max_qubits


def set_max_qubits(n: int) -> None:
    """Change the register-size cap (default 20)."""
    global _max_qubits
    if n < 1:
        raise ArgumentError(f"qubit cap must be >= 1, got {n}")
    _max_qubits = int(n)


def _check_capacity(n: int) -> None:
    if n < 1 or n > _max_qubits:
        raise CapacityError(f"{n} qubits outside allowed range 1..{_max_qubits}")


# -- single-qubit matrices ----------------------------------------------------

_SQRT2_INV = 1 / np.sqrt(2)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z}


class Basis(enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"

    @property
    def eigenvectors(self) -> np.ndarray:
        """Columns are the (+, -) eigenstates."""
        return _EIGVECS[self]

    @classmethod
    def parse(cls, s: "str | Basis") -> "Basis":
        if isinstance(s, Basis):
            return s
        try:
            return cls(s.upper())
        except (ValueError, AttributeError):
            raise ArgumentError(f"unknown basis {s!r}") from None


_EIGVECS = {
    Basis.X: np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    Basis.Y: np.array([[1, 1], [1j, -1j]], dtype=complex) * _SQRT2_INV,
    Basis.Z: np.eye(2, dtype=complex),
}
for _m in _EIGVECS.values():
    _m.setflags(write=False)


class Outcome(NamedTuple):
    """Measurement result. ``bit`` 0 is the + eigenstate, 1 the - eigenstate."""

    bit: int

    @property
    def sign(self) -> int:
        return 1 - 2 * self.bit

    @classmethod
    def from_sign(cls, sign: int) -> "Outcome":
        return cls((1 - sign) // 2)


# -- states ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_capacity(self.n_qubits)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.n_qubits:
            raise ArgumentError(
                f"{amps.size} amplitudes do not describe {self.n_qubits} qubits"
            )
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1) > NORM_TOL:
            raise ValidationError(f"state not normalized: |psi|^2 = {norm2!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec: Iterable[complex], normalize: bool = False) -> "PureState":
        amps = np.asarray(list(vec) if not isinstance(vec, np.ndarray) else vec, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise ArgumentError(f"vector length {amps.size} is not a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    @classmethod
    def basis_state(cls, bits: str | Sequence[int]) -> "PureState":
        """Computational basis state from a bit string such as ``"010"``."""
        bits = [int(b) for b in bits]
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int("".join(map(str, bits)), 2)] = 1
        return cls(len(bits), amps)

    @classmethod
    def from_kets(cls, terms: dict[str, complex]) -> "PureState":
        """Build a (normalized) state from ``{"0101": coeff, ...}``."""
        n = len(next(iter(terms)))
        amps = np.zeros(2**n, dtype=complex)
        for ket, c in terms.items():
            if len(ket) != n:
                raise ArgumentError("kets of unequal length")
            amps[int(ket, 2)] += c
        return cls.from_vector(amps, normalize=True)

    def tensor(self, other: "PureState") -> "PureState":
        return PureState(
            self.n_qubits + other.n_qubits, np.kron(self.amplitudes, other.amplitudes)
        )

    def with_ancillas(self, count: int) -> "PureState":
        """Append ``count`` fresh |0> qubits at the end of the register."""
        if count == 0:
            return self
        _check_capacity(self.n_qubits + count)
        return self.tensor(PureState.basis_state("0" * count))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probability(self, bits: str) -> float:
        return float(abs(self.amplitudes[int(bits, 2)]) ** 2)

    def ket_dict(self, tol: float = 1e-12) -> dict[str, complex]:
        return {
            format(i, f"0{self.n_qubits}b"): complex(a)
            for i, a in enumerate(self.amplitudes)
            if abs(a) > tol
        }

    def __repr__(self) -> str:
        terms = " + ".join(
            f"({a.real:+.4f}{a.imag:+.4f}j)|{k}>" for k, a in self.ket_dict(1e-9).items()
        )
        return f"PureState({terms})"


@dataclass(frozen=True)
class Ensemble:
    """Weighted mixture of pure states on a common register."""

    members: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        members = tuple((float(w), s) for w, s in self.members)
        if not members:
            raise ArgumentError("empty ensemble")
        n = members[0][1].n_qubits
        if any(s.n_qubits != n for _, s in members):
            raise ArgumentError("ensemble members act on different register sizes")
        if any(w < 0 for w, _ in members):
            raise ValidationError("negative ensemble weight")
        total = sum(w for w, _ in members)
        if abs(total - 1) > NORM_TOL:
            raise ValidationError(f"ensemble weights sum to {total!r}")
        object.__setattr__(self, "members", members)

    @property
    def n_qubits(self) -> int:
        return self.members[0][1].n_qubits

    @classmethod
    def pure(cls, state: PureState) -> "Ensemble":
        return cls(((1.0, state),))

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence[PureState]) -> "Ensemble":
        return cls(tuple(zip(weights, states)))

    def map(self, fn) -> "Ensemble":
        return Ensemble(tuple((w, fn(s)) for w, s in self.members))


def as_ensemble(x: "PureState | Ensemble") -> Ensemble:
    return x if isinstance(x, Ensemble) else Ensemble.pure(x)


# -- Pauli strings ----------------------------------------------------------------

_LETTER_ALIASES = {"1": "I", "i": "I", "I": "I", "x": "X", "X": "X",
                   "y": "Y", "Y": "Y", "z": "Z", "Z": "Z"}


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-qubit Paulis, one letter per qubit.

    Accepts the compact correlator notation, so ``PauliString.parse("z1z")``
    is Z on qubits 0 and 2 with identity on qubit 1.
    """

    letters: tuple[str, ...]

    def __post_init__(self):
        letters = tuple(self.letters)
        for c in letters:
            if c not in ("I", "X", "Y", "Z"):
                raise ArgumentError(f"invalid Pauli letter {c!r}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, s: "str | PauliString") -> "PauliString":
        if isinstance(s, PauliString):
            return s
        try:
            return cls(tuple(_LETTER_ALIASES[c] for c in s))
        except KeyError as e:
            raise ArgumentError(f"invalid Pauli letter {e.args[0]!r} in {s!r}") from None

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(("I",) * n)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join("1" if c == "I" else c.lower() for c in self.letters)

    def count(self, letter: str) -> int:
        return self.letters.count(letter)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    def is_identity(self) -> bool:
        return not self.support

    def padded(self, extra: int) -> "PauliString":
        """Same operator with identity on ``extra`` appended qubits."""
        return PauliString(self.letters + ("I",) * extra)

    def dense_matrix(self) -> np.ndarray:
        """Full 2^n x 2^n matrix. Only meant for small registers and tests."""
        m = np.ones((1, 1), dtype=complex)
        for c in self.letters:
            m = np.kron(m, PAULI_MATRICES[c])
        return m


def _pauli_apply(amps: np.ndarray, p: PauliString) -> np.ndarray:
    """Return P|psi> using index arithmetic (no dense matrix)."""
    n = len(p)
    idx = np.arange(amps.size)
    flip = 0
    phase = np.ones(amps.size, dtype=complex)
    for q, c in enumerate(p.letters):
        if c == "I":
            continue
        shift = n - 1 - q
        bit = (idx >> shift) & 1
        if c == "X":
            flip |= 1 << shift
        elif c == "Y":
            flip |= 1 << shift
            # Y|0> = i|1>, Y|1> = -i|0>
            phase *= np.where(bit == 0, 1j, -1j)
        else:
            phase *= 1 - 2 * bit
    out = np.empty_like(amps)
    out[idx ^ flip] = phase * amps
    return out


def expectation(ensemble: "Ensemble | PureState", p: "PauliString | str") -> float:
    """Ensemble-averaged expectation value of a Pauli string."""
    ensemble = as_ensemble(ensemble)
    p = PauliString.parse(p)
    if len(p) != ensemble.n_qubits:
        raise ArgumentError(
            f"Pauli string {p} has length {len(p)}, state has {ensemble.n_qubits} qubits"
        )
    if p.is_identity():
        return 1.0
    total = 0.0
    for w, s in ensemble.members:
        total += w * np.vdot(s.amplitudes, _pauli_apply(s.amplitudes, p)).real
    return float(total)


# -- gates ----------------------------------------------------------------------


def apply_gate(state: PureState, gate: np.ndarray, targets: Sequence[int] | int) -> PureState:
    """Apply a 1- or 2-qubit unitary. For two targets ``targets[0]`` is the
    more significant qubit of the gate matrix (the control, for CNOT)."""
    if isinstance(targets, (int, np.integer)):
        targets = (int(targets),)
    targets = tuple(int(t) for t in targets)
    gate = np.asarray(gate, dtype=complex)
    k = len(targets)
    if k not in (1, 2) or gate.shape != (2**k, 2**k):
        raise ArgumentError(f"gate of shape {gate.shape} does not match {k} target(s)")
    if len(set(targets)) != k:
        raise ArgumentError(f"repeated target qubit in {targets}")
    n = state.n_qubits
    if any(t < 0 or t >= n for t in targets):
        raise ArgumentError(f"target {targets} out of range for {n} qubits")
    if not np.allclose(gate.conj().T @ gate, np.eye(2**k), atol=NORM_TOL, rtol=0):
        raise ValidationError("gate is not unitary")
    return PureState(n, _apply_matrix(state.amplitudes, gate, targets, n))


def _apply_matrix(amps: np.ndarray, gate: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    k = len(targets)
    psi = amps.reshape([2] * n)
    g = gate.reshape([2] * (2 * k))
    psi = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), list(targets)))
    # tensordot puts the gate's output axes first; move them back into place
    psi = np.moveaxis(psi, list(range(k)), list(targets))
    return psi.reshape(-1)


def ghz_state(n_qubits: int, phase: float = 0.0) -> PureState:
    """(|0...0> + e^{i phase}|1...1>)/sqrt(2)."""
    if n_qubits < 2:
        raise CapacityError(f"GHZ state needs at least 2 qubits, got {n_qubits}")
    _check_capacity(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = _SQRT2_INV
    amps[-1] = np.exp(1j * phase) * _SQRT2_INV
    return PureState(n_qubits, amps)


# -- measurement ----------------------------------------------------------------


def _project_qubit(amps: np.ndarray, qubit: int, n: int, vec: np.ndarray) -> np.ndarray:
    """Unnormalized (|v><v| on ``qubit``) |psi>."""
    psi = amps.reshape(2**qubit, 2, -1)
    coeff = vec[0].conjugate() * psi[:, 0, :] + vec[1].conjugate() * psi[:, 1, :]
    out = np.empty_like(psi)
    out[:, 0, :] = vec[0] * coeff
    out[:, 1, :] = vec[1] * coeff
    return out.reshape(-1)


def outcome_probabilities(state: PureState, qubit: int, basis: Basis | str) -> tuple[float, float]:
    basis = Basis.parse(basis)
    if not 0 <= qubit < state.n_qubits:
        raise ArgumentError(f"qubit {qubit} out of range")
    vecs = basis.eigenvectors
    p_plus = float(np.linalg.norm(_project_qubit(state.amplitudes, qubit, state.n_qubits, vecs[:, 0])) ** 2)
    return p_plus, max(0.0, 1.0 - p_plus)


def measure(
    state: PureState, qubit: int, basis: Basis | str, randomness: float
) -> tuple[Outcome, PureState]:
    """Projective single-qubit measurement.

    The + outcome is selected iff ``randomness < P(+)``. The qubit stays in
    the register, left in the observed eigenstate.
    """
    basis = Basis.parse(basis)
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise ArgumentError(f"qubit {qubit} out of range for {n} qubits")
    vecs = basis.eigenvectors
    plus = _project_qubit(state.amplitudes, qubit, n, vecs[:, 0])
    p_plus = float(np.vdot(plus, plus).real)
    if randomness < p_plus:
        bit, branch, prob = 0, plus, p_plus
    else:
        bit = 1
        branch = _project_qubit(state.amplitudes, qubit, n, vecs[:, 1])
        prob = float(np.vdot(branch, branch).real)
    if prob < 1e-15:
        raise MeasurementError(
            f"selected zero-weight branch (qubit {qubit}, basis {basis.value}, "
            f"bit {bit}, P(+)={p_plus!r}, randomness={randomness!r})"
        )
    return Outcome(bit), PureState(n, branch / np.sqrt(prob))


def project_outcomes(
    state: PureState, qubits: Sequence[int], bases: Sequence[Basis | str], bits: Sequence[int]
) -> tuple[float, np.ndarray]:
    """Probability of a joint outcome and the unnormalized projected amplitudes."""
    amps = state.amplitudes
    for q, b, bit in zip(qubits, bases, bits):
        amps = _project_qubit(amps, q, state.n_qubits, Basis.parse(b).eigenvectors[:, bit])
    return float(np.vdot(amps, amps).real), amps


def conditional_state(
    state: PureState, qubits: Sequence[int], bases: Sequence[Basis | str], bits: Sequence[int]
) -> tuple[float, PureState | None]:
    """State of the *remaining* qubits after observing ``bits`` on ``qubits``.

    Returns (probability, state); state is None for a zero-probability outcome.
    """
    n = state.n_qubits
    qubits = [int(q) for q in qubits]
    if not qubits:
        return 1.0, state
    if len(qubits) >= n:
        raise ArgumentError("no qubits left after conditioning")
    psi = np.tensordot(
        state.amplitudes.reshape([2] * n),
        _outer_conj(bases, bits),
        axes=(qubits, list(range(len(qubits)))),
    ).reshape(-1)
    prob = float(np.vdot(psi, psi).real)
    if prob < 1e-15:
        return prob, None
    return prob, PureState(n - len(qubits), psi / np.sqrt(prob))


def _outer_conj(bases, bits) -> np.ndarray:
    t = np.ones((), dtype=complex)
    for b, bit in zip(bases, bits):
        t = np.multiply.outer(t, Basis.parse(b).eigenvectors[:, bit].conjugate())
    return t


def measure_in_basis(
    state: PureState, qubits: Sequence[int], basis: np.ndarray, randomness: float
) -> tuple[int, PureState]:
    """Measure ``qubits`` jointly in an orthonormal basis (columns of ``basis``).

    Outcome ``k`` is chosen by inverse CDF over the Born probabilities.
    """
    probs, branches = basis_probabilities(state, qubits, basis, with_branches=True)
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, randomness * cdf[-1], side="right"))
    k = min(k, len(probs) - 1)
    if probs[k] < 1e-15:
        raise MeasurementError(f"selected zero-weight basis element {k}")
    return k, PureState(state.n_qubits, branches[k] / np.sqrt(probs[k]))


def basis_probabilities(
    state: PureState, qubits: Sequence[int], basis: np.ndarray, with_branches: bool = False
):
    n = state.n_qubits
    qubits = list(qubits)
    k = len(qubits)
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (2**k, 2**k):
        raise ArgumentError("basis dimension does not match qubit count")
    # move measured qubits to the front
    rest = [q for q in range(n) if q not in qubits]
    psi = np.transpose(state.amplitudes.reshape([2] * n), qubits + rest).reshape(2**k, -1)
    coeff = basis.conj().T @ psi  # row j = <b_j| psi
    probs = np.einsum("ij,ij->i", coeff.conj(), coeff).real
    if not with_branches:
        return probs
    inv = np.argsort(qubits + rest)
    branches = []
    for j in range(2**k):
        full = np.outer(basis[:, j], coeff[j]).reshape([2] * n)
        branches.append(np.transpose(full, inv).reshape(-1))
    return probs, branches


def discriminating_basis(states: Sequence[PureState]) -> np.ndarray:
    """Orthonormal basis whose first columns are the given (orthogonal) states.

    The remaining columns are a Gram-Schmidt completion from the
    computational basis.
    """
    states = list(states)
    if not states:
        raise ArgumentError("no states to discriminate")
    dim = states[0].amplitudes.size
    if any(s.amplitudes.size != dim for s in states):
        raise ArgumentError("states of unequal dimension")
    if len(states) > dim:
        raise DiscriminationError(f"{len(states)} states cannot be orthogonal in dimension {dim}")
    vecs = np.stack([s.amplitudes for s in states], axis=1)
    gram = vecs.conj().T @ vecs
    off = gram - np.diag(np.diag(gram))
    if np.max(np.abs(off), initial=0.0) > ORTHO_TOL:
        i, j = np.unravel_index(np.argmax(np.abs(off)), off.shape)
        raise DiscriminationError(
            f"states {i} and {j} are not orthogonal (|<i|j>| = {abs(off[i, j]):.3g})"
        )
    return complete_basis(vecs)


def complete_basis(vecs: np.ndarray) -> np.ndarray:
    """Gram-Schmidt: extend orthonormal columns to a full basis."""
    dim = vecs.shape[0]
    cols = [v / np.linalg.norm(v) for v in vecs.T]
    for e in np.eye(dim, dtype=complex):
        if len(cols) == dim:
            break
        v = e.copy()
        for c in cols:
            v = v - np.vdot(c, v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
    return np.stack(cols, axis=1)


def gram_schmidt(vecs: np.ndarray) -> np.ndarray:
    """Orthonormalize columns in order, dropping (near) dependent ones."""
    cols: list[np.ndarray] = []
    for v in vecs.T:
        w = v.astype(complex)
        for c in cols:
            w = w - np.vdot(c, w) * c
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            cols.append(w / nw)
    return np.stack(cols, axis=1)
