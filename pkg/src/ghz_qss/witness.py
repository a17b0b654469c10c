"""
Linear biseparability witnesses for n-qubit GHZ correlations.

Each witness is a rational combination of Pauli-string correlators that is
``<= 0`` on every biseparable state. Two variants exist:

* ``I1`` collects the X/Y strings with an even number of Y letters; it is
  violated by the phase-0 GHZ state.
* ``I2`` collects the strings with an odd number of Y letters; it is violated
  by the GHZ state with relative phase +-pi/2. Which sign of the phase depends
  on ``n``, so :func:`calibrate_phase` fixes it numerically.

Both share the Z part ``-(1/16) * [(2^(n-1) - 1) * 1...1 - sum of even-weight
Z strings]``.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Ensemble, PauliString, PureState, as_ensemble, expectation, ghz_state
from .errors import ArgumentError, InsufficientDataError

XY_COEFF = Fraction(1, 8)
Z_COEFF = Fraction(1, 16)
# Z-part coefficient that makes the linear form <= 0 on every biseparable
# state: linearizing |rho_{0..0,1..1}| <= sum sqrt(rho_jj rho_kk) with
# sqrt(ab) <= (a + b) / 2 gives equal X/Y and Z coefficients. With Z_COEFF
# the state |Phi+>_AB |+>_C already reaches +1/8.
SOUND_Z_COEFF = Fraction(1, 8)

# announced-basis codes used by the columnar estimator
BASIS_CODE = {"X": 0, "Y": 1, "Z": 2}


class Variant(enum.Enum):
    I1 = "I1"
    I2 = "I2"

    @classmethod
    def parse(cls, v: "str | Variant") -> "Variant":
        if isinstance(v, Variant):
            return v
        try:
            return cls(str(v).upper())
        except ValueError:
            raise ArgumentError(f"unknown witness variant {v!r}") from None


@dataclass(frozen=True)
class WitnessSpec:
    n_qubits: int
    variant: Variant
    terms: tuple[tuple[Fraction, PauliString], ...]

    def as_dict(self) -> dict[str, Fraction]:
        return {str(p): c for c, p in self.terms}

    @property
    def xy_terms(self):
        return [(c, p) for c, p in self.terms if p.count("X") + p.count("Y") > 0]

    @property
    def z_terms(self):
        return [(c, p) for c, p in self.terms if p.count("Z") > 0]

    @property
    def identity_coefficient(self) -> Fraction:
        return sum((c for c, p in self.terms if p.is_identity()), Fraction(0))

    def to_table(self) -> str:
        """Plain-text audit table, one ``coefficient<TAB>string`` row per term."""
        rows = [f"# witness {self.variant.value} n={self.n_qubits}", "coefficient\tstring"]
        rows += [f"{c}\t{p}" for c, p in self.terms]
        return "\n".join(rows) + "\n"


def _xy_sign(n: int, n_y: int, variant: Variant) -> int:
    if variant is Variant.I1:
        return (-1) ** (n_y // 2)
    # Reproduces the published n=3 and n=4 term lists; the global sign is
    # absorbed by the calibrated phase of the Phi state.
    return (-1) ** (n_y // 2 + (n // 2))


def build_witness(
    n_qubits: int, variant: "Variant | str", z_coefficient: Fraction = Z_COEFF
) -> WitnessSpec:
    """Term list of the witness. ``z_coefficient`` scales the Z part; the
    default reproduces the published 3- and 4-party lists, ``SOUND_Z_COEFF``
    gives a form that is provably non-positive on biseparable states."""
    variant = Variant.parse(variant)
    z_coefficient = Fraction(z_coefficient)
    if n_qubits < 3:
        raise ArgumentError(f"witness needs n >= 3 qubits, got {n_qubits}")
    from .core import max_qubits

    if n_qubits > max_qubits():
        from .errors import CapacityError

        raise CapacityError(f"{n_qubits} qubits exceeds cap {max_qubits()}")
    n = n_qubits
    parity = 0 if variant is Variant.I1 else 1
    terms: list[tuple[Fraction, PauliString]] = []
    # X/Y part, ordered by number of Y letters then lexicographically with X first
    xy = [
        s for s in itertools.product("XY", repeat=n) if s.count("Y") % 2 == parity
    ]
    xy.sort(key=lambda s: (s.count("Y"), [c == "X" for c in s][::-1]))
    for s in xy:
        terms.append((XY_COEFF * _xy_sign(n, s.count("Y"), variant), PauliString(s)))
    terms.append((-z_coefficient * (2 ** (n - 1) - 1), PauliString.identity(n)))
    zs = [
        s for s in itertools.product("IZ", repeat=n)
        if s.count("Z") >= 2 and s.count("Z") % 2 == 0
    ]
    zs.sort(key=lambda s: (s.count("Z"), s[::-1]))
    for s in zs:
        terms.append((z_coefficient, PauliString(s)))
    return WitnessSpec(n, variant, tuple(terms))


def evaluate_exact(
    spec: WitnessSpec,
    state: "Ensemble | PureState",
    qubits: Sequence[int] | None = None,
) -> float:
    """Exact witness value. ``qubits`` selects the register qubits that play
    the witness parties (identity on all others), which is how reduced states
    of larger registers are evaluated."""
    ens = as_ensemble(state)
    if qubits is None:
        if ens.n_qubits != spec.n_qubits:
            raise ArgumentError(
                f"witness on {spec.n_qubits} qubits, state has {ens.n_qubits}"
            )
        embed = lambda p: p  # noqa: E731
    else:
        qubits = list(qubits)
        if len(qubits) != spec.n_qubits or len(set(qubits)) != len(qubits):
            raise ArgumentError("qubit map must list each witness party once")
        if max(qubits) >= ens.n_qubits:
            raise ArgumentError("qubit map exceeds register size")

        def embed(p: PauliString) -> PauliString:
            letters = ["I"] * ens.n_qubits
            for pos, q in enumerate(qubits):
                letters[q] = p.letters[pos]
            return PauliString(tuple(letters))

    return float(sum(float(c) * expectation(ens, embed(p)) for c, p in spec.terms))


@dataclass(frozen=True)
class PhaseCalibration:
    n_qubits: int
    phase: float
    value_plus: float
    value_minus: float

    def as_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "phi_phase": self.phase,
            "phi_phase_label": "+pi/2" if self.phase > 0 else "-pi/2",
            "I2_at_plus_pi_2": self.value_plus,
            "I2_at_minus_pi_2": self.value_minus,
        }


def calibrate_phase(n_qubits: int) -> PhaseCalibration:
    """Pick the GHZ relative phase (+pi/2 or -pi/2) at which I2 is violated."""
    spec = build_witness(n_qubits, Variant.I2)
    plus = evaluate_exact(spec, ghz_state(n_qubits, np.pi / 2))
    minus = evaluate_exact(spec, ghz_state(n_qubits, -np.pi / 2))
    phase = np.pi / 2 if plus > minus else -np.pi / 2
    return PhaseCalibration(n_qubits, float(phase), plus, minus)


# -- finite statistics ----------------------------------------------------------


@dataclass(frozen=True)
class WitnessEstimate:
    value: float
    standard_error: float
    per_term_counts: Mapping[str, int] = field(default_factory=dict)
    per_term_means: Mapping[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "standard_error": self.standard_error,
            "per_term_counts": dict(self.per_term_counts),
            "per_term_means": dict(self.per_term_means),
        }


def estimate_from_arrays(spec: WitnessSpec, bases: np.ndarray, bits: np.ndarray) -> WitnessEstimate:
    """Columnar estimator.

    ``bases`` holds announced basis codes (0=X, 1=Y, 2=Z) and ``bits`` the
    announced outcome bits, both shaped (rounds, n). A term is estimated from
    every round whose announced bases agree with the term on its support;
    letters off the support are unconstrained.
    """
    bases = np.asarray(bases)
    bits = np.asarray(bits)
    if bases.ndim != 2 or bases.shape != bits.shape:
        raise ArgumentError("bases and bits must be equal-shaped 2-d arrays")
    if bases.shape[1] != spec.n_qubits:
        raise ArgumentError(
            f"records carry {bases.shape[1]} parties, witness expects {spec.n_qubits}"
        )
    signs = 1 - 2 * bits.astype(np.int8)
    value = 0.0
    var = 0.0
    counts: dict[str, int] = {}
    means: dict[str, float] = {}
    for coeff, p in spec.terms:
        key = str(p)
        if p.is_identity():
            value += float(coeff)
            continue
        support = list(p.support)
        want = np.array([BASIS_CODE[p.letters[q]] for q in support])
        mask = np.all(bases[:, support] == want, axis=1)
        n_match = int(mask.sum())
        counts[key] = n_match
        if n_match == 0:
            raise InsufficientDataError(f"no rounds match witness term {key}", term=key)
        prod = np.prod(signs[mask][:, support], axis=1, dtype=np.int64)
        mean = float(prod.mean())
        means[key] = mean
        # sample variance of a +-1 variable
        sample_var = float(prod.var(ddof=1)) if n_match > 1 else 1.0
        value += float(coeff) * mean
        var += float(coeff) ** 2 * sample_var / n_match
    return WitnessEstimate(value, float(np.sqrt(var)), counts, means)


def estimate_from_rounds(spec: WitnessSpec, records: Iterable) -> WitnessEstimate:
    """Estimate a witness from announced round data (see :func:`estimate_from_arrays`)."""
    records = list(records)
    if not records:
        raise InsufficientDataError("no rounds to estimate from")
    bases = np.array(
        [[BASIS_CODE[str(getattr(b, "value", b))] for b in r.announced_bases] for r in records]
    )
    bits = np.array([list(r.announced_outcomes) for r in records])
    return estimate_from_arrays(spec, bases, bits)


# -- decision -----------------------------------------------------------------------


@dataclass(frozen=True)
class Decision:
    accepted: bool
    reason: str | None = None
    failing: tuple[str, ...] = ()
    checked: bool = True

    @property
    def label(self) -> str:
        if not self.checked:
            return "Unchecked"
        return "Accept" if self.accepted else "Abort"

    def as_dict(self) -> dict:
        return {
            "decision": self.label,
            "reason": self.reason,
            "failing_variants": list(self.failing),
        }


TAG_VARIANT = {"PsiStandard": Variant.I1, "PhiImaginary": Variant.I2}


def decide_secure(
    i1: WitnessEstimate | None,
    i2: WitnessEstimate | None,
    state_tag_counts: Mapping[str, int],
    k_sigma: float = 3.0,
) -> Decision:
    """Accept only if every prepared state's witness is violated by more than
    ``k_sigma`` standard errors. A missing estimate is allowed only for a tag
    that was never prepared."""
    if k_sigma <= 0:
        raise ArgumentError("k_sigma must be positive")
    estimates = {Variant.I1: i1, Variant.I2: i2}
    failing = []
    used = 0
    for tag, variant in TAG_VARIANT.items():
        if state_tag_counts.get(tag, 0) == 0:
            continue
        est = estimates[variant]
        if est is None:
            raise InsufficientDataError(
                f"{variant.value} estimate missing although {tag} was prepared",
                term=variant.value,
            )
        used += 1
        if not est.value > k_sigma * est.standard_error:
            failing.append(variant.value)
    if used == 0:
        raise InsufficientDataError("no prepared states to test")
    if failing:
        return Decision(False, " and ".join(failing) + " not violated", tuple(failing))
    return Decision(True)
