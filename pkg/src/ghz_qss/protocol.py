"""
n-party GHZ secret sharing with a witness-based eavesdropping check.

Round life cycle:

1. The dealer (party 0) prepares GHZ_n, phase 0 ("PsiStandard") with
   probability ``p_psi``, otherwise the calibrated imaginary phase
   ("PhiImaginary"), and distributes one qubit per party.
2. An active adversary (last party) may transform the qubits in flight.
3. Every party picks Z with probability ``q_z``, else X or Y evenly, and
   measures.
4. Bases and results are announced in the order fixed by the ordering policy.
5. Only after all announcements the dealer marks a random ``test_fraction``
   of the rounds as witness tests and reveals the state tags.
6. Remaining rounds are kept as key when no Z was used and the Y-count
   parity matches the tag; the rest are discarded.

All randomness comes from one seeded generator; round ``i`` always consumes
row ``i`` of the uniform table, so transcripts depend only on the seed.
"""
from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from . import core
from .adversary import (
    PHI,
    PSI,
    InterceptEntangleAdversary,
    Knowledge,
    RoundView,
    attacked_mixture,
    composite_unitary,
    marginal_witness_values,
)
from .core import Basis, PauliString, PureState, apply_gate, expectation, ghz_state, project_outcomes
from .errors import (
    ArgumentError,
    CapacityError,
    InconsistentComboError,
    InsufficientDataError,
)
from .witness import (
    BASIS_CODE,
    Decision,
    PhaseCalibration,
    Variant,
    WitnessEstimate,
    build_witness,
    calibrate_phase,
    decide_secure,
    estimate_from_arrays,
)

TAGS = (PSI, PHI)
ORDERINGS = ("naive", "reversed")
ATTACKS = ("none", "intercept", "unitary")
USAGES = ("Key", "WitnessTest", "Discarded")
CODE_BASIS = (Basis.X, Basis.Y, Basis.Z)

REPORT_SCHEMA = "ghz-qss/report/1"


@dataclass
class ProtocolConfig:
    n_parties: int = 3
    num_rounds: int = 10_000
    q_z: float = 0.2
    p_psi: float = 0.5
    test_fraction: float = 0.5
    ordering: str = "naive"
    attack: str = "none"
    attack_params: tuple[float, ...] | None = None
    k_sigma: float = 3.0
    seed: int = 0
    witness_check: bool = True
    adversary_prior: str = "psi"
    adversary_basis: str = "mimic"

    def validate(self) -> "ProtocolConfig":
        if int(self.n_parties) != self.n_parties or self.n_parties < 3:
            raise ArgumentError(f"n_parties must be an integer >= 3, got {self.n_parties}")
        if int(self.num_rounds) != self.num_rounds or self.num_rounds < 1:
            raise ArgumentError(f"num_rounds must be a positive integer, got {self.num_rounds}")
        for name in ("q_z", "p_psi"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ArgumentError(f"{name} must lie in [0, 1], got {v}")
        if not 0 < self.test_fraction <= 1:
            raise ArgumentError(f"test_fraction must lie in (0, 1], got {self.test_fraction}")
        if self.ordering not in ORDERINGS:
            raise ArgumentError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        if self.attack not in ATTACKS:
            raise ArgumentError(f"attack must be one of {ATTACKS}, got {self.attack!r}")
        if self.attack == "unitary":
            if self.attack_params is None or len(self.attack_params) != 16:
                raise ArgumentError("unitary attack needs 16 attack_params")
        if self.k_sigma <= 0:
            raise ArgumentError("k_sigma must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ArgumentError("seed must be a 64-bit unsigned integer")
        if self.adversary_prior not in ("psi", "bayes"):
            raise ArgumentError(f"unknown adversary_prior {self.adversary_prior!r}")
        if self.adversary_basis not in ("mimic", "psi-valid"):
            raise ArgumentError(f"unknown adversary_basis {self.adversary_basis!r}")
        register = self.n_parties + (self.n_parties - 2 if self.attack != "none" else 0)
        if register > core.max_qubits():
            raise CapacityError(
                f"{register} qubits needed (parties plus ancillas), cap is {core.max_qubits()}"
            )
        return self

    def as_dict(self) -> dict:
        d = asdict(self)
        d["attack_params"] = list(self.attack_params) if self.attack_params is not None else None
        return d


# -- small protocol rules -------------------------------------------------------------


@lru_cache(maxsize=None)
def _phi_phase(n: int) -> float:
    return calibrate_phase(n).phase


def tag_state(tag: str, n: int) -> PureState:
    if tag == PSI:
        return ghz_state(n, 0.0)
    if tag == PHI:
        return ghz_state(n, _phi_phase(n))
    raise ArgumentError(f"unknown state tag {tag!r}")


def valid_combo(bases: Sequence[Basis | str], tag: str) -> bool:
    """Whether the basis combination yields key material for the given state."""
    bases = [Basis.parse(b) for b in bases]
    if Basis.Z in bases:
        return False
    n_y = sum(b is Basis.Y for b in bases)
    if tag == PSI:
        return n_y % 2 == 0
    if tag == PHI:
        return n_y % 2 == 1
    raise ArgumentError(f"unknown state tag {tag!r}")


@lru_cache(maxsize=None)
def _parity_sign(bases: tuple[Basis, ...], tag: str) -> float:
    p = PauliString(tuple(b.value for b in bases))
    return expectation(tag_state(tag, len(bases)), p)


def parity_bit(bases: Sequence[Basis | str], tag: str) -> int:
    """XOR of all parties' bits for a deterministic combination."""
    bases = tuple(Basis.parse(b) for b in bases)
    s = _parity_sign(bases, tag)
    if abs(abs(s) - 1) > 1e-9:
        raise InconsistentComboError(
            f"bases {''.join(b.value for b in bases)} give <P> = {s:.3g} on {tag}"
        )
    return 0 if s > 0 else 1


def reconstruct_dealer_bit(
    bases: Sequence[Basis | str], tag: str, other_bits: Sequence[int]
) -> int:
    """Dealer bit recovered by the non-dealer parties pooling their bits."""
    b = parity_bit(bases, tag)
    for x in other_bits:
        b ^= int(x)
    return b


# -- records ------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundRecord:
    round_id: int
    state_tag: str
    true_bases: tuple[str, ...]
    true_outcomes: tuple[int, ...]  # -1: party did not measure in a Pauli basis
    announced_bases: tuple[str, ...]
    announced_outcomes: tuple[int, ...]
    usage: str
    attacked: bool

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("true_bases", "true_outcomes", "announced_bases", "announced_outcomes"):
            d[k] = list(d[k])
        return d


@dataclass(frozen=True)
class Event:
    seq: int
    round: int
    party: int
    kind: str  # basis | result | usage | tag | dealer_result
    value: str | int

    def as_list(self) -> list:
        return [self.seq, self.round, self.party, self.kind, self.value]


@dataclass
class SecurityReport:
    schema: str
    config: dict
    seed: int
    phase_calibration: dict
    tag_counts: dict
    usage_counts: dict
    witness: dict
    witness_errors: dict
    decision: dict
    qber: float | None
    key_length: int
    key_bits: str
    sift_rate: float | None
    expected_sift_rate: float
    adversary_accuracy: float | None
    attack_analysis: dict | None
    error_model: str = "per-term sample variances, cross-term covariance ignored"

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def decision_label(self) -> str:
        return self.decision["decision"]


# -- round sampling -------------------------------------------------------------------


def _sequential_sample(joint: np.ndarray, radices: Sequence[int], us: np.ndarray) -> np.ndarray:
    """Sample digits one at a time from their conditional distributions.

    ``joint`` is flat over digit tuples (row-major, first digit slowest);
    ``us`` is (rows, len(radices)). Digit ``d`` is the smallest value whose
    conditional CDF exceeds ``u * total``, which for a binary digit means
    "0 iff u < P(0 | prefix)", the same rule as :func:`core.measure`.
    """
    rows = us.shape[0]
    table = joint.reshape(radices)
    prefix = np.zeros(rows, dtype=np.int64)
    out = np.zeros((rows, len(radices)), dtype=np.int64)
    for j, r in enumerate(radices):
        marg = table.reshape(int(np.prod(radices[: j + 1])), -1).sum(axis=1)
        cond = marg.reshape(-1, r)[prefix]  # (rows, r)
        cdf = np.cumsum(cond, axis=1)
        target = us[:, j] * cdf[:, -1]
        d = np.sum(cdf[:, :-1] <= target[:, None], axis=1)
        # never land on a zero-probability digit through rounding
        bad = cond[np.arange(rows), d] <= 0
        if np.any(bad):
            for i in np.nonzero(bad)[0]:
                nz = np.nonzero(cond[i] > 0)[0]
                d[i] = nz[np.argmin(np.abs(nz - d[i]))]
        out[:, j] = d
        prefix = prefix * r + d
    return out


@lru_cache(maxsize=None)
def _honest_joint(tag: str, bases: tuple[Basis, ...], n: int) -> np.ndarray:
    st = tag_state(tag, n)
    return np.array(
        [project_outcomes(st, range(n), bases, bits)[0] for bits in itertools.product((0, 1), repeat=n)]
    )


class _Engine:
    """Holds per-run caches; not part of the public surface."""

    def __init__(self, cfg: ProtocolConfig):
        self.cfg = cfg
        self.n = cfg.n_parties
        self.adv: InterceptEntangleAdversary | None = None
        self.unitary = None
        if cfg.attack != "none":
            self.adv = InterceptEntangleAdversary(
                self.n,
                _phi_phase(self.n),
                prior=cfg.adversary_prior,
                basis_policy=cfg.adversary_basis,
                p_psi=cfg.p_psi,
            )
        if cfg.attack == "unitary":
            self.unitary = composite_unitary(cfg.attack_params)
        self._cache: dict = {}

    def sees_bases(self) -> bool:
        return self.cfg.ordering == "naive"

    def unitary_joint(self, tag: str, bases: tuple[Basis, ...]) -> np.ndarray:
        key = ("u", tag, bases)
        if key not in self._cache:
            st = self.adv.attacked_state(tag)
            st = apply_gate(st, self.unitary, (self.adv.party, self.adv.ancillas[0]))
            self._cache[key] = np.array(
                [project_outcomes(st, range(self.n), bases, bits)[0]
                 for bits in itertools.product((0, 1), repeat=self.n)]
            )
        return self._cache[key]

    def bit_table(self, all_bases: tuple[Basis, ...]) -> np.ndarray:
        """Announced bit for every discrimination index (-1 = coin flip)."""
        key = ("bits", all_bases)
        if key not in self._cache:
            table = self.adv.discrimination(all_bases[:-1])
            self._cache[key] = np.array(
                [self.adv.bit_rule(all_bases, guess) for guess in table.inferred]
            )
        return self._cache[key]


def _draw_bases(u: np.ndarray, q_z: float) -> np.ndarray:
    half = q_z + (1 - q_z) / 2
    return np.where(u < q_z, 2, np.where(u < half, 0, 1)).astype(np.int8)


@dataclass
class Transcript:
    """Columnar store of a protocol run plus its security report."""

    config: ProtocolConfig
    tags: np.ndarray  # 0 = Psi, 1 = Phi
    true_bases: np.ndarray
    true_bits: np.ndarray
    ann_bases: np.ndarray
    ann_bits: np.ndarray
    usage: np.ndarray  # index into USAGES
    attacked: np.ndarray
    discriminated: np.ndarray
    disc_index: np.ndarray
    inferred_bits: np.ndarray  # (rounds, n-1), -1 where unknown
    saw_bases: np.ndarray
    report: SecurityReport | None = None

    @property
    def num_rounds(self) -> int:
        return len(self.tags)

    @property
    def n_parties(self) -> int:
        return self.config.n_parties

    # per-round views

    def record(self, i: int) -> RoundRecord:
        return RoundRecord(
            round_id=int(i),
            state_tag=TAGS[self.tags[i]],
            true_bases=tuple(CODE_BASIS[c].value for c in self.true_bases[i]),
            true_outcomes=tuple(int(b) for b in self.true_bits[i]),
            announced_bases=tuple(CODE_BASIS[c].value for c in self.ann_bases[i]),
            announced_outcomes=tuple(int(b) for b in self.ann_bits[i]),
            usage=USAGES[self.usage[i]],
            attacked=bool(self.attacked[i]),
        )

    @property
    def records(self) -> list[RoundRecord]:
        return [self.record(i) for i in range(self.num_rounds)]

    def knowledge(self, i: int) -> Knowledge | None:
        if not self.attacked[i]:
            return None
        if not self.discriminated[i]:
            return Knowledge(False)
        return Knowledge(
            True,
            int(self.disc_index[i]),
            tuple(int(b) for b in self.inferred_bits[i]),
            self.adversary_used_seqs(i),
        )

    # event stream

    def _positions(self) -> dict[tuple[str, int], int]:
        if getattr(self, "_pos_cache", None) is not None:
            return self._pos_cache
        n = self.n_parties
        pos = {}
        if self.config.ordering == "naive":
            for p in range(n):
                pos[("basis", p)] = p
            for j, p in enumerate(range(1, n)):
                pos[("result", p)] = n + j
        else:
            for j, p in enumerate(range(1, n)):
                pos[("result", p)] = j
            for j, p in enumerate(reversed(range(n))):
                pos[("basis", p)] = n - 1 + j
        self._pos_cache = pos
        return pos

    def event_seq(self, i: int, kind: str, party: int) -> int:
        return i * (2 * self.n_parties - 1) + self._positions()[(kind, party)]

    def adversary_used_seqs(self, i: int) -> tuple[int, ...]:
        if not (self.attacked[i] and self.saw_bases[i]):
            return ()
        return tuple(self.event_seq(i, "basis", p) for p in range(self.n_parties - 1))

    def round_events(self, i: int) -> list[Event]:
        pos = self._positions()
        base = i * (2 * self.n_parties - 1)
        evs = []
        for (kind, p), k in pos.items():
            val = CODE_BASIS[self.ann_bases[i, p]].value if kind == "basis" else int(self.ann_bits[i, p])
            evs.append(Event(base + k, int(i), p, kind, val))
        evs.sort(key=lambda e: e.seq)
        return evs

    def events(self) -> Iterator[Event]:
        for i in range(self.num_rounds):
            yield from self.round_events(i)
        seq = self.num_rounds * (2 * self.n_parties - 1)
        for i in range(self.num_rounds):
            yield Event(seq, i, 0, "usage", USAGES[self.usage[i]])
            seq += 1
            yield Event(seq, i, 0, "tag", TAGS[self.tags[i]])
            seq += 1
            if self.usage[i] == 1:
                yield Event(seq, i, 0, "dealer_result", int(self.ann_bits[i, 0]))
                seq += 1

    # serialization

    def write_jsonl(self, fp) -> None:
        """Line-delimited transcript; see docs/formats.md for the schema."""
        from .io import write_transcript

        write_transcript(self, fp)


def _usage_from(cfg: ProtocolConfig, test: np.ndarray, ann_bases: np.ndarray, tags: np.ndarray) -> np.ndarray:
    n_y = np.sum(ann_bases == 1, axis=1)
    has_z = np.any(ann_bases == 2, axis=1)
    valid = ~has_z & (n_y % 2 == tags)
    return np.where(test, 1, np.where(valid, 0, 2)).astype(np.int8)


def run_protocol(config: ProtocolConfig) -> Transcript:
    cfg = config.validate()
    n = cfg.n_parties
    N = int(cfg.num_rounds)
    eng = _Engine(cfg)
    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    # columns: tag | n bases | n measurement uniforms | tie | test
    U = rng.random((N, 2 * n + 3))
    u_tag = U[:, 0]
    u_basis = U[:, 1 : n + 1]
    u_meas = U[:, n + 1 : 2 * n + 1]
    u_tie = U[:, 2 * n + 1]
    u_test = U[:, 2 * n + 2]

    tags = (u_tag >= cfg.p_psi).astype(np.int8)
    drawn = _draw_bases(u_basis, cfg.q_z)
    true_bases = drawn.copy()
    true_bits = np.zeros((N, n), dtype=np.int8)
    ann_bits = np.zeros((N, n), dtype=np.int8)
    attacked = np.full(N, cfg.attack != "none")
    discriminated = np.zeros(N, dtype=bool)
    disc_index = np.full(N, -1, dtype=np.int64)
    inferred = np.full((N, n - 1), -1, dtype=np.int8)
    saw_bases = np.zeros(N, dtype=bool)

    if cfg.attack == "intercept":
        adv = eng.adv
        if cfg.adversary_basis == "psi-valid" and eng.sees_bases():
            honest = drawn[:, : n - 1]
            any_z = np.any(honest == 2, axis=1)
            n_y = np.sum(honest == 1, axis=1)
            true_bases[:, n - 1] = np.where(any_z, 2, np.where(n_y % 2 == 0, 0, 1))
        saw_bases[:] = eng.sees_bases()

    # group rounds by (tag, announced bases) and sample each group at once
    keys = tags.astype(np.int64)
    for j in range(n):
        keys = keys * 3 + true_bases[:, j]
    for key in np.unique(keys):
        rows = np.nonzero(keys == key)[0]
        tag = TAGS[tags[rows[0]]]
        bases = tuple(CODE_BASIS[c] for c in true_bases[rows[0]])
        if cfg.attack == "none":
            joint = _honest_joint(tag, bases, n)
            digits = _sequential_sample(joint, [2] * n, u_meas[rows])
            true_bits[rows] = digits
            ann_bits[rows] = digits
        elif cfg.attack == "unitary":
            joint = eng.unitary_joint(tag, bases)
            digits = _sequential_sample(joint, [2] * n, u_meas[rows])
            true_bits[rows] = digits
            ann_bits[rows] = digits
        else:
            J = adv.joint_distribution(tag, bases[: n - 1])
            K = J.shape[1]
            digits = _sequential_sample(J.reshape(-1), [2] * (n - 1) + [K], u_meas[rows])
            honest_bits = digits[:, : n - 1]
            k = digits[:, n - 1]
            true_bits[rows, : n - 1] = honest_bits
            true_bits[rows, n - 1] = -1
            ann_bits[rows, : n - 1] = honest_bits
            table = adv.discrimination(bases[: n - 1])
            disc_index[rows] = k
            discriminated[rows] = True
            inferred[rows] = np.array(table.inferred, dtype=np.int8)[k]
            coin = (u_tie[rows] < 0.5).astype(np.int8)
            if eng.sees_bases():
                rule = eng.bit_table(bases)[k]
                ann_bits[rows, n - 1] = np.where(rule < 0, coin, rule)
            else:
                ann_bits[rows, n - 1] = coin

    ann_bases = true_bases
    test = u_test < cfg.test_fraction
    usage = _usage_from(cfg, test, ann_bases, tags)

    tr = Transcript(
        cfg, tags, true_bases, true_bits, ann_bases, ann_bits, usage, attacked,
        discriminated, disc_index, inferred, saw_bases,
    )
    tr.report = _build_report(tr)
    return tr


# -- sifting, reconstruction, report ------------------------------------------------------


def sift(transcript: Transcript) -> dict[str, list[int]]:
    """Round ids per usage class."""
    out = {u: [] for u in USAGES}
    for i, u in enumerate(transcript.usage):
        out[USAGES[u]].append(i)
    return out


def compute_qber(records: Sequence[RoundRecord]) -> float | None:
    """Fraction of key rounds whose reconstructed dealer bit is wrong; None if empty."""
    records = list(records)
    if not records:
        return None
    errors = 0
    for r in records:
        rec = reconstruct_dealer_bit(r.announced_bases, r.state_tag, r.announced_outcomes[1:])
        errors += rec != r.true_outcomes[0]
    return errors / len(records)


def _reconstructed(tr: Transcript, rows: np.ndarray) -> np.ndarray:
    n = tr.n_parties
    out = np.zeros(len(rows), dtype=np.int8)
    keys = tr.tags[rows].astype(np.int64)
    for j in range(n):
        keys = keys * 3 + tr.ann_bases[rows, j]
    others = np.bitwise_xor.reduce(tr.ann_bits[rows, 1:], axis=1)
    for key in np.unique(keys):
        sel = keys == key
        r0 = rows[np.argmax(sel)]
        bases = tuple(CODE_BASIS[c] for c in tr.ann_bases[r0])
        out[sel] = parity_bit(bases, TAGS[tr.tags[r0]]) ^ others[sel]
    return out


def _build_report(tr: Transcript) -> SecurityReport:
    cfg = tr.config
    n = cfg.n_parties
    calib: PhaseCalibration = calibrate_phase(n)
    key_rows = np.nonzero(tr.usage == 0)[0]
    nontest = int(np.sum(tr.usage != 1))
    recon = _reconstructed(tr, key_rows)
    dealer = tr.true_bits[key_rows, 0]
    qber = float(np.mean(recon != dealer)) if len(key_rows) else None

    witness, werrors = {}, {}
    for variant, tagcode in ((Variant.I1, 0), (Variant.I2, 1)):
        rows = (tr.usage == 1) & (tr.tags == tagcode)
        try:
            est = estimate_from_arrays(build_witness(n, variant), tr.ann_bases[rows], tr.ann_bits[rows])
            witness[variant.value] = est.as_dict()
        except InsufficientDataError as e:
            witness[variant.value] = None
            werrors[variant.value] = str(e)

    tag_counts = {PSI: int(np.sum(tr.tags == 0)), PHI: int(np.sum(tr.tags == 1))}
    test_tag_counts = {
        PSI: int(np.sum((tr.tags == 0) & (tr.usage == 1))),
        PHI: int(np.sum((tr.tags == 1) & (tr.usage == 1))),
    }
    if not cfg.witness_check:
        decision = Decision(True, "witness check disabled", checked=False).as_dict()
    else:
        def _est(v):
            d = witness[v]
            return None if d is None else WitnessEstimate(d["value"], d["standard_error"])

        try:
            decision = decide_secure(_est("I1"), _est("I2"), test_tag_counts, cfg.k_sigma).as_dict()
        except InsufficientDataError as e:
            decision = {"decision": "InsufficientData", "reason": str(e), "failing_variants": []}

    acc = None
    if cfg.attack == "intercept":
        kn = key_rows[tr.discriminated[key_rows]]
        if len(kn):
            acc = float(np.mean(tr.inferred_bits[kn, 0] == tr.true_bits[kn, 0]))

    analysis = None
    if cfg.attack != "none":
        analysis = attack_analysis(cfg)

    return SecurityReport(
        schema=REPORT_SCHEMA,
        config=cfg.as_dict(),
        seed=int(cfg.seed),
        phase_calibration=calib.as_dict(),
        tag_counts=tag_counts,
        usage_counts={u: int(np.sum(tr.usage == k)) for k, u in enumerate(USAGES)},
        witness=witness,
        witness_errors=werrors,
        decision=decision,
        qber=qber,
        key_length=int(len(key_rows)),
        key_bits="".join(str(int(b)) for b in dealer),
        sift_rate=(len(key_rows) / nontest) if nontest else None,
        expected_sift_rate=expected_sift_rate(cfg),
        adversary_accuracy=acc,
        attack_analysis=analysis,
    )


def expected_sift_rate(cfg: ProtocolConfig) -> float:
    """Key fraction among non-test rounds for honest parties: (1-q_z)^n / 2."""
    return (1 - cfg.q_z) ** cfg.n_parties / 2


# -- exact statistics of the announcements ----------------------------------------------


def _announced_models(cfg: ProtocolConfig):
    """Yield (weight, tag, announced bases, {announced bits: prob}) over all
    basis configurations, with weight = P(tag) * P(bases)."""
    n = cfg.n_parties
    eng = _Engine(cfg)
    pb = {Basis.Z: cfg.q_z, Basis.X: (1 - cfg.q_z) / 2, Basis.Y: (1 - cfg.q_z) / 2}
    for tag, pt in ((PSI, cfg.p_psi), (PHI, 1 - cfg.p_psi)):
        if pt == 0:
            continue
        for drawn in itertools.product(CODE_BASIS, repeat=n):
            w = pt * float(np.prod([pb[b] for b in drawn]))
            if w == 0:
                continue
            bases = drawn
            dist: dict[tuple[int, ...], float] = {}
            if cfg.attack == "none" or cfg.attack == "unitary":
                joint = (_honest_joint(tag, bases, n) if cfg.attack == "none"
                         else eng.unitary_joint(tag, bases))
                for idx, bits in enumerate(itertools.product((0, 1), repeat=n)):
                    if joint[idx] > 0:
                        dist[bits] = dist.get(bits, 0.0) + joint[idx]
            else:
                view = RoundView(drawn[: n - 1] if eng.sees_bases() else None)
                own = eng.adv.choose_basis(view, drawn[-1])
                bases = drawn[: n - 1] + (own,)
                J = eng.adv.joint_distribution(tag, bases[: n - 1])
                rule = eng.bit_table(bases) if eng.sees_bases() else np.full(J.shape[1], -1)
                for o, hb in enumerate(itertools.product((0, 1), repeat=n - 1)):
                    for k in range(J.shape[1]):
                        p = J[o, k]
                        if p <= 0:
                            continue
                        if rule[k] < 0:
                            for c in (0, 1):
                                dist[hb + (c,)] = dist.get(hb + (c,), 0.0) + p / 2
                        else:
                            c = int(rule[k])
                            dist[hb + (c,)] = dist.get(hb + (c,), 0.0) + p
            yield w, tag, bases, dist


def exact_announced_witness(cfg: ProtocolConfig, variant: Variant | str, tag: str | None = None) -> float:
    """Expected value of the witness estimator over the announced data.

    ``tag`` restricts to rounds of one preparation (what the decision rule
    uses); None pools both preparations at the configured ``p_psi``.
    """
    variant = Variant.parse(variant)
    spec = build_witness(cfg.n_parties, variant)
    models = [m for m in _announced_models(cfg.validate()) if tag is None or m[1] == tag]
    if not models:
        raise InsufficientDataError(f"no rounds with tag {tag}")
    total = 0.0
    for coeff, p in spec.terms:
        if p.is_identity():
            total += float(coeff)
            continue
        support = p.support
        num = den = 0.0
        for w, _, bases, dist in models:
            if any(bases[q].value != p.letters[q] for q in support):
                continue
            corr = sum(pr * (-1) ** sum(bits[q] for q in support) for bits, pr in dist.items())
            num += w * corr
            den += w
        if den == 0:
            raise InsufficientDataError(f"term {p} never announced", term=str(p))
        total += float(coeff) * num / den
    return total


def attack_analysis(cfg: ProtocolConfig) -> dict:
    """Exact witness numbers for an attacked configuration.

    * ``marginal``: both witnesses on the parties' reduced state of the
      attacked mixture (adversary's ancillas ignored), at the run's p_psi.
    * ``announced``: expected estimator values on the announced data, per
      preparation and pooled.
    * ``closed_form_reference``: -1/2 - p and 1/2 - p, recorded for comparison.
    """
    n = cfg.n_parties
    U = composite_unitary(cfg.attack_params) if cfg.attack == "unitary" else None
    mix = attacked_mixture(n, cfg.p_psi, _phi_phase(n), U)
    out = {"marginal": marginal_witness_values(mix, n)}
    announced = {}
    for v in Variant:
        row = {}
        for label, tag in (("pooled", None), (PSI, PSI), (PHI, PHI)):
            try:
                row[label] = exact_announced_witness(cfg, v, tag)
            except InsufficientDataError:
                row[label] = None
        announced[v.value] = row
    out["announced"] = announced
    out["closed_form_reference"] = {"I1": -0.5 - cfg.p_psi, "I2": 0.5 - cfg.p_psi}
    return out


# -- round-by-round reference path ---------------------------------------------------------


def simulate_round(cfg: ProtocolConfig, round_id: int, u_row: np.ndarray) -> RoundRecord:
    """Execute one round on an explicit state vector with :func:`core.measure`.

    Consumes the same uniform row layout as :func:`run_protocol`, so for
    identical rows it reproduces the same outcomes (up to float ties). Used
    to cross-check the grouped sampler.
    """
    cfg.validate()
    n = cfg.n_parties
    u_tag = u_row[0]
    u_basis = u_row[1 : n + 1]
    u_meas = u_row[n + 1 : 2 * n + 1]
    u_tie = u_row[2 * n + 1]
    u_test = u_row[2 * n + 2]
    tag = PSI if u_tag < cfg.p_psi else PHI
    drawn = [CODE_BASIS[c] for c in _draw_bases(np.asarray(u_basis), cfg.q_z)]
    state = tag_state(tag, n)
    adv = None
    if cfg.attack != "none":
        adv = InterceptEntangleAdversary(
            n, _phi_phase(n), cfg.adversary_prior, cfg.adversary_basis, cfg.p_psi
        )
        state = adv.attacked_state(tag)
        if cfg.attack == "unitary":
            state = apply_gate(state, composite_unitary(cfg.attack_params), (adv.party, adv.ancillas[0]))
    bits = []
    honest_parties = range(n - 1) if cfg.attack == "intercept" else range(n)
    for p in honest_parties:
        out, state = core.measure(state, p, drawn[p], u_meas[p])
        bits.append(out.bit)
    bases = list(drawn)
    true_bits = list(bits)
    ann = list(bits)
    if cfg.attack == "intercept":
        view = RoundView(tuple(drawn[: n - 1]) if cfg.ordering == "naive" else None)
        own = adv.choose_basis(view, drawn[-1])
        bases[-1] = own
        if view.honest_bases is None:
            ann.append(int(u_tie < 0.5))
        else:
            resp, state = adv.respond(RoundView(view.honest_bases), state, own, u_meas[n - 1], u_tie)
            ann.append(resp.bit)
        true_bits.append(-1)
    usage_code = _usage_from(
        cfg,
        np.array([u_test < cfg.test_fraction]),
        np.array([[BASIS_CODE[b.value] for b in bases]]),
        np.array([0 if tag == PSI else 1]),
    )[0]
    return RoundRecord(
        round_id,
        tag,
        tuple(b.value for b in bases),
        tuple(true_bits),
        tuple(b.value for b in bases),
        tuple(ann),
        USAGES[usage_code],
        cfg.attack != "none",
    )


def uniform_table(cfg: ProtocolConfig) -> np.ndarray:
    """The per-round uniform table that :func:`run_protocol` consumes."""
    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    return rng.random((int(cfg.num_rounds), 2 * cfg.n_parties + 3))


def audit_information_flow(tr: Transcript) -> list[str]:
    """Check that each adversary announcement only used earlier events.

    Returns a list of violations (empty when clean).
    """
    problems = []
    if tr.config.attack != "intercept":
        return problems
    adv_party = tr.n_parties - 1
    for i in range(tr.num_rounds):
        used = tr.adversary_used_seqs(i)
        evs = {e.seq: e for e in tr.round_events(i)}
        own = tr.event_seq(i, "result", adv_party)
        for s in used:
            e = evs.get(s)
            if e is None or e.kind != "basis" or e.party == adv_party:
                problems.append(f"round {i}: used event {s} is not an honest basis announcement")
            elif s >= own:
                problems.append(f"round {i}: used event {s} not visible before own result {own}")
    return problems
