import io

import numpy as np
import pytest

from ghz_qss.core import Basis
from ghz_qss.errors import ArgumentError, CapacityError, InconsistentComboError
from ghz_qss.io import read_transcript
from ghz_qss.protocol import (
    PHI,
    PSI,
    ProtocolConfig,
    audit_information_flow,
    compute_qber,
    exact_announced_witness,
    expected_sift_rate,
    parity_bit,
    reconstruct_dealer_bit,
    run_protocol,
    sift,
    simulate_round,
    uniform_table,
    valid_combo,
)


class TestCombos:
    @pytest.mark.parametrize(
        "bases,tag,ok",
        [
            ("XXX", PSI, True),
            ("YYX", PSI, True),
            ("YYY", PSI, False),
            ("YYY", PHI, True),
            ("XXY", PHI, True),
            ("XXX", PHI, False),
            ("XZX", PSI, False),
        ],
    )
    def test_valid_combo(self, bases, tag, ok):
        assert valid_combo(list(bases), tag) is ok

    @pytest.mark.parametrize(
        "bases,tag,others,dealer",
        [
            ("XXX", PSI, (0, 0), 0),
            ("XXX", PSI, (1, 0), 1),
            ("YYX", PSI, (0, 1), 0),
        ],
    )
    def test_reconstruct(self, bases, tag, others, dealer):
        assert reconstruct_dealer_bit(list(bases), tag, others) == dealer

    def test_phi_yyy_parity_from_oracle(self):
        # I2 carries +yyy/8 and is maximally violated at the calibrated phase,
        # so <yyy> = +1 there and the parity bit is 0; xxy carries -1/8
        assert parity_bit("YYY", PHI) == 0
        assert parity_bit("XXY", PHI) == 1

    def test_inconsistent(self):
        with pytest.raises(InconsistentComboError):
            reconstruct_dealer_bit("YYY", PSI, (0, 0))


class TestConfig:
    def test_zero_rounds(self):
        with pytest.raises(ArgumentError):
            run_protocol(ProtocolConfig(num_rounds=0))

    @pytest.mark.parametrize(
        "kw",
        [dict(q_z=1.5), dict(p_psi=-0.1), dict(test_fraction=0.0), dict(n_parties=2),
         dict(ordering="sideways"), dict(attack="unitary"), dict(k_sigma=0)],
    )
    def test_invalid(self, kw):
        with pytest.raises(ArgumentError):
            ProtocolConfig(**kw).validate()

    def test_capacity_with_ancillas(self):
        from ghz_qss import core

        old = core.max_qubits()
        try:
            core.set_max_qubits(5)
            ProtocolConfig(n_parties=4).validate()
            with pytest.raises(CapacityError):
                ProtocolConfig(n_parties=4, attack="intercept").validate()
        finally:
            core.set_max_qubits(old)


@pytest.fixture(scope="module")
def honest():
    return run_protocol(ProtocolConfig(num_rounds=20_000, seed=42))


class TestHonestRun:
    def test_accept_and_zero_qber(self, honest):
        rep = honest.report
        assert rep.decision_label == "Accept"
        assert rep.qber == 0.0

    def test_witness_values(self, honest):
        for v in ("I1", "I2"):
            assert honest.report.witness[v]["value"] == pytest.approx(0.5, abs=1e-12)

    def test_perfect_correlation_every_key_round(self, honest):
        for i in np.nonzero(honest.usage == 0)[0][:2000]:
            r = honest.record(i)
            x = 0
            for b in r.announced_outcomes:
                x ^= b
            assert x == parity_bit(r.announced_bases, r.state_tag)

    def test_sift_rate(self, honest):
        rep = honest.report
        nontest = rep.usage_counts["Key"] + rep.usage_counts["Discarded"]
        p = expected_sift_rate(honest.config)
        assert abs(rep.sift_rate - p) < 4 * np.sqrt(p * (1 - p) / nontest)

    def test_no_z_in_key(self, honest):
        keys = honest.usage == 0
        assert not np.any(honest.ann_bases[keys] == 2)

    def test_announced_equals_true_for_honest(self, honest):
        assert np.array_equal(honest.true_bits, honest.ann_bits)

    def test_report_echo(self, honest):
        rep = honest.report
        assert rep.seed == 42
        assert rep.config["num_rounds"] == 20_000
        assert rep.phase_calibration["phi_phase_label"] == "-pi/2"


class TestSifting:
    def test_q_z_zero_half_key(self):
        tr = run_protocol(ProtocolConfig(num_rounds=20_000, q_z=0.0, seed=1))
        p, n = 0.5, tr.report.usage_counts["Key"] + tr.report.usage_counts["Discarded"]
        assert abs(tr.report.sift_rate - p) < 4 * np.sqrt(p * (1 - p) / n)

    def test_all_z_no_key(self):
        tr = run_protocol(ProtocolConfig(num_rounds=500, q_z=1.0, seed=1, witness_check=False))
        assert tr.report.key_length == 0
        assert tr.report.qber is None

    def test_all_tests(self):
        tr = run_protocol(ProtocolConfig(num_rounds=500, test_fraction=1.0, seed=1))
        parts = sift(tr)
        assert parts["Key"] == [] and len(parts["WitnessTest"]) == 500

    def test_all_z_insufficient_witness(self):
        tr = run_protocol(ProtocolConfig(num_rounds=500, q_z=1.0, seed=1))
        assert tr.report.decision_label == "InsufficientData"


class TestQber:
    def test_empty(self):
        assert compute_qber([]) is None

    def test_matches_report(self, honest):
        keys = [honest.record(i) for i in np.nonzero(honest.usage == 0)[0][:500]]
        assert compute_qber(keys) == 0.0

    def test_random_bits_half(self):
        tr = run_protocol(ProtocolConfig(num_rounds=20_000, seed=2, attack="intercept",
                                         ordering="reversed", witness_check=False))
        assert abs(tr.report.qber - 0.5) < 0.03


class TestRoundReference:
    @pytest.mark.parametrize(
        "kw",
        [dict(), dict(attack="intercept"), dict(attack="intercept", ordering="reversed"),
         dict(attack="intercept", adversary_basis="psi-valid"),
         dict(attack="unitary", attack_params=tuple(np.linspace(0, 1, 16))),
         dict(n_parties=4, attack="intercept")],
    )
    def test_grouped_sampler_matches_round_walk(self, kw):
        cfg = ProtocolConfig(num_rounds=600, seed=9, **kw)
        tr = run_protocol(cfg)
        U = uniform_table(cfg)
        for i in range(cfg.num_rounds):
            assert simulate_round(cfg, i, U[i]) == tr.record(i)


class TestTranscript:
    def test_naive_event_order(self):
        tr = run_protocol(ProtocolConfig(num_rounds=3, seed=0))
        evs = tr.round_events(1)
        assert [(e.kind, e.party) for e in evs] == [
            ("basis", 0), ("basis", 1), ("basis", 2), ("result", 1), ("result", 2)
        ]
        assert [e.seq for e in evs] == list(range(5, 10))

    def test_reversed_event_order(self):
        tr = run_protocol(ProtocolConfig(num_rounds=3, seed=0, ordering="reversed"))
        evs = tr.round_events(0)
        assert [(e.kind, e.party) for e in evs] == [
            ("result", 1), ("result", 2), ("basis", 2), ("basis", 1), ("basis", 0)
        ]

    def test_post_phase_after_announcements(self):
        tr = run_protocol(ProtocolConfig(num_rounds=50, seed=0))
        evs = list(tr.events())
        seqs = [e.seq for e in evs]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        last_announce = max(e.seq for e in evs if e.kind in ("basis", "result"))
        first_post = min(e.seq for e in evs if e.kind in ("usage", "tag"))
        assert first_post > last_announce

    def test_information_audit(self):
        for o in ("naive", "reversed"):
            tr = run_protocol(ProtocolConfig(num_rounds=200, seed=0, attack="intercept", ordering=o))
            assert audit_information_flow(tr) == []

    def test_roundtrip(self):
        tr = run_protocol(ProtocolConfig(num_rounds=100, seed=5, attack="intercept"))
        buf = io.StringIO()
        tr.write_jsonl(buf)
        buf.seek(0)
        data = read_transcript(buf)
        assert data["header"]["config"]["seed"] == 5
        assert len(data["records"]) == 100
        assert data["records"][7] == tr.record(7).as_dict()
        assert len(data["events"]) == sum(1 for _ in tr.events())
        assert data["report"]["decision"]["decision"] == tr.report.decision_label

    def test_deterministic(self):
        cfg = ProtocolConfig(num_rounds=2000, seed=77, attack="intercept")
        a, b = io.StringIO(), io.StringIO()
        run_protocol(cfg).write_jsonl(a)
        run_protocol(cfg).write_jsonl(b)
        assert a.getvalue() == b.getvalue()

    def test_seed_matters(self):
        a = run_protocol(ProtocolConfig(num_rounds=200, seed=1))
        b = run_protocol(ProtocolConfig(num_rounds=200, seed=2))
        assert not np.array_equal(a.ann_bits, b.ann_bits)


class TestExactAnnounced:
    def test_honest_matches_state_values(self):
        cfg = ProtocolConfig()
        assert exact_announced_witness(cfg, "I1", PSI) == pytest.approx(0.5, abs=1e-12)
        assert exact_announced_witness(cfg, "I2", PHI) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 4])
    def test_attack_matches_oracle(self, n, oracle):
        cfg = ProtocolConfig(n_parties=n, attack="intercept")
        want = oracle["announced"][f"n{n}_qz0.2_p0.5"]
        for v in ("I1", "I2"):
            for lab, tag in (("pooled", None), ("Psi", PSI), ("Phi", PHI)):
                got = exact_announced_witness(cfg, v, tag)
                assert got == pytest.approx(want[f"{v}_{lab}"], abs=1e-10)

    def test_estimates_track_exact(self):
        cfg = ProtocolConfig(num_rounds=40_000, seed=3, attack="intercept")
        rep = run_protocol(cfg).report
        for v, tag in (("I1", PSI), ("I2", PHI)):
            exact = exact_announced_witness(cfg, v, tag)
            est = rep.witness[v]
            assert abs(est["value"] - exact) < 5 * est["standard_error"]
