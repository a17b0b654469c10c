import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghz_qss import core
from ghz_qss.core import (
    CNOT,
    H,
    Basis,
    Ensemble,
    PauliString,
    PureState,
    apply_gate,
    conditional_state,
    discriminating_basis,
    expectation,
    ghz_state,
    measure,
    measure_in_basis,
    outcome_probabilities,
)
from ghz_qss.errors import (
    ArgumentError,
    CapacityError,
    DiscriminationError,
    MeasurementError,
    ValidationError,
)


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState.from_vector(v, normalize=True)


def dense_expectation(state, p):
    m = p.dense_matrix()
    return float(np.real(np.vdot(state.amplitudes, m @ state.amplitudes)))


class TestPureState:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            PureState(1, np.array([1.0, 1.0]))

    def test_rejects_wrong_length(self):
        with pytest.raises(ArgumentError):
            PureState(2, np.array([1.0, 0.0]))

    def test_amplitudes_read_only(self):
        s = PureState.basis_state("01")
        with pytest.raises(ValueError):
            s.amplitudes[0] = 1

    def test_capacity_cap(self):
        old = core.max_qubits()
        try:
            core.set_max_qubits(4)
            with pytest.raises(CapacityError):
                ghz_state(5)
            with pytest.raises(CapacityError):
                ghz_state(4).with_ancillas(1)
        finally:
            core.set_max_qubits(old)

    def test_from_kets_normalizes(self):
        s = PureState.from_kets({"00": 1, "11": 1})
        assert s.probability("00") == pytest.approx(0.5)

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_ghz_amplitudes(self, n):
        s = ghz_state(n, np.pi / 3)
        kd = s.ket_dict()
        assert set(kd) == {"0" * n, "1" * n}
        assert kd["1" * n] / kd["0" * n] == pytest.approx(np.exp(1j * np.pi / 3))

    def test_ghz_too_small(self):
        with pytest.raises(CapacityError):
            ghz_state(1)


class TestPauli:
    def test_parse_and_str(self):
        p = PauliString.parse("z1Z")
        assert str(p) == "z1z"
        assert p.support == (0, 2)
        assert PauliString.identity(3).is_identity()

    def test_identity_exactly_one(self):
        assert expectation(ghz_state(3), "111") == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            expectation(ghz_state(3), "xx")

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_against_dense_matrices(self, n):
        rng = np.random.default_rng(n)
        s = random_state(n, rng)
        letters = ["I", "X", "Y", "Z"]
        strings = list(itertools.product(letters, repeat=n))
        if len(strings) > 200:
            idx = rng.choice(len(strings), 200, replace=False)
            strings = [strings[i] for i in idx]
        for letters_ in strings:
            p = PauliString(tuple(letters_))
            assert expectation(s, p) == pytest.approx(dense_expectation(s, p), abs=1e-12)

    def test_y_action_convention(self):
        # <0|Y|1> = -i, so <y+|Y|y+> = +1 with |y+> = (|0> + i|1>)/sqrt2
        yplus = PureState.from_vector([1, 1j], normalize=True)
        assert expectation(yplus, "y") == pytest.approx(1.0)

    def test_ensemble_linearity(self):
        rng = np.random.default_rng(0)
        a, b = random_state(3, rng), random_state(3, rng)
        ens = Ensemble.mixture([0.3, 0.7], [a, b])
        for p in ("xyz", "zz1", "yyy"):
            assert expectation(ens, p) == pytest.approx(
                0.3 * expectation(a, p) + 0.7 * expectation(b, p), abs=1e-12
            )


class TestGates:
    def test_cnot_target_order(self):
        s = apply_gate(PureState.basis_state("10"), CNOT, (0, 1))
        assert s.ket_dict() == {"11": 1}
        s = apply_gate(PureState.basis_state("01"), CNOT, (1, 0))
        assert s.ket_dict() == {"11": 1}

    def test_non_unitary_rejected(self):
        with pytest.raises(ValidationError):
            apply_gate(PureState.basis_state("0"), np.array([[1, 1], [0, 1]]), [0])

    def test_duplicate_targets(self):
        with pytest.raises(ArgumentError):
            apply_gate(PureState.basis_state("00"), CNOT, (1, 1))

    def test_against_kron(self):
        rng = np.random.default_rng(1)
        s = random_state(4, rng)
        out = apply_gate(s, H, [2])
        dense = np.kron(np.kron(np.eye(4), H), np.eye(2)) @ s.amplitudes
        np.testing.assert_allclose(out.amplitudes, dense, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        n=st.integers(2, 5),
        data=st.data(),
    )
    def test_norm_preserved(self, seed, n, data):
        rng = np.random.default_rng(seed)
        s = random_state(n, rng)
        a, b = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        out = apply_gate(s, q, (a, b))
        assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0, abs=1e-12)


class TestMeasurement:
    @pytest.mark.parametrize("basis", list(Basis))
    def test_eigenvectors_orthonormal(self, basis):
        v = basis.eigenvectors
        np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)

    def test_threshold_rule(self):
        s = PureState.from_vector([np.sqrt(0.3), np.sqrt(0.7)])
        assert measure(s, 0, "Z", 0.29)[0].bit == 0
        assert measure(s, 0, "Z", 0.31)[0].bit == 1

    def test_zero_branch_raises(self):
        with pytest.raises(MeasurementError):
            measure(PureState.basis_state("0"), 0, "Z", 1.0)

    def test_collapse_ghz_x(self):
        out, post = measure(ghz_state(3), 0, "X", 0.1)
        assert out.bit == 0
        assert expectation(post, "1xx") == pytest.approx(1.0)

    @pytest.mark.parametrize("basis", ["X", "Y", "Z"])
    def test_sampled_marginal(self, basis):
        rng = np.random.default_rng(5)
        s = random_state(2, rng)
        p_plus, _ = outcome_probabilities(s, 1, basis)
        u = rng.random(20_000)
        hits = np.mean([measure(s, 1, basis, x)[0].bit == 0 for x in u])
        assert abs(hits - p_plus) < 4 * np.sqrt(p_plus * (1 - p_plus) / len(u)) + 1e-9

    def test_conditional_state_ghz(self):
        p, c = conditional_state(ghz_state(3), [0, 1], ["X", "X"], [0, 0])
        assert p == pytest.approx(0.25)
        assert expectation(c, "x") == pytest.approx(1.0)

    def test_measure_in_basis_inverse_cdf(self):
        s = PureState.from_vector([0.6, 0.8])
        assert measure_in_basis(s, [0], np.eye(2), 0.35)[0] == 0
        assert measure_in_basis(s, [0], np.eye(2), 0.37)[0] == 1


class TestDiscrimination:
    def test_completes_basis(self):
        a = PureState.from_vector([1, 1, 0, 0], normalize=True)
        b = PureState.from_vector([1, -1, 0, 0], normalize=True)
        m = discriminating_basis([a, b])
        np.testing.assert_allclose(m.conj().T @ m, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(m[:, 0], a.amplitudes)

    def test_non_orthogonal(self):
        a = PureState.basis_state("0")
        b = PureState.from_vector([1, 1], normalize=True)
        with pytest.raises(DiscriminationError):
            discriminating_basis([a, b])
