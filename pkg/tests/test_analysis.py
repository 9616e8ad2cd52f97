import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model
from declab import analysis, closedform
from declab.analysis import Verdict
from declab.core import (
    BALANCED,
    SIGMA_X,
    SIGMA_Z,
    UP,
    Decomposition,
    ExpectationSeries,
    ModelSpec,
    RelevantObservable,
    make_spin_factor,
    traditional_dec1,
)
from declab.errors import InsufficientData, NoCrossing
from declab.scenario import GeneratorSpec


def traditional(N, seed, amplitude_mode="balanced"):
    return GeneratorSpec(1, N, amplitude_mode, "random[0,1]", seed).build()


class TestVerdictType:
    def test_t_d_only_for_decohering(self):
        with pytest.raises(ValueError):
            analysis.DynamicsVerdict(Verdict.OSCILLATORY, t_D=1.0)
        with pytest.raises(ValueError):
            analysis.DynamicsVerdict(Verdict.DECOHERING)
        with pytest.raises(ValueError):
            analysis.DynamicsVerdict(Verdict.DECOHERING, t_D=0.0)

    def test_to_dict(self):
        d = analysis.DynamicsVerdict(Verdict.DECOHERING, 0.5, None, {"mean_tail": 0.0}).to_dict()
        assert d["class"] == "DECOHERING" and d["t_D"] == 0.5


class TestDecoherenceTime:
    def test_hundred_balanced(self):
        m = ModelSpec((BALANCED,), (BALANCED,) * 100, [1.0] * 100)
        assert analysis.estimate_decoherence_time(m) == pytest.approx(0.1414, rel=0.1)

    def test_frozen(self):
        m = ModelSpec((BALANCED,), (UP,) * 4, [1.0] * 4)
        with pytest.raises(NoCrossing):
            analysis.estimate_decoherence_time(m)

    def test_single_spin(self):
        m = ModelSpec((BALANCED,), (BALANCED,), [1.0])
        assert analysis.estimate_decoherence_time(m) == pytest.approx(math.acos(math.exp(-1)), abs=1e-10)
        assert analysis.estimate_decoherence_time(m) == pytest.approx(1.194, abs=1e-3)

    def test_series_source(self):
        m = ModelSpec((BALANCED,), (BALANCED,), [1.0])
        t = np.linspace(0, 3, 30001)
        s = analysis.series_for(m, traditional_dec1(m), t)
        assert analysis.estimate_decoherence_time(s) == pytest.approx(1.1941, abs=1e-4)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 1000), st.floats(0.05, 0.6), st.floats(0.05, 0.6))
    def test_monotone_in_threshold(self, seed, a, b):
        m = traditional(30, seed)
        lo, hi = sorted((a, b))
        assert analysis.estimate_decoherence_time(m, hi) <= analysis.estimate_decoherence_time(m, lo) + 1e-12

    def test_gaussian_prediction(self):
        for seed in range(5):
            m = traditional(200, seed)
            gamma = closedform.site_decay_rate(m, 0)
            assert analysis.estimate_decoherence_time(m) == pytest.approx(math.sqrt(2 / gamma), rel=0.1)


class TestClassify:
    def test_traditional_fixed_window(self):
        m = traditional(20, 7)
        t = np.linspace(0, 50, 5000)
        v = analysis.classify_dynamics(analysis.series_for(m, traditional_dec1(m), t), (0, 50))
        assert v.verdict is Verdict.DECOHERING
        assert v.t_D > 0 and v.envelope_stats["mean_tail"] < 0.01

    def test_traditional_env_particle(self):
        m = traditional(20, 7)
        v, _ = analysis.verdict_for(m, Decomposition.from_system(m, [4]))
        assert v.verdict is Verdict.OSCILLATORY

    def test_generalized_whole_a(self):
        m = GeneratorSpec(6, 6, "balanced", "random[0,1]", 3).build()
        v, _ = analysis.verdict_for(m, traditional_dec1(m))
        assert v.verdict is not Verdict.DECOHERING

    def test_frozen(self):
        m = ModelSpec((UP,), (BALANCED,) * 3, [1.0, 2.0, 3.0])
        v, _ = analysis.verdict_for(m, traditional_dec1(m))
        assert v.verdict is Verdict.FROZEN

    def test_frozen_envelope(self):
        t = np.linspace(0, 1, 200)
        s = ExpectationSeries.from_parts(t, 0.0, 0.5 * np.exp(1j * t))
        assert analysis.classify_dynamics(s).verdict is Verdict.FROZEN

    def test_insufficient(self):
        t = np.linspace(0, 1, 50)
        s = ExpectationSeries.from_parts(t, 0.0, np.exp(-t))
        with pytest.raises(InsufficientData):
            analysis.classify_dynamics(s)

    def test_indeterminate(self):
        t = np.linspace(0, 1, 400)
        s = ExpectationSeries.from_parts(t, 0.0, 0.05 + 0.95 * np.exp(-30 * t))
        assert analysis.classify_dynamics(s).verdict is Verdict.INDETERMINATE

    def test_recurrence_reported(self):
        t = np.linspace(0, 10, 4000)
        e = np.where(t < 6, np.exp(-(t**2)), 0.9 * np.exp(-((t - 6.5) ** 2) * 4))
        e = np.where(t > 8, 0.0, e)
        s = ExpectationSeries.from_parts(t, 0.0, e)
        v = analysis.classify_dynamics(s)
        assert v.verdict is Verdict.DECOHERING
        assert v.recurrence_time == pytest.approx(6.5, abs=0.01)

    @pytest.mark.parametrize("c", [-3.0, 0.1, 17.0])
    def test_scale_invariant(self, c):
        m = traditional(12, 2)
        dec = traditional_dec1(m)
        base = RelevantObservable({0: SIGMA_X})
        v1, _ = analysis.verdict_for(m, dec, base)
        v2, _ = analysis.verdict_for(m, dec, base.scaled(c))
        assert v1.verdict is v2.verdict
        assert v1.t_D == pytest.approx(v2.t_D) if v1.t_D else v2.t_D is None

    def test_default_window(self):
        assert analysis.default_window(2.0, [1.0]) == (0.0, 20.0)
        assert analysis.default_window(0.0, [0.5, -0.25]) == pytest.approx((0.0, 16 * math.pi))


class TestAsymptoticWeights:
    def test_pointer_state(self):
        m = ModelSpec((UP,), (BALANCED,) * 4, [1, 2, 3, 4])
        w = analysis.asymptotic_weights(m, traditional_dec1(m), [5.0, 6.0])
        assert np.allclose(w.weights, [1, 0])
        assert w.labels == ("0", "1")

    def test_balanced(self):
        m = ModelSpec((BALANCED,), (BALANCED,) * 12, np.linspace(0.5, 1.5, 12))
        w = analysis.asymptotic_weights(m, traditional_dec1(m), np.linspace(5, 30, 50))
        assert np.allclose(w.weights, [0.5, 0.5], atol=1e-3)

    def test_traditional_probabilities(self, rng):
        a = make_spin_factor(0.6, 0.8j)
        m = ModelSpec((a,), tuple(BALANCED for _ in range(14)), rng.uniform(0.5, 1.5, 14))
        w = analysis.asymptotic_weights(m, traditional_dec1(m), np.linspace(3, 20, 40))
        assert np.allclose(w.weights, [0.36, 0.64], atol=1e-3)

    def test_classical_form(self, rng):
        a = (make_spin_factor(0.6, 0.8j), make_spin_factor(1, 2))
        m = ModelSpec(a, tuple(BALANCED for _ in range(12)), rng.uniform(0.5, 1.5, 12))
        dec = traditional_dec1(m)
        samples = np.linspace(5, 40, 300)
        w = analysis.asymptotic_weights(m, dec, samples)
        o = np.array([0.3, -1.2])
        O = np.diag(o)
        obs = RelevantObservable({0: O, 1: SIGMA_Z})
        long_avg = analysis.series_for(m, dec, samples, obs).total.mean()
        diag = np.kron(o, [1, -1])
        assert abs(w.weights @ diag - long_avg) < 1e-3

    def test_sample_set_invariance(self):
        m = traditional(14, 11)
        dec = traditional_dec1(m)
        t_D = analysis.decomposition_decoherence_time(m, dec)
        w1 = analysis.asymptotic_weights(m, dec, np.linspace(3 * t_D, 6 * t_D, 30))
        w2 = analysis.asymptotic_weights(m, dec, np.linspace(6.5 * t_D, 9 * t_D, 30))
        assert abs(w1.weights.sum() - 1) < 1e-9
        assert np.max(np.abs(w1.weights - w2.weights)) < 2e-3

    def test_samples_before_t_d(self):
        m = traditional(14, 11)
        with pytest.raises(ValueError):
            analysis.asymptotic_weights(m, traditional_dec1(m), [1e-3, 10.0])

    def test_no_crossing(self):
        m = ModelSpec((BALANCED,), (UP,) * 3, [1, 2, 3])
        with pytest.raises(NoCrossing):
            analysis.asymptotic_weights(m, traditional_dec1(m), [10.0])


class TestPointerBasis:
    def test_diagonal_frozen(self, rng):
        m = random_model(rng, 2, 4)
        rep = analysis.pointer_basis_check(m, Decomposition.from_system(m, [0, 3]), np.linspace(0, 8, 40))
        assert rep.diag_drift < 1e-10 and rep.is_pointer_basis

    def test_offdiagonal_matches_r(self, rng):
        m = random_model(rng, 1, 8)
        rep = analysis.pointer_basis_check(m, traditional_dec1(m), np.linspace(0, 8, 40))
        assert rep.offdiag_deviation < 1e-10

    def test_rotated_basis_flagged(self, rng):
        m = random_model(rng, 1, 8)
        U = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        rep = analysis.pointer_basis_check(m, traditional_dec1(m), np.linspace(0, 8, 40), basis=U)
        assert not rep.is_pointer_basis


class TestInvariance:
    def test_uncoupled(self, rng):
        m = random_model(rng, 2, 4).with_couplings([0.0] * 4)
        rep = analysis.check_dynamical_invariance(m, traditional_dec1(m))
        assert rep.invariant
        assert rep.purity_spread < 1e-12 and rep.state_drift < 1e-12

    def test_coupled(self, rng):
        m = random_model(rng, 2, 4)
        rep = analysis.check_dynamical_invariance(m, traditional_dec1(m))
        assert not rep.invariant and rep.crossing_pairs

    def test_partial_couplings(self, rng):
        m = random_model(rng, 1, 3).with_couplings([0.0, 0.5, 0.0])
        dec = Decomposition.from_system(m, [0, 2])
        assert analysis.check_dynamical_invariance(m, dec).invariant
        assert not analysis.check_dynamical_invariance(m, Decomposition.from_system(m, [0, 1])).invariant
