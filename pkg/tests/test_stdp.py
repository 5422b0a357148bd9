"""Tests de la neurona plástica, el aprendizaje STDP y sus métricas."""

import math

import numpy as np
import pytest

from config.settings import MAX_LEARNING_TIME, TABLE1
from controllers.analytic_controller import dt_from_m
from controllers.simulation_controller import integrate_lif
from controllers.stdp_controller import (
    PlasticLifState,
    apply_ltp_ltd,
    convergence_index,
    geometric_range,
    grid_search,
    initial_weight,
    is_optimal,
    leading_subsection,
    prefix_explained_fraction,
    run_learning,
    step_plastic_lif,
)
from models.learning import LearningOutcome, StdpConfig
from models.params import make_params
from models.spikes import Pattern, SpikeStream
from utils.exceptions import ConstraintViolationError, InfeasibleInitializationError, NotConvergedError
from utils.rng import Purpose, master_stream

CONFIG = StdpConfig(theta0=190.0, w_out=-6.2e-3)


def _params(P=5, L=0.1, N=10_000, f=3.2, T=3.2e-3):
    return make_params({"P": P, "L": L, "N": N, "f": f, "T": T})


def _outcome(**kw):
    base = dict(
        final_weights=np.zeros(10),
        learned_pattern_count=5,
        hit_rate=1.0,
        false_alarm_rate=0.0,
        potentiated_count=1600,
        convergence_index=0.0,
        learning_time=100.0,
        leading_subsections=[0.01] * 5,
    )
    base.update(kw)
    return LearningOutcome(**base)


class TestPlasticity:
    def test_soft_bound_fixed_points(self):
        out = apply_ltp_ltd(np.array([0.0, 1.0]), np.array([0.1, 0.1]), CONFIG)
        np.testing.assert_array_equal(out, [0.0, 1.0])

    def test_combined_update(self):
        out = apply_ltp_ltd(np.array([0.5]), np.array([0.1]), CONFIG)
        assert out[0] == pytest.approx(0.52345, abs=1e-12)

    def test_ltd_only(self):
        w = np.full(4, 0.3)
        out = apply_ltp_ltd(w, np.zeros(4), CONFIG)
        assert np.all(out < w)
        assert np.all(out == out[0])
        np.testing.assert_array_equal(w, 0.3)

    def test_weights_stay_in_unit_interval(self):
        rng = np.random.default_rng(0)
        w = rng.uniform(0, 1, 1000)
        out = apply_ltp_ltd(w, rng.uniform(0, 10, 1000), StdpConfig(theta0=1.0, w_out=-5.0))
        assert np.all((out >= 0) & (out <= 1))


class TestInitialWeight:
    def test_residual(self):
        params = _params()
        w = initial_weight(params, CONFIG, 8.9e-3)
        x = 8.9e-3 * params.f * params.N
        assert 0 < w <= 1
        assert abs(x * w - math.sqrt(x * w * w / 2) - 190.0) < 1e-9

    def test_small_threshold_gives_small_weight(self):
        w = initial_weight(_params(), StdpConfig(theta0=1e-6, w_out=-1e-3), 8.9e-3)
        assert 0 < w < 1e-8

    def test_explicit_initial_weight(self):
        config = StdpConfig(theta0=190.0, w_out=-6.2e-3, w_init=0.4)
        assert initial_weight(_params(), config, 8.9e-3) == 0.4

    def test_infeasible(self):
        with pytest.raises(InfeasibleInitializationError):
            initial_weight(_params(), StdpConfig(theta0=1e4, w_out=-1e-3), 8.9e-3)


class TestPlasticNeuron:
    def test_no_input_decays(self):
        state = PlasticLifState.initial(3, 0.5, 10.0)
        state.theta = 10.0 + 18.0
        assert state.threshold_at(0.08, StdpConfig(theta0=10.0, w_out=-1e-3)) == pytest.approx(
            10.0 + 18.0 * math.exp(-1.0)
        )

    def test_threshold_after_spike(self):
        config = StdpConfig(theta0=1.0, w_out=-1e-3)
        state = PlasticLifState.initial(1, 1.0, 1.0)
        spikes, _ = step_plastic_lif(state, np.array([0]), np.array([0.01]), config, 10e-3, plastic=False)
        assert spikes.tolist() == [0.01]
        assert state.v == 0.0
        delta = 0.05
        expected = 1.0 + 1.8 * math.exp(-delta / config.tau_theta)
        assert state.threshold_at(0.01 + delta, config) == pytest.approx(expected)

    def test_intervals_lengthen_under_constant_drive(self):
        config = StdpConfig(theta0=5.0, w_out=-1e-3)
        state = PlasticLifState.initial(1, 1.0, 5.0)
        times = np.arange(1, 4001) * 1e-4
        spikes, _ = step_plastic_lif(state, np.zeros(times.size, np.int64), times, config, 10e-3, plastic=False)
        isi = np.diff(spikes)
        assert spikes.size >= 4
        assert isi[-1] > isi[0]

    def test_matches_plain_lif_below_threshold(self):
        rng = np.random.default_rng(4)
        n_aff, duration = 200, 2.0
        n = rng.poisson(n_aff * 5.0 * duration)
        stream = SpikeStream.from_unsorted(rng.integers(0, n_aff, n), rng.uniform(0, duration, n), duration, n_aff)
        weights = rng.uniform(0, 1, n_aff)
        state = PlasticLifState.initial(n_aff, 0.0, 1e9)
        state.weights = weights.copy()
        config = StdpConfig(theta0=1e9, w_out=-1e-3)
        spikes, v = step_plastic_lif(state, stream.afferents, stream.times, config, 10e-3, record_v=True)
        trace = integrate_lif(stream, weights, 10e-3, engine="event")
        assert spikes.size == 0
        keep = weights[stream.afferents] > 0
        np.testing.assert_allclose(v[keep], trace.values, rtol=1e-10)
        np.testing.assert_array_equal(state.weights, weights)


class TestMetrics:
    def test_convergence_index(self):
        assert convergence_index(np.array([0.0, 1.0, 1.0])) == 0.0
        assert convergence_index(np.full(8, 0.5)) == 0.5
        assert convergence_index(np.array([0.1, 0.9])) == pytest.approx(0.1)

    def test_leading_subsection(self):
        pattern = Pattern(np.array([0, 1, 2, 3]), np.array([0.001, 0.004, 0.006, 0.02]), 0.05, 4)
        assert leading_subsection(pattern, np.array([1.0, 1.0, 1.0, 0.0])) == pytest.approx(0.006)
        assert leading_subsection(pattern, np.ones(4)) == pytest.approx(0.02)
        assert leading_subsection(pattern, np.zeros(4)) == 0.0

    def test_leading_subsection_is_anchored_at_first_spike(self):
        pattern = Pattern(np.array([0, 1, 2, 3]), np.array([0.001, 0.004, 0.006, 0.02]), 0.05, 4)
        assert leading_subsection(pattern, np.array([0.0, 1.0, 1.0, 1.0])) == 0.0
        assert leading_subsection(pattern, np.array([1.0, 0.0, 1.0, 1.0])) == pytest.approx(0.001)

    def test_leading_subsection_requires_learned_weights(self):
        pattern = Pattern(np.array([0, 1, 2]), np.array([0.001, 0.004, 0.006]), 0.05, 3)
        assert leading_subsection(pattern, np.array([1.0, 0.6, 1.0])) == pytest.approx(0.001)
        assert leading_subsection(pattern, np.array([0.95, 0.99, 1.0])) == pytest.approx(0.006)

    def test_prefix_fraction(self):
        patterns = [Pattern(np.array([0, 1]), np.array([0.001, 0.03]), 0.05, 3)]
        assert prefix_explained_fraction(patterns, np.array([1.0, 1.0, 0.0]), 0.01) == pytest.approx(0.5)
        assert prefix_explained_fraction(patterns, np.zeros(3), 0.01) == 0.0

    def test_geometric_range(self):
        values = geometric_range(190.0)
        assert 190.0 in values
        assert min(values) >= 95.0 and max(values) <= 285.0
        assert values[1] / values[0] == pytest.approx(1.025)
        assert geometric_range(-6.2e-3, max_steps=0) == [-6.2e-3]
        assert len(geometric_range(190.0, max_steps=2)) == 5
        with pytest.raises(ConstraintViolationError):
            geometric_range(0.0)


class TestIsOptimal:
    def test_optimal(self):
        assert is_optimal(_outcome(), _params(), 1600)

    def test_silent_pattern(self):
        assert not is_optimal(_outcome(learned_pattern_count=4), _params(), 1600)

    def test_outside_margin(self):
        assert not is_optimal(_outcome(potentiated_count=1760), _params(), 1600)

    def test_short_subsection(self):
        assert not is_optimal(_outcome(leading_subsections=[0.01] * 4 + [0.0]), _params(), 1600)

    def test_not_converged(self):
        with pytest.raises(NotConvergedError):
            is_optimal(_outcome(convergence_index=0.2), _params(), 1600)


class TestRunLearning:
    def test_zero_duration_keeps_weights(self):
        params = _params(P=2, N=2000)
        config = StdpConfig(theta0=40.0, w_out=-6.2e-3)
        outcome = run_learning(params, 8.9e-3, config, 0.0, master_stream(1), m_opt=300, evaluation_presentations=5)
        assert outcome.learning_time == 0.0
        assert np.all(outcome.final_weights == outcome.initial_weight)
        assert not outcome.optimal
        assert outcome.trace_frame().columns.tolist() == ["time_s", "index"]

    def test_short_run_is_reproducible(self):
        params = _params(P=2, N=2000)
        config = StdpConfig(theta0=40.0, w_out=-6.2e-3)
        a = run_learning(params, 8.9e-3, config, 20.0, master_stream(3), evaluation_presentations=5)
        b = run_learning(params, 8.9e-3, config, 20.0, master_stream(3), evaluation_presentations=5)
        np.testing.assert_array_equal(a.final_weights, b.final_weights)
        assert np.all((a.final_weights >= 0) & (a.final_weights <= 1))
        assert a.learning_time == pytest.approx(20.0)
        assert len(a.convergence_trace) == 3

    def test_negative_duration(self):
        with pytest.raises(ConstraintViolationError):
            run_learning(_params(P=1, N=100), 8.9e-3, CONFIG, -1.0, master_stream(0))

    def test_single_cell_grid_is_one_run(self):
        params = _params(P=2, N=2000)
        config = StdpConfig(theta0=40.0, w_out=-6.2e-3)
        rng = master_stream(5)
        result = grid_search(params, 8.9e-3, [40.0], [-6.2e-3], 1, rng, duration=10.0)
        assert len(result.cells) == 1
        assert result.best.runs == 1
        direct = run_learning(params, 8.9e-3, config, 10.0, rng.spawn(Purpose.TRIAL, 0))
        np.testing.assert_array_equal(result.best_outcomes[0].final_weights, direct.final_weights)

    @pytest.mark.slow
    def test_table_settings_learn_all_patterns(self):
        row = TABLE1[5]
        outcome = run_learning(
            _params(), row["tau"], StdpConfig(theta0=row["theta0"], w_out=row["w_out"]),
            MAX_LEARNING_TIME, master_stream(2018), m_opt=row["m"],
        )
        assert outcome.learned_pattern_count == 5
        assert outcome.hit_rate >= 0.9
        assert outcome.false_alarm_rate == 0.0
        assert outcome.convergence_index < 0.01
        assert outcome.learning_time < MAX_LEARNING_TIME
        assert outcome.optimal
        assert outcome.prefix_fraction >= 0.95
        dt_opt = dt_from_m(_params(), row["m"])
        assert min(outcome.leading_subsections) >= 0.5 * dt_opt
