"""Tests de parámetros, especificación de experimentos y validadores."""

import math

import pytest

from models.experiment import ExperimentSpec
from models.params import DetectorConfig, ProblemParams, make_params, validate
from models.results import GradedProfile, TrialProtocol
from utils.exceptions import ConstraintViolationError, UnknownExperimentError
from utils.validators import ms_to_s, s_to_ms, validar_overrides


FIG3_PARAMS = {"P": 1, "L": 20e-3, "N": 10_000, "f": 5.0, "T": 5e-3}


class TestValidate:
    """Validación del par (problema, detector)."""

    def test_valid_pair(self):
        params, config = validate(FIG3_PARAMS, {"tau": 10e-3, "dt_window": 20e-3})
        assert isinstance(params, ProblemParams)
        assert isinstance(config, DetectorConfig)
        assert params.input_rate == pytest.approx(50_000)

    def test_zero_dt_rejected(self):
        with pytest.raises(ConstraintViolationError) as exc:
            validate(FIG3_PARAMS, {"tau": 10e-3, "dt_window": 0.0})
        assert exc.value.field == "dt_window"

    def test_dt_longer_than_pattern_rejected(self):
        with pytest.raises(ConstraintViolationError) as exc:
            validate(FIG3_PARAMS, {"tau": 10e-3, "dt_window": 30e-3})
        assert exc.value.field == "dt_window"

    def test_unbounded_pattern_accepts_any_dt(self):
        params, _ = validate({**FIG3_PARAMS, "L": math.inf}, {"tau": 10e-3, "dt_window": 1.0})
        assert not params.bounded

    @pytest.mark.parametrize("field,value", [("P", 0), ("N", 0), ("f", 0.0), ("T", -1e-3)])
    def test_invalid_problem_fields(self, field, value):
        with pytest.raises(ConstraintViolationError) as exc:
            make_params({**FIG3_PARAMS, field: value})
        assert exc.value.field == field


class TestModels:
    def test_protocol_requires_gap(self):
        params = make_params(FIG3_PARAMS)
        with pytest.raises(ValueError):
            TrialProtocol(params=params, presentations_per_pattern=1, inter_presentation_interval=25e-3)
        protocol = TrialProtocol(params=make_params({**FIG3_PARAMS, "P": 5}), presentations_per_pattern=3)
        assert protocol.n_presentations == 15

    def test_graded_profile_first_weight_fixed(self):
        with pytest.raises(ValueError):
            GradedProfile(n=2, dt_windows=[1e-3, 1e-3], weights=[0.5, 0.5])
        with pytest.raises(ValueError):
            GradedProfile(n=2, dt_windows=[1e-3], weights=[1.0, 0.5])
        profile = GradedProfile(n=2, dt_windows=[1e-3, 1e-3], weights=[1.0, 0.0])
        assert profile.weights == [1.0, 0.0]


class TestExperimentSpec:
    def test_unknown_experiment(self):
        with pytest.raises(UnknownExperimentError):
            ExperimentSpec.create(name="fig9-nothing")

    def test_invalid_override(self):
        with pytest.raises(ConstraintViolationError):
            ExperimentSpec.create(name="table1-theory", overrides={"w_out": 0.1})

    def test_run_dir_is_deterministic(self, tmp_path):
        spec = ExperimentSpec.create(name="fig5-psweep", seed=7, scale="desk", output_dir=tmp_path)
        assert spec.run_dir == tmp_path / "fig5-psweep_7_desk"
        assert spec.override("P", 3) == 3


class TestValidators:
    def test_unit_conversion(self):
        assert ms_to_s(3.2) == pytest.approx(3.2e-3)
        assert s_to_ms(0.011) == pytest.approx(11.0)

    def test_overrides(self):
        assert validar_overrides({"P": 5, "T": 0.0, "w_out": -1e-3}) == []
        errores = validar_overrides({"tau": -1.0, "w_out": 0.0})
        assert len(errores) == 2
