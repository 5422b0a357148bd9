"""Tests de reportes, orquestación de experimentos y CLI."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from config.settings import SCALE_SETTINGS
from controllers.experiment_controller import ExperimentController
from controllers.report_controller import ReportController
from main import EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK, build_parser, collect_overrides, main
from models.experiment import ExperimentSpec
from models.spikes import SpikeStream
from utils.exceptions import ExperimentError
from utils.spike_csv import SpikeStreamIO


class TestReportController:
    def test_emit_plot_data(self, tmp_path):
        report = ReportController(tmp_path / "run")
        frame = pd.DataFrame({"P": [5, 10], "snr_opt": [31.3, 20.1]})
        path = report.emit_plot_data(frame, "serie", title="Prueba", columns={"snr_opt": "adimensional"})
        assert path.read_text(encoding="utf-8").splitlines()[0] == "P,snr_opt"
        meta = json.loads((tmp_path / "run" / "serie.meta.json").read_text(encoding="utf-8"))
        assert meta["rows"] == 2
        assert meta["columns"] == {"P": "", "snr_opt": "adimensional"}
        assert report.files == ["serie.csv", "serie.meta.json"]

    def test_empty_frame(self, tmp_path):
        with pytest.raises(ExperimentError):
            ReportController(tmp_path).emit_plot_data(pd.DataFrame(), "vacia")

    def test_summary_lists_files(self, tmp_path):
        report = ReportController(tmp_path)
        report.emit_plot_data(pd.DataFrame({"x": [1]}), "x")
        path = report.write_summary({"value": np.float64(1.5), "flag": np.bool_(True)})
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert payload["value"] == 1.5
        assert payload["flag"] is True
        assert payload["files"] == ["x.csv", "x.meta.json"]

    def test_export_excel(self, tmp_path):
        openpyxl = pytest.importorskip("openpyxl")
        report = ReportController(tmp_path)
        report.emit_plot_data(
            pd.DataFrame({"a": [1.0, float("nan")], "b": [3, 4]}), "tabla", columns={"a": "ms"},
        )
        path = report.export_excel()
        ws = openpyxl.load_workbook(path)["tabla"]
        assert ws.cell(row=5, column=1).value == "a"
        assert ws.cell(row=6, column=1).value == "ms"
        assert ws.cell(row=7, column=1).value == 1.0
        assert ws.cell(row=8, column=1).value is None
        assert ws.cell(row=8, column=2).value == 4
        assert "tables.xlsx" in report.files

    def test_export_excel_without_tables(self, tmp_path):
        with pytest.raises(ExperimentError):
            ReportController(tmp_path).export_excel()


class TestExperimentController:
    def _run(self, tmp_path, name, **kw):
        spec = ExperimentSpec.create(name=name, output_dir=tmp_path, **kw)
        return spec, ExperimentController(spec).run()

    def test_table1_theory_single_p(self, tmp_path):
        spec, result = self._run(tmp_path, "table1-theory", overrides={"P": 5}, check=True)
        assert result.passed and result.exit_code == 0
        assert {c.name for c in result.checks} == {f"table1_P5_{k}" for k in ("dt", "tau", "m", "snr")}
        frame = pd.read_csv(spec.run_dir / "table1_theory.csv")
        assert frame["P"].tolist() == [5]
        summary = json.loads(result.summary_path.read_text(encoding="utf-8"))
        assert summary["experiment"] == "table1-theory"
        assert summary["overrides"] == {"P": 5}
        assert "table1_theory.csv" in summary["files"]
        assert "run.log" in summary["files"]
        assert "Experimento table1-theory" in (spec.run_dir / "run.log").read_text(encoding="utf-8")

    def test_non_reference_setting_has_no_table_checks(self, tmp_path):
        _, result = self._run(tmp_path, "fig5-psweep", overrides={"P": 20, "f": 1.0})
        assert [c.name for c in result.checks] == ["fig5_snr_non_increasing"]
        assert result.passed

    def test_failed_check_sets_exit_code(self, tmp_path, monkeypatch):
        monkeypatch.setattr("controllers.experiment_controller.TOL_TABLE1_RELATIVE", 0.0)
        _, result = self._run(tmp_path, "table1-theory", overrides={"P": 5}, check=True)
        assert not result.passed
        assert result.exit_code == 1

    def test_failed_check_without_flag(self, tmp_path, monkeypatch):
        monkeypatch.setattr("controllers.experiment_controller.TOL_TABLE1_RELATIVE", 0.0)
        _, result = self._run(tmp_path, "table1-theory", overrides={"P": 5})
        assert result.exit_code == 0

    def test_fig7_single_rate(self, tmp_path):
        spec, result = self._run(tmp_path, "fig7-graded", overrides={"f": 5.0}, xlsx=True)
        weights = pd.read_csv(spec.run_dir / "fig7_weights_f5.csv")
        assert list(weights.columns) == ["window", "time_before_end_ms", "dt_ms", "weight", "exp_reference"]
        assert len(weights) == 70
        assert weights["weight"].between(0, 1).all()
        checks = {c.name: c for c in result.checks}
        assert checks["fig7_f5_gain_non_negative"].passed
        assert checks["fig7_f5_gradient"].passed
        assert (spec.run_dir / "tables.xlsx").exists()

    def test_fig4_small_grid(self, tmp_path, monkeypatch):
        monkeypatch.setitem(SCALE_SETTINGS["desk"], "fig4_grid", 3)
        spec, result = self._run(tmp_path, "fig4-maps")
        cells = pd.read_csv(spec.run_dir / "fig4_cells.csv")
        assert len(cells) == 9
        assert {c.name for c in result.checks} == {"fig4_constraint_satisfied", "fig4_same_order_low_f_T"}
        for name in ("fig4_dt_over_tau", "fig4_tau_opt_ms", "fig4_snr_opt"):
            assert (spec.run_dir / f"{name}.csv").exists()


class TestCli:
    def test_overrides_are_converted(self):
        args = build_parser().parse_args(["fig3-validation", "--tau-ms", "10", "--T-ms", "5", "--P", "2"])
        assert collect_overrides(args) == {"P": 2, "T": pytest.approx(5e-3), "tau": pytest.approx(10e-3)}

    def test_experiment_exit_ok(self, tmp_path, capsys):
        code = main(["fig5-psweep", "--P", "10", "--f-hz", "2.0", "--out", str(tmp_path), "--check"])
        assert code == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["passed"] is True
        assert out["failed_checks"] == []
        assert Path(out["summary"]).exists()

    def test_experiment_exit_check_failed(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr("controllers.experiment_controller.TOL_TABLE1_RELATIVE", 0.0)
        code = main(["table1-theory", "--P", "5", "--out", str(tmp_path), "--check"])
        assert code == EXIT_CHECK_FAILED
        assert "table1_P5_snr" in json.loads(capsys.readouterr().out)["failed_checks"]

    def test_rerun_with_same_seed_gives_identical_csvs(self, tmp_path, capsys):
        run_dirs = []
        for out in ("a", "b"):
            code = main(["fig2-averaging", "--seed", "31", "--out", str(tmp_path / out)])
            assert code == EXIT_OK
            run_dirs.append(Path(json.loads(capsys.readouterr().out)["summary"]).parent)
        first = sorted(p.name for p in run_dirs[0].glob("*.csv"))
        assert "fig2_realizations.csv" in first
        assert first == sorted(p.name for p in run_dirs[1].glob("*.csv"))
        for name in first:
            assert (run_dirs[0] / name).read_bytes() == (run_dirs[1] / name).read_bytes()

    def test_invalid_override(self, tmp_path):
        assert main(["table1-theory", "--N", "0", "--out", str(tmp_path)]) == EXIT_ERROR

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["fig9"])
        assert exc.value.code == 2

    def test_export_pattern(self, tmp_path, capsys):
        code = main(["export-pattern", "--P", "2", "--N", "100", "--out", str(tmp_path), "--seed", "7"])
        assert code == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert len(out["patterns"]) == 2
        back = SpikeStreamIO.read_csv(tmp_path / "pattern_1.csv", n_afferents=100)
        assert back.n_afferents == 100

    def test_inspect_spikes(self, tmp_path, capsys):
        stream = SpikeStream(np.array([0, 3, 1]), np.array([0.1, 0.2, 0.9]), 1.0, 4)
        path = SpikeStreamIO.write_csv(stream, tmp_path / "s.csv")
        assert main(["inspect-spikes", str(path), "--duration-ms", "1000", "--N", "4"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["events"] == 3
        assert out["active_afferents"] == 3
        assert out["mean_rate_hz"] == pytest.approx(0.75)

    def test_inspect_missing_file(self, tmp_path):
        assert main(["inspect-spikes", str(tmp_path / "nada.csv")]) == EXIT_ERROR
