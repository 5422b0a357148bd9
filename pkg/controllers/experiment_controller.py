"""Orquestación de los experimentos reproducibles del CLI.

Cada experimento delega en los controladores analítico, optimizador,
de simulación y STDP, emite sus series con ``ReportController`` y
registra los chequeos de aceptación en ``summary.json``.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd

from config.settings import (
    APP_VERSION,
    DEFAULT_F,
    DEFAULT_L_STDP,
    DEFAULT_N,
    DEFAULT_T,
    FIG2_DEFAULTS,
    FIG3_DEFAULTS,
    FIG3_P_VALUES,
    FIG4_F_RANGE,
    FIG4_P,
    FIG4_T_RANGE,
    FIG5_P_VALUES,
    FIG7_F_VALUES,
    FIG7_TAU,
    GRADED_GAIN_TARGETS,
    GRADED_N,
    MAX_LEARNING_TIME,
    MIN_SYNAPTIC_INPUTS,
    STDP_GRID_STEPS,
    STDP_MIN_HIT_RATE,
    STDP_MIN_OPTIMAL_FRACTION,
    STDP_P_VALUES,
    TABLE1,
    TABLE1_STDP_TARGETS,
    TOL_FIG2_RELATIVE,
    TOL_FIG3_SIGMAS,
    TOL_GRADED_GAIN,
    TOL_GRADIENT_RELATIVE,
    TOL_TABLE1_RELATIVE,
)
from controllers.analytic_controller import snr
from controllers.optimizer_controller import (
    exponential_reference,
    graded_snr_from_weights,
    graded_snr_gradient,
    optimize_graded_weights,
    optimize_snr,
    sweep_optima,
)
from controllers.report_controller import ReportController
from controllers.simulation_controller import (
    averaging_validation,
    measure_empirical_snr,
    run_validation_trials,
)
from controllers.stdp_controller import geometric_range, grid_search
from models.experiment import ExperimentSpec
from models.learning import StdpConfig
from models.params import DetectorConfig, ProblemParams, make_params
from models.results import TrialProtocol
from utils.logger import attach_run_log, detach_run_log, get_logger
from utils.rng import Purpose, master_stream
from utils.validators import s_to_ms

logger = get_logger("controllers.experiment")


@dataclass
class CheckResult:
    """Chequeo de aceptación con su valor, objetivo y tolerancia."""

    name: str
    passed: bool
    value: float
    target: float
    tolerance: float
    detail: str = ""


@dataclass
class ExperimentResult:
    """Resultado de un experimento: resumen escrito y chequeos."""

    summary_path: Path
    checks: list[CheckResult] = field(default_factory=list)
    check_requested: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 1 if self.check_requested and not self.passed else 0


def _relative_check(name: str, value: float, target: float, tol: float) -> CheckResult:
    rel = abs(value - target) / abs(target)
    return CheckResult(name, rel <= tol, value, target, tol, f"error relativo {rel:.4f}")


class ExperimentController:
    """Ejecuta un ``ExperimentSpec`` y escribe sus resultados."""

    def __init__(self, spec: ExperimentSpec) -> None:
        """Inicializa el controlador.

        Args:
            spec: Especificación validada del experimento.
        """
        self.spec = spec
        self.report = ReportController(spec.run_dir)
        self.checks: list[CheckResult] = []
        self._runners: dict[str, Callable[[], dict[str, Any]]] = {
            "table1-theory": self._table1_theory,
            "table1-stdp": self._table1_stdp,
            "fig2-averaging": self._fig2_averaging,
            "fig3-validation": self._fig3_validation,
            "fig4-maps": self._fig4_maps,
            "fig5-psweep": self._fig5_psweep,
            "fig7-graded": self._fig7_graded,
        }

    # --------------------------------------------------------
    # Utilidades
    # --------------------------------------------------------
    def _params(self, **defaults: float) -> ProblemParams:
        o = self.spec.overrides
        data = {key: o.get(key, value) for key, value in defaults.items()}
        data.setdefault("N", o.get("N", DEFAULT_N))
        data["P"] = int(data["P"])
        data["N"] = int(data["N"])
        return make_params(data)

    def _p_values(self, defaults: list[int]) -> list[int]:
        if "P" in self.spec.overrides:
            return [int(self.spec.overrides["P"])]
        return list(defaults)

    def _reference_setting(self) -> bool:
        """True si f, T y N no fueron modificados (valen los objetivos de la tabla)."""
        return not any(k in self.spec.overrides for k in ("f", "T", "N"))

    # --------------------------------------------------------
    # Ejecución
    # --------------------------------------------------------
    def run(self) -> ExperimentResult:
        """Ejecuta el experimento y escribe ``summary.json``.

        Returns:
            ExperimentResult con los chequeos de aceptación.
        """
        spec = self.spec
        run_log = attach_run_log(spec.run_dir)
        self.report.register(self.report.run_dir / Path(run_log.baseFilename).name)
        try:
            return self._run(spec)
        finally:
            detach_run_log(run_log)

    def _run(self, spec: ExperimentSpec) -> ExperimentResult:
        logger.info("Experimento %s (seed=%d, escala=%s)", spec.name, spec.seed, spec.scale)
        results = self._runners[spec.name]()

        if spec.xlsx:
            self.report.export_excel(title=spec.name)

        summary = {
            "app_version": APP_VERSION,
            "experiment": spec.name,
            "seed": spec.seed,
            "scale": spec.scale,
            "overrides": dict(spec.overrides),
            "scale_settings": dict(spec.scale_settings),
            "checks": [vars(c) for c in self.checks],
            "passed": all(c.passed for c in self.checks),
            "results": results,
        }
        path = self.report.write_summary(summary)
        for c in self.checks:
            level = logger.info if c.passed else logger.warning
            level("Chequeo %-32s %s (%s)", c.name, "OK" if c.passed else "FALLA", c.detail)
        return ExperimentResult(path, list(self.checks), spec.check)

    # --------------------------------------------------------
    # Tabla de rendimiento: óptimos teóricos
    # --------------------------------------------------------
    def _table1_theory(self) -> dict[str, Any]:
        rows = []
        for P in self._p_values(sorted(TABLE1)):
            params = self._params(P=P, L=self.spec.overrides.get("L", math.inf), f=DEFAULT_F, T=DEFAULT_T)
            det = optimize_snr(params)
            rows.append({
                "P": P,
                "dt_opt_ms": s_to_ms(det.dt_opt),
                "tau_opt_ms": s_to_ms(det.tau_opt),
                "m_opt": det.m_opt,
                "snr_opt": det.snr_opt,
                "constraint_active": det.constraint_active,
            })
            target = TABLE1.get(P)
            if target and self._reference_setting():
                for key, value, ref in (
                    ("dt", det.dt_opt, target["dt"]),
                    ("tau", det.tau_opt, target["tau"]),
                    ("m", det.m_opt, target["m"]),
                    ("snr", det.snr_opt, target["snr"]),
                ):
                    self.checks.append(_relative_check(f"table1_P{P}_{key}", value, ref, TOL_TABLE1_RELATIVE))

        frame = pd.DataFrame(rows)
        self.report.emit_plot_data(
            frame, "table1_theory", title="Óptimos teóricos por P",
            columns={"dt_opt_ms": "ms", "tau_opt_ms": "ms", "m_opt": "aferentes", "snr_opt": "adimensional"},
        )
        return {"rows": rows}

    # --------------------------------------------------------
    # Tabla de rendimiento: aprendizaje STDP
    # --------------------------------------------------------
    def _table1_stdp(self) -> dict[str, Any]:
        spec, o = self.spec, self.spec.overrides
        runs = int(spec.scale_settings["stdp_runs"])
        duration = float(spec.scale_settings.get("stdp_max_time", MAX_LEARNING_TIME))
        out: dict[str, Any] = {}

        for P in self._p_values(STDP_P_VALUES[spec.scale]):
            row = TABLE1.get(P, TABLE1[min(TABLE1, key=lambda k: abs(k - P))])
            params = self._params(P=P, L=DEFAULT_L_STDP, f=DEFAULT_F, T=DEFAULT_T)
            det = optimize_snr(params.model_copy(update={"L": math.inf}))
            tau = o.get("tau", det.tau_opt)
            theta0 = o.get("theta0", row["theta0"])
            w_out = o.get("w_out", row["w_out"])

            steps = STDP_GRID_STEPS[spec.scale]
            result = grid_search(
                params, tau,
                geometric_range(theta0, max_steps=steps),
                geometric_range(w_out, max_steps=steps),
                runs,
                master_stream(spec.seed).spawn(Purpose.CELL, P),
                m_opt=det.m_opt,
                duration=duration,
                workers=spec.workers,
            )
            best = result.best
            outcomes = result.best_outcomes

            self.report.emit_plot_data(
                result.to_frame(), f"stdp_grid_P{P}", title=f"Búsqueda θ₀ × w_out (P={P})",
                columns={"theta0": "potencial", "w_out": "adimensional", "p_opt": "fracción"},
            )
            self.report.emit_plot_data(
                pd.DataFrame([{"run": i, **o_.to_record()} for i, o_ in enumerate(outcomes)]).drop(
                    columns=["pattern_hit_rates", "leading_subsections_s"],
                ),
                f"stdp_runs_P{P}", title=f"Corridas en la mejor celda (P={P})",
                columns={"hit_rate": "fracción", "false_alarm_rate": "Hz", "learning_time_s": "s"},
            )
            if outcomes:
                self.report.emit_plot_data(
                    outcomes[0].trace_frame(), f"convergence_P{P}",
                    title=f"Índice de convergencia (P={P}, corrida 0)",
                    columns={"time_s": "s", "index": "adimensional"},
                )
                self.report.emit_plot_data(
                    outcomes[0].weights_frame(), f"weights_P{P}",
                    title=f"Pesos finales (P={P}, corrida 0)", columns={"weight": "[0, 1]"},
                )

            mean_hit = float(np.mean([x.hit_rate for x in outcomes])) if outcomes else 0.0
            max_fa = float(max((x.false_alarm_rate for x in outcomes), default=0.0))
            mean_prefix = float(np.mean([x.prefix_fraction for x in outcomes])) if outcomes else 0.0
            out[f"P{P}"] = {
                "tau": tau,
                "m_opt": det.m_opt,
                "best_cell": vars(best),
                "mean_hit_rate": mean_hit,
                "max_false_alarm_rate": max_fa,
                "mean_prefix_fraction": mean_prefix,
                "targets": TABLE1_STDP_TARGETS.get(P, {}),
            }

            if P == 5 and self._reference_setting():
                self.checks.append(CheckResult(
                    "stdp_P5_optimal_fraction", best.p_opt >= STDP_MIN_OPTIMAL_FRACTION,
                    best.p_opt, STDP_MIN_OPTIMAL_FRACTION, 0.0, f"{best.p_opt * runs:.0f}/{runs} óptimas",
                ))
                self.checks.append(CheckResult(
                    "stdp_P5_hit_rate", mean_hit >= STDP_MIN_HIT_RATE,
                    mean_hit, STDP_MIN_HIT_RATE, 0.0, f"aciertos medios {100 * mean_hit:.1f}%",
                ))
                self.checks.append(CheckResult(
                    "stdp_P5_false_alarms", max_fa == 0.0, max_fa, 0.0, 0.0, "falsas alarmas en evaluación",
                ))
        return out

    # --------------------------------------------------------
    # Promedio de la SNR reducida sobre realizaciones
    # --------------------------------------------------------
    def _fig2_averaging(self) -> dict[str, Any]:
        o = self.spec.overrides
        params = self._params(
            P=FIG2_DEFAULTS["P"], L=math.inf, f=FIG2_DEFAULTS["f"], T=0.0,
        )
        dt = o.get("dt_window", FIG2_DEFAULTS["dt_window"])
        n = int(self.spec.scale_settings["fig2_realizations"])
        report = averaging_validation(params, dt, n, master_stream(self.spec.seed).spawn(Purpose.REALIZATION, 0))

        self.report.emit_plot_data(
            report.to_frame(), "fig2_realizations", title="M, r y SNR reducida por realización",
            columns={"M": "aferentes", "r_hz": "Hz", "snr": "adimensional"},
        )
        self.checks.append(CheckResult(
            "fig2_mean_vs_approximation", report.relative_error <= TOL_FIG2_RELATIVE,
            report.mean_snr, report.approx_snr, TOL_FIG2_RELATIVE,
            f"error relativo {report.relative_error:.4f}",
        ))
        return {
            "n_realizations": n,
            "mean_snr": report.mean_snr,
            "approx_snr": report.approx_snr,
            "relative_error": report.relative_error,
            "correlation_m_r": report.correlation,
            "excluded": report.excluded,
            "mean_m": float(report.m.mean()),
            "mean_r": float(report.r.mean()),
        }

    # --------------------------------------------------------
    # Validación teoría vs simulación
    # --------------------------------------------------------
    def _fig3_validation(self) -> dict[str, Any]:
        spec, o = self.spec, self.spec.overrides
        trials = int(spec.scale_settings["fig3_trials"])
        presentations = int(spec.scale_settings["fig3_presentations"])
        tau = o.get("tau", FIG3_DEFAULTS["tau"])
        rows, summary_rows, records = [], [], []

        for P in self._p_values(FIG3_P_VALUES):
            params = self._params(P=P, L=FIG3_DEFAULTS["L"], f=FIG3_DEFAULTS["f"], T=FIG3_DEFAULTS["T"])
            config = DetectorConfig(tau=tau, dt_window=o.get("dt_window", FIG3_DEFAULTS["dt_window"]))
            protocol = TrialProtocol(params=params, presentations_per_pattern=presentations)
            seed = spec.seed + 1000 * P
            trial_records = run_validation_trials(protocol, config, trials, seed, spec.workers)
            records.extend({"P": P, **r} for r in trial_records)

            if spec.dump_trace:
                trace_path = spec.run_dir / f"trace_P{P}.csv"
                measure_empirical_snr(
                    protocol, config, master_stream(seed).spawn(Purpose.TRIAL, 0), dump_trace=trace_path,
                )
                self.report.register(trace_path)

            values = np.array([r["empirical_snr"]["snr"] for r in trial_records])
            analytic = snr(params, config)
            for r in trial_records:
                e = r["empirical_snr"]
                rows.append({
                    "P": P, "trial": r["trial"], "empirical_snr": e["snr"],
                    "v_max_mean": e["v_max_mean"], "v_noise_mean": e["v_noise_mean"],
                    "v_noise_std": e["v_noise_std"], "m_connected": e["m_connected"],
                    "analytic_snr": r["analytic_snr"],
                })
            sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
            mean = float(values.mean())
            summary_rows.append({
                "P": P, "analytic_snr": analytic.snr, "empirical_mean": mean, "empirical_sd": sd,
                "analytic_v_noise_mean": analytic.v_noise_mean, "analytic_v_noise_std": analytic.v_noise_std,
            })
            diff = abs(mean - analytic.snr)
            self.checks.append(CheckResult(
                f"fig3_P{P}_within_sigmas", diff <= TOL_FIG3_SIGMAS * sd,
                mean, analytic.snr, TOL_FIG3_SIGMAS * sd, f"|Δ| = {diff:.3f}, sd = {sd:.3f}",
            ))

        self.report.emit_plot_data(
            pd.DataFrame(rows), "fig3_trials", title="SNR empírica por ensayo",
            columns={"empirical_snr": "adimensional", "v_max_mean": "potencial", "analytic_snr": "adimensional"},
        )
        self.report.emit_plot_data(
            pd.DataFrame(summary_rows), "fig3_summary", title="SNR teórica vs empírica",
            columns={"analytic_snr": "adimensional", "empirical_mean": "adimensional", "empirical_sd": "adimensional"},
        )
        return {"tau": tau, "trials": trials, "presentations_per_pattern": presentations,
                "summary": summary_rows, "records": records}

    # --------------------------------------------------------
    # Mapas de parámetros óptimos en f × T
    # --------------------------------------------------------
    def _fig4_maps(self) -> dict[str, Any]:
        spec = self.spec
        n = int(spec.scale_settings["fig4_grid"])
        P = int(spec.overrides.get("P", FIG4_P))
        N = int(spec.overrides.get("N", DEFAULT_N))
        f_grid = np.geomspace(*FIG4_F_RANGE, n)
        t_grid = np.geomspace(*FIG4_T_RANGE, n)
        cells = sweep_optima(f_grid, t_grid, P, N, L=spec.overrides.get("L", math.inf), workers=spec.workers)

        frame = pd.DataFrame([{
            "f_hz": c.f,
            "T_ms": s_to_ms(c.T),
            "tau_opt_ms": s_to_ms(c.detector.tau_opt) if c.feasible else np.nan,
            "dt_opt_ms": s_to_ms(c.detector.dt_opt) if c.feasible else np.nan,
            "dt_over_tau": c.detector.dt_opt / c.detector.tau_opt if c.feasible else np.nan,
            "snr_opt": c.detector.snr_opt if c.feasible else np.nan,
            "m_opt": c.detector.m_opt if c.feasible else np.nan,
            "constraint_active": c.detector.constraint_active if c.feasible else False,
        } for c in cells])

        axes = {"f_hz": "Hz", "T_ms": "ms"}
        for name, unit in (("dt_over_tau", "adimensional"), ("tau_opt_ms", "ms"), ("snr_opt", "adimensional")):
            self.report.emit_plot_data(
                frame[["f_hz", "T_ms", name]], f"fig4_{name}", title=f"{name} óptimo (P={P})",
                columns={**axes, name: unit},
            )
        self.report.emit_plot_data(frame, "fig4_cells", title=f"Óptimos por celda (P={P})", columns=axes)

        feasible = [c for c in cells if c.feasible]
        slack = [c.detector.tau_opt * c.f * c.detector.m_opt for c in feasible]
        self.checks.append(CheckResult(
            "fig4_constraint_satisfied", all(s >= MIN_SYNAPTIC_INPUTS * (1 - 1e-6) for s in slack),
            min(slack, default=math.nan), MIN_SYNAPTIC_INPUTS, 1e-6, "mínimo de τ·f·M",
        ))
        f_mid, t_mid = math.sqrt(FIG4_F_RANGE[0] * FIG4_F_RANGE[1]), math.sqrt(FIG4_T_RANGE[0] * FIG4_T_RANGE[1])
        low = [c for c in feasible if c.f <= f_mid and c.T <= t_mid]
        ratios = [c.detector.dt_opt / c.detector.tau_opt for c in low]
        self.checks.append(CheckResult(
            "fig4_same_order_low_f_T", all(0.1 <= r <= 10 for r in ratios),
            max(ratios, default=math.nan), 1.0, 10.0, "Δt/τ en el cuadrante f, T bajos",
        ))
        return {"P": P, "grid": n, "feasible_cells": len(feasible), "infeasible_cells": len(cells) - len(feasible)}

    # --------------------------------------------------------
    # Óptimos en función de P
    # --------------------------------------------------------
    def _fig5_psweep(self) -> dict[str, Any]:
        rows = []
        for P in self._p_values(FIG5_P_VALUES[self.spec.scale]):
            params = self._params(P=P, L=self.spec.overrides.get("L", math.inf), f=DEFAULT_F, T=DEFAULT_T)
            det = optimize_snr(params)
            rows.append({
                "P": P,
                "tau_opt_ms": s_to_ms(det.tau_opt),
                "dt_opt_ms": s_to_ms(det.dt_opt),
                "snr_opt": det.snr_opt,
                "m_opt": det.m_opt,
            })
            target = TABLE1.get(P)
            if target and self._reference_setting():
                self.checks.append(_relative_check(f"fig5_P{P}_snr", det.snr_opt, target["snr"], TOL_TABLE1_RELATIVE))

        frame = pd.DataFrame(rows).sort_values("P")
        self.report.emit_plot_data(
            frame[["P", "tau_opt_ms", "dt_opt_ms", "snr_opt"]], "fig5_psweep", title="Óptimos en función de P",
            columns={"tau_opt_ms": "ms", "dt_opt_ms": "ms", "snr_opt": "adimensional"},
        )
        snrs = frame["snr_opt"].to_numpy()
        worst = float(np.max(np.diff(snrs))) if snrs.size > 1 else 0.0
        self.checks.append(CheckResult(
            "fig5_snr_non_increasing", worst <= 1e-9 * float(snrs.max()), worst, 0.0, 1e-9,
            "máximo incremento de SNR entre P consecutivos",
        ))
        return {"rows": rows}

    # --------------------------------------------------------
    # Pesos graduados
    # --------------------------------------------------------
    def _fig7_graded(self) -> dict[str, Any]:
        o = self.spec.overrides
        tau = o.get("tau", FIG7_TAU)
        N = int(o.get("N", DEFAULT_N))
        f_values = [o["f"]] if "f" in o else list(FIG7_F_VALUES)
        rows = []

        for f in f_values:
            profile = optimize_graded_weights(GRADED_N, tau, f, N)
            w = np.asarray(profile.weights)
            dts = np.asarray(profile.dt_windows)
            reference = exponential_reference(dts, tau)
            start = np.concatenate(([0.0], np.cumsum(dts)[:-1]))
            self.report.emit_plot_data(
                pd.DataFrame({
                    "window": np.arange(1, GRADED_N + 1),
                    "time_before_end_ms": s_to_ms(1.0) * start,
                    "dt_ms": s_to_ms(1.0) * dts,
                    "weight": w,
                    "exp_reference": reference,
                }),
                f"fig7_weights_f{f:g}", title=f"Pesos graduados óptimos (f={f:g} Hz)",
                columns={"time_before_end_ms": "ms", "dt_ms": "ms", "weight": "[0, 1]"},
            )
            gain_target = GRADED_GAIN_TARGETS.get(float(f))
            rows.append({
                "f_hz": f,
                "snr_graded": profile.snr,
                "snr_binary": profile.binary_snr,
                "snr_binary_free": profile.binary_snr_free,
                "gain": profile.gain_vs_binary,
                "gain_target": gain_target if gain_target is not None else np.nan,
                "max_deviation_exp": float(np.max(np.abs(w - reference))),
                "iterations": profile.iterations,
            })
            self.checks.append(CheckResult(
                f"fig7_f{f:g}_gain_non_negative", profile.gain_vs_binary >= 0,
                profile.gain_vs_binary, 0.0, 0.0, "ganancia sobre el mejor escalón",
            ))
            if gain_target is not None and "tau" not in o and "N" not in o:
                self.checks.append(CheckResult(
                    f"fig7_f{f:g}_gain", abs(profile.gain_vs_binary - gain_target) <= TOL_GRADED_GAIN,
                    profile.gain_vs_binary, gain_target, TOL_GRADED_GAIN,
                    f"ganancia {100 * profile.gain_vs_binary:.2f}%",
                ))

            # Gradiente analítico vs diferencias finitas centrales en un punto interior
            w_check = np.clip(0.9 * reference, 0.0, 1.0)
            w_check[0] = 1.0
            grad = graded_snr_gradient(w_check, dts, tau, f, N)
            h = 1e-6
            fd = np.empty_like(grad)
            for i in range(w_check.size):
                up, down = w_check.copy(), w_check.copy()
                up[i] += h
                down[i] -= h
                fd[i] = (graded_snr_from_weights(up, dts, tau, f, N)
                         - graded_snr_from_weights(down, dts, tau, f, N)) / (2 * h)
            rel = float(np.max(np.abs(grad - fd)) / np.max(np.abs(grad)))
            self.checks.append(CheckResult(
                f"fig7_f{f:g}_gradient", rel <= TOL_GRADIENT_RELATIVE, rel, 0.0, TOL_GRADIENT_RELATIVE,
                "gradiente analítico vs diferencias finitas",
            ))

        self.report.emit_plot_data(
            pd.DataFrame(rows), "fig7_gains", title="Ganancia de pesos graduados",
            columns={"gain": "fracción", "max_deviation_exp": "adimensional"},
        )
        return {"n": GRADED_N, "tau": tau, "rows": rows}
