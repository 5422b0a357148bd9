"""Aprendizaje STDP no supervisado con umbral adaptativo.

Una neurona LIF con pesos plásticos recibe P patrones presentados
alternadamente en ruido Poisson. En cada spike postsináptico:

- el umbral salta 1.8·θ₀ y luego decae hacia θ₀ con τ_θ;
- el potencial vuelve a 0;
- todos los pesos se actualizan con w ← w + w(1 − w)(A_pre + w_out).

Las trazas presinápticas se guardan como (valor, último tiempo) y se
decaen bajo demanda, de modo que un spike de entrada cuesta O(1) y solo
el spike postsináptico recorre las N sinapsis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product
from typing import Optional, Sequence

import numpy as np
from numba import jit

from config.settings import (
    CONVERGENCE_SAMPLE_INTERVAL,
    CONVERGENCE_STABLE_TIME,
    CONVERGENCE_THRESHOLD,
    CYCLES_PER_CHUNK,
    EVALUATION_PRESENTATIONS,
    GRID_RATIO,
    GRID_SPAN,
    LEARNED_WEIGHT,
    MAX_LEARNING_TIME,
    OPTIMAL_M_MARGIN,
    POTENTIATED_THRESHOLD,
    PRESENTATION_INTERVAL,
    SUBSECTION_MIN_FRACTION,
)
from controllers.analytic_controller import dt_from_m
from controllers.simulation_controller import (
    generate_patterns,
    iter_presentation_chunks,
    select_afferents,
)
from models.learning import GridCell, GridSearchResult, LearningOutcome, StdpConfig
from models.params import ProblemParams
from models.results import TrialProtocol
from models.spikes import Pattern
from utils.exceptions import (
    ConstraintViolationError,
    InfeasibleInitializationError,
    NotConvergedError,
)
from utils.logger import get_logger
from utils.rng import Purpose, RngStream
from utils.workers import run_parallel

logger = get_logger("controllers.stdp")


# ============================================================
# ESTADO Y KERNELS
# ============================================================
@dataclass
class PlasticLifState:
    """Estado de la neurona plástica.

    ``theta`` es el valor del umbral en ``theta_time``; entre spikes
    postsinápticos decae hacia θ₀.
    """

    v: float
    v_time: float
    theta: float
    theta_time: float
    weights: np.ndarray
    traces: np.ndarray
    trace_times: np.ndarray

    @classmethod
    def initial(cls, n_afferents: int, w_init: float, theta0: float) -> PlasticLifState:
        return cls(
            v=0.0,
            v_time=0.0,
            theta=theta0,
            theta_time=0.0,
            weights=np.full(n_afferents, float(w_init)),
            traces=np.zeros(n_afferents),
            trace_times=np.zeros(n_afferents),
        )

    def threshold_at(self, t: float, config: StdpConfig) -> float:
        """θ(t) = θ₀ + (θ − θ₀)·e^(−(t − t_θ)/τ_θ)."""
        return config.theta0 + (self.theta - config.theta0) * math.exp(
            -(t - self.theta_time) / config.tau_theta
        )

    def copy(self) -> PlasticLifState:
        return replace(
            self,
            weights=self.weights.copy(),
            traces=self.traces.copy(),
            trace_times=self.trace_times.copy(),
        )


@jit(nopython=True)
def _ltp_ltd_inplace(weights, traces, w_out):
    for j in range(weights.size):
        w = weights[j]
        w = w + w * (1.0 - w) * (traces[j] + w_out)
        if w < 0.0:
            w = 0.0
        elif w > 1.0:
            w = 1.0
        weights[j] = w


@jit(nopython=True)
def _plastic_kernel(
    afferents, times, weights, traces, trace_times, scalars,
    theta0, theta_jump, tau, tau_theta, delta_a, tau_pre, w_out,
    plastic, spikes_out, record_v, v_out,
):
    v = scalars[0]
    v_time = scalars[1]
    theta_s = scalars[2]
    theta_time = scalars[3]
    decayed = np.empty(weights.size)
    n_spikes = 0

    for k in range(times.size):
        t = times[k]
        i = afferents[k]
        v = v * math.exp(-(t - v_time) / tau)
        v_time = t
        traces[i] = traces[i] * math.exp(-(t - trace_times[i]) / tau_pre) + delta_a
        trace_times[i] = t
        v += weights[i]

        theta = theta0 + (theta_s - theta0) * math.exp(-(t - theta_time) / tau_theta)
        if v >= theta:
            spikes_out[n_spikes] = t
            n_spikes += 1
            if plastic:
                for j in range(weights.size):
                    decayed[j] = traces[j] * math.exp(-(t - trace_times[j]) / tau_pre)
                _ltp_ltd_inplace(weights, decayed, w_out)
            v = 0.0
            theta_s = theta + theta_jump
            theta_time = t
        if record_v:
            v_out[k] = v

    scalars[0] = v
    scalars[1] = v_time
    scalars[2] = theta_s
    scalars[3] = theta_time
    return n_spikes


def step_plastic_lif(
    state: PlasticLifState,
    afferents: np.ndarray,
    times: np.ndarray,
    config: StdpConfig,
    tau: float,
    *,
    plastic: bool = True,
    record_v: bool = False,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Avanza la neurona sobre un bloque ordenado de spikes de entrada.

    El estado se actualiza en el lugar.

    Args:
        state: Estado de la neurona (se modifica).
        afferents: Aferente de cada evento.
        times: Tiempo de cada evento (no decreciente, ≥ tiempos del estado).
        config: Constantes de plasticidad y umbral.
        tau: Constante de membrana (s).
        plastic: Si False, los pesos quedan congelados.
        record_v: Si True, retorna V justo después de cada evento.

    Returns:
        (tiempos de spikes postsinápticos, V por evento o None).
    """
    times = np.ascontiguousarray(times, dtype=np.float64)
    afferents = np.ascontiguousarray(afferents, dtype=np.int64)
    scalars = np.array([state.v, state.v_time, state.theta, state.theta_time])
    spikes = np.empty(times.size)
    v_out = np.empty(times.size if record_v else 0)

    n = _plastic_kernel(
        afferents, times, state.weights, state.traces, state.trace_times, scalars,
        config.theta0, config.theta_jump, tau, config.tau_theta,
        config.delta_a_pre, config.tau_pre, config.w_out,
        plastic, spikes, record_v, v_out,
    )
    state.v, state.v_time, state.theta, state.theta_time = (float(x) for x in scalars)
    return spikes[:n].copy(), (v_out if record_v else None)


def apply_ltp_ltd(weights: np.ndarray, traces: np.ndarray, config: StdpConfig) -> np.ndarray:
    """Actualización combinada w ← clamp(w + w(1 − w)(A_pre + w_out), 0, 1).

    Returns:
        Nuevo arreglo de pesos (la entrada no se modifica).
    """
    out = np.array(weights, dtype=np.float64, copy=True)
    _ltp_ltd_inplace(out, np.asarray(traces, dtype=np.float64), config.w_out)
    return out


def initial_weight(params: ProblemParams, config: StdpConfig, tau: float) -> float:
    """Peso uniforme inicial con V̄_noise = θ₀ + σ_noise.

    Resuelve τfNw = θ₀ + √(τfNw²/2), lineal en w.

    Raises:
        InfeasibleInitializationError: Si la solución sale de (0, 1].
    """
    if config.w_init is not None:
        return config.w_init
    x = tau * params.f * params.N
    denom = x - math.sqrt(x / 2.0)
    if denom <= 0:
        raise InfeasibleInitializationError(
            f"τfN={x:.4g} demasiado chico: V̄_noise no puede superar al umbral"
        )
    w = config.theta0 / denom
    residual = x * w - math.sqrt(x * w * w / 2.0) - config.theta0
    if not (0 < w <= 1) or abs(residual) > 1e-9 * max(1.0, config.theta0):
        raise InfeasibleInitializationError(f"Peso inicial {w:.4g} fuera de (0, 1]")
    return w


# ============================================================
# MÉTRICAS
# ============================================================
def convergence_index(weights: np.ndarray) -> float:
    """Distancia media entre los pesos y su cuantización binaria (umbral 0.5)."""
    w = np.asarray(weights, dtype=np.float64)
    return float(np.mean(np.abs(w - (w >= POTENTIATED_THRESHOLD))))


def leading_subsection(pattern: Pattern, weights: np.ndarray) -> float:
    """Duración de la subsección inicial del patrón cuyos spikes tienen todos
    peso aprendido (w ≥ LEARNED_WEIGHT).

    La subsección arranca en el inicio del patrón y llega hasta el último
    spike de la racha que empieza en su primer spike; 0 si ese primer spike
    no está aprendido.
    """
    learned = np.asarray(weights)[pattern.afferents] >= LEARNED_WEIGHT
    if learned.size == 0 or not learned[0]:
        return 0.0
    broken = np.flatnonzero(~learned)
    last = (broken[0] if broken.size else learned.size) - 1
    return float(pattern.times[last])


def prefix_explained_fraction(
    patterns: Sequence[Pattern], weights: np.ndarray, window: float,
) -> float:
    """Fracción de aferentes potenciados que disparan en [0, window) de algún patrón."""
    potentiated = np.asarray(weights) >= POTENTIATED_THRESHOLD
    if not potentiated.any():
        return 0.0
    early = select_afferents(patterns, window)
    return float((potentiated & early).sum() / potentiated.sum())


@dataclass
class DetectorEvaluation:
    """Resultado de la fase de evaluación con pesos congelados."""

    hit_rate: float
    false_alarm_rate: float
    pattern_hit_rates: list[float]
    spikes: int

    @property
    def learned(self) -> int:
        return sum(1 for h in self.pattern_hit_rates if h > 0)


def evaluate_detector(
    patterns: Sequence[Pattern],
    protocol: TrialProtocol,
    state: PlasticLifState,
    config: StdpConfig,
    tau: float,
    rng: RngStream,
    *,
    first_cycle: int,
    n_cycles: int,
) -> DetectorEvaluation:
    """Presenta ``n_cycles`` ciclos con pesos congelados y mide aciertos.

    Una presentación es un acierto si hay al menos un spike en
    [onset − T, onset + L + T]. Las falsas alarmas son spikes fuera de
    esas ventanas por segundo de tiempo fuera de ellas.
    """
    params = protocol.params
    L, T = params.L, params.T
    frozen = state.copy()
    hits: list[np.ndarray] = []
    pattern_ids: list[np.ndarray] = []
    false_alarms = 0
    outside_time = 0.0
    total_spikes = 0

    for chunk in iter_presentation_chunks(
        patterns, protocol, rng, n_cycles=n_cycles, first_cycle=first_cycle,
    ):
        spikes, _ = step_plastic_lif(frozen, chunk.afferents, chunk.times, config, tau, plastic=False)
        starts, ends = chunk.onsets - T, chunk.onsets + L + T
        lo = np.searchsorted(spikes, starts, side="left")
        hi = np.searchsorted(spikes, ends, side="right")
        inside = hi - lo
        hits.append(inside > 0)
        pattern_ids.append(chunk.pattern_ids)
        false_alarms += spikes.size - int(inside.sum())
        outside_time += (chunk.t_end - chunk.t_start) - float(np.sum(ends - starts))
        total_spikes += spikes.size

    hit = np.concatenate(hits) if hits else np.empty(0, bool)
    ids = np.concatenate(pattern_ids) if pattern_ids else np.empty(0, int)
    per_pattern = [float(hit[ids == k].mean()) if np.any(ids == k) else 0.0 for k in range(params.P)]
    return DetectorEvaluation(
        hit_rate=float(hit.mean()) if hit.size else 0.0,
        false_alarm_rate=false_alarms / outside_time if outside_time > 0 else 0.0,
        pattern_hit_rates=per_pattern,
        spikes=total_spikes,
    )


def is_optimal(outcome: LearningOutcome, params: ProblemParams, m_opt: float) -> bool:
    """Criterios de optimalidad de una corrida convergida.

    1. Todos los patrones dispararon al menos una vez en la evaluación.
    2. |potenciados − M_opt| ≤ 5 %·M_opt.
    3. Cada patrón tiene una subsección inicial aprendida (w ≈ 1) de al menos
       la mitad de Δt_opt (Δt_opt = inversa de ⟨M⟩ en M_opt).

    Raises:
        NotConvergedError: Si el índice de convergencia es ≥ 0.01.
    """
    if outcome.convergence_index >= CONVERGENCE_THRESHOLD:
        raise NotConvergedError(index=outcome.convergence_index)
    if outcome.learned_pattern_count < params.P:
        return False
    if abs(outcome.potentiated_count - m_opt) > OPTIMAL_M_MARGIN * m_opt:
        return False
    dt_opt = dt_from_m(params, m_opt)
    if len(outcome.leading_subsections) < params.P:
        return False
    return all(span >= SUBSECTION_MIN_FRACTION * dt_opt for span in outcome.leading_subsections)


# ============================================================
# CORRIDA DE APRENDIZAJE
# ============================================================
def run_learning(
    params: ProblemParams,
    tau: float,
    config: StdpConfig,
    duration: float,
    rng: RngStream,
    *,
    m_opt: Optional[float] = None,
    early_stop: bool = True,
    evaluation_presentations: int = EVALUATION_PRESENTATIONS,
    interval: float = PRESENTATION_INTERVAL,
) -> LearningOutcome:
    """Aprendizaje STDP seguido de una evaluación con pesos congelados.

    El aprendizaje avanza por bloques de 25 ciclos (10 s con I = 400 ms);
    al final de cada bloque se registra el índice de convergencia. Con
    ``early_stop`` la corrida termina cuando el índice se mantiene bajo
    0.01 durante 500 s. Luego se presentan ``evaluation_presentations``
    veces cada patrón sin plasticidad.

    Args:
        params: Parámetros del problema (L finito).
        tau: Constante de membrana (s).
        config: Constantes de plasticidad.
        duration: Tiempo máximo de aprendizaje (s).
        rng: Flujo de la corrida.
        m_opt: M óptimo teórico; si se indica se evalúa ``is_optimal``.
        early_stop: Corte adaptativo por convergencia.
        evaluation_presentations: Presentaciones por patrón en la evaluación.
        interval: Intervalo entre presentaciones (s).

    Returns:
        LearningOutcome de la corrida.
    """
    if duration < 0:
        raise ConstraintViolationError("la duración no puede ser negativa", "duration")
    protocol = TrialProtocol(
        params=params, presentations_per_pattern=1,
        inter_presentation_interval=interval, engine="event",
    )
    patterns = generate_patterns(params, rng)
    w0 = initial_weight(params, config, tau)
    state = PlasticLifState.initial(params.N, w0, config.theta0)

    chunk_time = CYCLES_PER_CHUNK * interval
    n_chunks = math.ceil(duration / chunk_time - 1e-9) if duration > 0 else 0
    trace: list[tuple[float, float]] = [(0.0, convergence_index(state.weights))]
    stable_since: Optional[float] = None
    learning_spikes = 0
    elapsed = 0.0
    chunks_done = 0

    logger.debug("Aprendizaje P=%d θ₀=%.4g w_out=%.4g w₀=%.4f", params.P, config.theta0, config.w_out, w0)
    for chunk in iter_presentation_chunks(
        patterns, protocol, rng, n_cycles=n_chunks * CYCLES_PER_CHUNK,
    ):
        spikes, _ = step_plastic_lif(state, chunk.afferents, chunk.times, config, tau)
        learning_spikes += spikes.size
        chunks_done += 1
        elapsed = chunk.t_end
        index = convergence_index(state.weights)
        if elapsed - trace[-1][0] >= CONVERGENCE_SAMPLE_INTERVAL - 1e-9:
            trace.append((elapsed, index))

        if early_stop:
            if index < CONVERGENCE_THRESHOLD:
                stable_since = elapsed if stable_since is None else stable_since
                if elapsed - stable_since >= CONVERGENCE_STABLE_TIME:
                    logger.debug("Convergencia estable a t=%.0fs", elapsed)
                    break
            else:
                stable_since = None

    evaluation = evaluate_detector(
        patterns, protocol, state, config, tau, rng,
        first_cycle=chunks_done * CYCLES_PER_CHUNK,
        n_cycles=evaluation_presentations * params.P,
    )

    dt_ref = None
    potentiated = int(np.sum(state.weights >= POTENTIATED_THRESHOLD))
    m_ref = m_opt if m_opt is not None else potentiated
    if 0 <= m_ref < params.N:
        dt_ref = dt_from_m(params, m_ref)

    outcome = LearningOutcome(
        final_weights=state.weights.copy(),
        learned_pattern_count=evaluation.learned,
        hit_rate=evaluation.hit_rate,
        false_alarm_rate=evaluation.false_alarm_rate,
        potentiated_count=potentiated,
        convergence_index=convergence_index(state.weights),
        learning_time=elapsed,
        pattern_hit_rates=evaluation.pattern_hit_rates,
        leading_subsections=[leading_subsection(p, state.weights) for p in patterns],
        prefix_fraction=prefix_explained_fraction(patterns, state.weights, 2 * dt_ref) if dt_ref else 0.0,
        initial_weight=w0,
        postsynaptic_spikes=learning_spikes,
        convergence_trace=trace,
    )
    if m_opt is not None:
        try:
            outcome.optimal = is_optimal(outcome, params, m_opt)
        except NotConvergedError as e:
            logger.debug("Corrida no convergida: %s", e.message)
            outcome.optimal = False

    logger.info(
        "Aprendizaje P=%d: %.0fs, aprendidos %d/%d, aciertos %.1f%%, FA %.3gHz, M=%d, óptimo=%s",
        params.P, elapsed, outcome.learned_pattern_count, params.P, 100 * outcome.hit_rate,
        outcome.false_alarm_rate, potentiated, outcome.optimal,
    )
    return outcome


# ============================================================
# BÚSQUEDA EN GRILLA
# ============================================================
def geometric_range(
    center: float,
    ratio: float = GRID_RATIO,
    span: float = GRID_SPAN,
    *,
    max_steps: Optional[int] = None,
) -> list[float]:
    """Progresión geométrica de razón (1 + ratio) alrededor de ``center``.

    Incluye los valores dentro de [|c|(1 − span), |c|(1 + span)]
    conservando el signo de ``center``; ``max_steps`` acota la cantidad
    de pasos a cada lado.
    """
    if center == 0 or ratio <= 0 or not (0 < span < 1):
        raise ConstraintViolationError("se requiere centro ≠ 0, ratio > 0 y span en (0, 1)", "grid")
    log_r = math.log1p(ratio)
    up = int(math.floor(math.log1p(span) / log_r + 1e-12))
    down = int(math.floor(-math.log1p(-span) / log_r + 1e-12))
    if max_steps is not None:
        up, down = min(up, max_steps), min(down, max_steps)
    return [center * (1 + ratio) ** k for k in range(-down, up + 1)]


def _learning_job(
    params: ProblemParams,
    tau: float,
    config: StdpConfig,
    duration: float,
    rng: RngStream,
    m_opt: Optional[float],
) -> LearningOutcome:
    return run_learning(params, tau, config, duration, rng, m_opt=m_opt)


def grid_search(
    params: ProblemParams,
    tau: float,
    theta0_range: Sequence[float],
    w_out_range: Sequence[float],
    trials_per_cell: int,
    rng: RngStream,
    *,
    m_opt: Optional[float] = None,
    duration: float = MAX_LEARNING_TIME,
    base_config: Optional[StdpConfig] = None,
    workers: int = 1,
) -> GridSearchResult:
    """Evalúa ``run_learning`` sobre la grilla θ₀ × w_out.

    Todas las celdas usan los mismos sub-flujos por ensayo, de modo que
    las comparaciones entre celdas son pareadas.

    Returns:
        GridSearchResult con estadísticas por celda y la mejor celda.
    """
    if not theta0_range or not w_out_range or trials_per_cell < 1:
        raise ConstraintViolationError("grilla vacía o sin ensayos", "grid")
    cells = list(product(theta0_range, w_out_range))
    jobs = []
    for theta0, w_out in cells:
        if base_config is None:
            config = StdpConfig(theta0=theta0, w_out=w_out)
        else:
            config = base_config.model_copy(update={"theta0": theta0, "w_out": w_out})
        for t in range(trials_per_cell):
            jobs.append((params, tau, config, duration, rng.spawn(Purpose.TRIAL, t), m_opt))

    logger.info("Búsqueda en grilla: %d celdas × %d ensayos", len(cells), trials_per_cell)
    outcomes = run_parallel(_learning_job, jobs, workers, label="grilla STDP")

    results: list[GridCell] = []
    for c, (theta0, w_out) in enumerate(cells):
        runs = outcomes[c * trials_per_cell:(c + 1) * trials_per_cell]
        results.append(GridCell(
            theta0=theta0,
            w_out=w_out,
            runs=len(runs),
            p_opt=float(np.mean([o.optimal for o in runs])),
            mean_learned=float(np.mean([o.learned_pattern_count for o in runs])),
            mean_hit_rate=float(np.mean([o.hit_rate for o in runs])),
            mean_false_alarm=float(np.mean([o.false_alarm_rate for o in runs])),
        ))
    best_idx = max(
        range(len(results)),
        key=lambda i: (results[i].p_opt, results[i].mean_learned, results[i].mean_hit_rate),
    )
    best = results[best_idx]
    logger.info(
        "Mejor celda: θ₀=%.4g w_out=%.4g P(opt)=%.0f%% aprendidos=%.2f",
        best.theta0, best.w_out, 100 * best.p_opt, best.mean_learned,
    )
    return GridSearchResult(
        cells=results,
        best=best,
        best_outcomes=outcomes[best_idx * trials_per_cell:(best_idx + 1) * trials_per_cell],
    )
