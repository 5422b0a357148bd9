"""Simulación del LIF no plástico y medición empírica de la SNR.

Genera patrones Poisson congelados, los presenta alternadamente cada
``inter_presentation_interval`` con jitter uniforme y ruido Poisson de
fondo entre presentaciones, e integra el LIF con dos motores:

- ``clock``: Euler explícito con paso fijo (filtro IIR de scipy).
- ``event``: decaimiento exponencial exacto entre eventos (kernel numba).

La simulación se procesa por bloques de ciclos para acotar la memoria;
el estado del potencial se arrastra entre bloques.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd
from numba import jit
from scipy.signal import lfilter

from config.settings import (
    CSV_FLOAT_FORMAT,
    CYCLES_PER_CHUNK,
    MIN_NOISE_TAUS,
    NOISE_GUARD_TAUS,
)
from controllers.analytic_controller import reduced_snr, snr
from models.params import DetectorConfig, ProblemParams, validate
from models.results import AveragingReport, EmpiricalSnr, TrialProtocol
from models.spikes import Pattern, SpikeStream
from utils.exceptions import (
    ConstraintViolationError,
    DegenerateError,
    InsufficientNoiseError,
)
from utils.logger import get_logger
from utils.rng import Purpose, RngStream, master_stream
from utils.workers import run_parallel

logger = get_logger("controllers.simulation")


# ============================================================
# GENERACIÓN DE ENTRADAS
# ============================================================
def generate_pattern(params: ProblemParams, rng: RngStream, pattern_id: int = 0) -> Pattern:
    """Realización Poisson homogénea a tasa f sobre [0, L] para los N aferentes.

    La cantidad de spikes por aferente es Poisson(f·L) y, condicionada a
    ella, los tiempos son uniformes: misma ley que los intervalos
    exponenciales.

    Raises:
        ConstraintViolationError: Si L no es finito.
    """
    if not params.bounded:
        raise ConstraintViolationError("se requiere L finito para generar patrones", "L")
    gen = rng.generator
    counts = gen.poisson(params.f * params.L, size=params.N)
    afferents = np.repeat(np.arange(params.N, dtype=np.int64), counts)
    times = gen.uniform(0.0, params.L, size=afferents.size)
    order = np.argsort(times, kind="stable")
    return Pattern(afferents[order], times[order], params.L, params.N, pattern_id)


def generate_patterns(params: ProblemParams, rng: RngStream) -> list[Pattern]:
    """Los P patrones del problema, uno por sub-flujo ``PATTERN``."""
    return [generate_pattern(params, rng.spawn(Purpose.PATTERN, k), k) for k in range(params.P)]


def jitter(pattern: Pattern, T: float, rng: RngStream) -> SpikeStream:
    """Desplaza cada spike por una uniforme independiente en [−T, T].

    El origen del resultado se corre en T para que todos los tiempos
    queden en [0, L + 2T]; con T = 0 el flujo es idéntico al patrón.
    """
    if T < 0:
        raise ConstraintViolationError("T no puede ser negativo", "T")
    if T == 0:
        return SpikeStream(pattern.afferents, pattern.times, pattern.duration, pattern.n_afferents)
    shifted = pattern.times + T + rng.generator.uniform(-T, T, size=len(pattern))
    return SpikeStream.from_unsorted(
        pattern.afferents, shifted, pattern.duration + 2 * T, pattern.n_afferents,
    )


def select_afferents(patterns: Sequence[Pattern], dt_window: float) -> np.ndarray:
    """Máscara de aferentes que disparan en [0, Δt) de al menos un patrón."""
    if not patterns:
        raise ConstraintViolationError("se requiere al menos un patrón", "patterns")
    mask = np.zeros(patterns[0].n_afferents, dtype=bool)
    for pattern in patterns:
        mask[pattern.afferents[pattern.times < dt_window]] = True
    return mask


@dataclass
class PresentationChunk:
    """Bloque de ciclos consecutivos: eventos ordenados y presentaciones."""

    afferents: np.ndarray
    times: np.ndarray
    t_start: float
    t_end: float
    cycles: np.ndarray
    pattern_ids: np.ndarray
    onsets: np.ndarray


def iter_presentation_chunks(
    patterns: Sequence[Pattern],
    protocol: TrialProtocol,
    rng: RngStream,
    *,
    n_cycles: int,
    first_cycle: int = 0,
    afferent_filter: Optional[np.ndarray] = None,
    cycles_per_chunk: int = CYCLES_PER_CHUNK,
) -> Iterator[PresentationChunk]:
    """Genera bloques de presentaciones alternadas con ruido de fondo.

    El ciclo c dura I (intervalo entre presentaciones) y presenta el
    patrón c mod P a partir de c·I + (I − L)/2. El resto del ciclo es
    ruido Poisson a tasa f. El bloque j usa los sub-flujos
    ``PRESENTATION``/``BACKGROUND`` de índice j global, de modo que un
    mismo ciclo se reproduce igual sin importar cómo se particione la corrida.

    Args:
        patterns: Patrones congelados.
        protocol: Protocolo de presentación.
        rng: Flujo de la corrida.
        n_cycles: Ciclos a generar.
        first_cycle: Primer ciclo (múltiplo de ``cycles_per_chunk``).
        afferent_filter: Si se indica, solo se generan eventos de esos aferentes.
        cycles_per_chunk: Ciclos por bloque.
    """
    params = protocol.params
    I, L, T, f = protocol.inter_presentation_interval, params.L, params.T, params.f
    if first_cycle % cycles_per_chunk:
        raise ConstraintViolationError("first_cycle debe alinearse con los bloques", "first_cycle")

    if afferent_filter is not None:
        keep = np.asarray(afferent_filter, dtype=bool)
        allowed = np.flatnonzero(keep)
        sources = [p.select(keep) for p in patterns]
    else:
        allowed = None
        sources = list(patterns)
    n_sources = params.N if allowed is None else allowed.size
    gap = I - L

    end_cycle = first_cycle + n_cycles
    for c0 in range(first_cycle, end_cycle, cycles_per_chunk):
        c1 = min(c0 + cycles_per_chunk, end_cycle)
        chunk_id = c0 // cycles_per_chunk
        gen_p = rng.spawn(Purpose.PRESENTATION, chunk_id).generator
        gen_b = rng.spawn(Purpose.BACKGROUND, chunk_id).generator

        cycles = np.arange(c0, c1)
        pattern_ids = cycles % len(sources)
        onsets = cycles * I + gap / 2

        parts_a, parts_t = [], []
        for k, onset in zip(pattern_ids, onsets):
            src = sources[k]
            times = src.times + onset
            if T > 0:
                times = times + gen_p.uniform(-T, T, size=times.size)
            parts_a.append(src.afferents)
            parts_t.append(times)

        # Ruido de fondo en los huecos entre presentaciones
        n_bg = gen_b.poisson(f * n_sources * gap * cycles.size) if n_sources else 0
        u = gen_b.uniform(0.0, gap * cycles.size, size=n_bg)
        cyc = np.floor(u / gap)
        within = u - cyc * gap
        bg_times = (c0 + cyc) * I + within + np.where(within >= gap / 2, L, 0.0)
        bg_aff = gen_b.integers(0, n_sources, size=n_bg) if n_sources else np.empty(0, np.int64)
        if allowed is not None:
            bg_aff = allowed[bg_aff]
        parts_a.append(bg_aff.astype(np.int64))
        parts_t.append(bg_times)

        afferents = np.concatenate(parts_a)
        times = np.concatenate(parts_t)
        order = np.argsort(times, kind="stable")
        yield PresentationChunk(
            afferents=afferents[order],
            times=times[order],
            t_start=c0 * I,
            t_end=c1 * I,
            cycles=cycles,
            pattern_ids=pattern_ids,
            onsets=onsets,
        )


def build_presentation_stream(
    patterns: Sequence[Pattern],
    protocol: TrialProtocol,
    rng: RngStream,
    *,
    afferent_filter: Optional[np.ndarray] = None,
) -> tuple[SpikeStream, pd.DataFrame]:
    """Flujo completo del protocolo y su tabla de presentaciones.

    Returns:
        (SpikeStream, DataFrame con columnas ``cycle,pattern_id,onset_s``).
    """
    chunks = list(iter_presentation_chunks(
        patterns, protocol, rng,
        n_cycles=protocol.n_presentations, afferent_filter=afferent_filter,
    ))
    params = protocol.params
    duration = protocol.n_presentations * protocol.inter_presentation_interval
    stream = SpikeStream(
        np.concatenate([c.afferents for c in chunks]),
        np.concatenate([c.times for c in chunks]),
        duration,
        params.N,
    )
    table = pd.DataFrame({
        "cycle": np.concatenate([c.cycles for c in chunks]),
        "pattern_id": np.concatenate([c.pattern_ids for c in chunks]),
        "onset_s": np.concatenate([c.onsets for c in chunks]),
    })
    return stream, table


# ============================================================
# INTEGRACIÓN DEL LIF
# ============================================================
@jit(nopython=True)
def _event_kernel(times, jumps, tau, v0, t0, out):
    v = v0
    t_prev = t0
    for k in range(times.size):
        v = v * math.exp(-(times[k] - t_prev) / tau) + jumps[k]
        t_prev = times[k]
        out[k] = v
    return v, t_prev


@dataclass
class LifTrace:
    """Traza del potencial.

    ``clock``: valores al final de cada paso. ``event``: valores justo
    después de cada evento de entrada (peso > 0).
    """

    engine: str
    tau: float
    times: np.ndarray
    values: np.ndarray
    t_start: float
    v_start: float
    t_end: float

    @property
    def v_end(self) -> float:
        return float(potential_at(self, self.t_end))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time_s": self.times, "V": self.values})


def _check_weights(weights: np.ndarray) -> None:
    if np.any(weights < 0) or np.any(weights > 1):
        raise ConstraintViolationError("los pesos deben estar en [0, 1]", "weights")


def _integrate(
    afferents: np.ndarray,
    times: np.ndarray,
    weights: np.ndarray,
    tau: float,
    engine: str,
    step: float,
    t_start: float,
    t_end: float,
    v0: float,
) -> LifTrace:
    jumps = weights[afferents]
    if engine == "clock":
        n_bins = max(1, int(round((t_end - t_start) / step)))
        idx = np.clip(np.floor((times - t_start) / step).astype(np.int64), 0, n_bins - 1)
        x = np.bincount(idx, weights=jumps, minlength=n_bins)
        q = 1.0 - step / tau
        values, _ = lfilter([1.0], [1.0, -q], x, zi=[q * v0])
        grid = t_start + (np.arange(n_bins) + 1) * step
        return LifTrace("clock", tau, grid, values, t_start, v0, t_end)

    if engine == "event":
        keep = jumps > 0
        ev_times = np.ascontiguousarray(times[keep], dtype=np.float64)
        ev_jumps = np.ascontiguousarray(jumps[keep], dtype=np.float64)
        values = np.empty(ev_times.size)
        _event_kernel(ev_times, ev_jumps, tau, float(v0), float(t_start), values)
        return LifTrace("event", tau, ev_times, values, t_start, v0, t_end)

    raise ConstraintViolationError(f"motor desconocido '{engine}'", "engine")


def integrate_lif(
    stream: SpikeStream,
    weights: np.ndarray,
    tau: float,
    *,
    engine: str = "clock",
    step: float = 1e-4,
    t_start: float = 0.0,
    t_end: Optional[float] = None,
    v0: float = 0.0,
) -> LifTrace:
    """Integra τ·dV/dt = −V + τ·Σ w_i δ(t − t_ij) sobre un flujo.

    Cada spike de peso w suma w al potencial.

    Args:
        stream: Flujo de entrada.
        weights: Peso por aferente en [0, 1] (máscara binaria o graduado).
        tau: Constante de membrana (s).
        engine: ``clock`` (Euler, paso ``step``) o ``event`` (exacto).
        step: Paso de integración del motor ``clock``.
        t_start: Tiempo del valor inicial ``v0``.
        t_end: Fin de la integración (por defecto la duración del flujo).
        v0: Potencial en ``t_start``.

    Returns:
        LifTrace del intervalo.

    Raises:
        ConstraintViolationError: Paso no positivo o inestable, o pesos fuera de [0, 1].
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (stream.n_afferents,):
        raise ConstraintViolationError("se requiere un peso por aferente", "weights")
    _check_weights(w)
    if tau <= 0:
        raise ConstraintViolationError("τ debe ser positivo", "tau")
    if engine == "clock" and (step <= 0 or step >= 2 * tau):
        raise ConstraintViolationError(f"paso {step} inválido para τ={tau}", "step")
    end = stream.duration if t_end is None else t_end
    return _integrate(stream.afferents, stream.times, w, tau, engine, step, t_start, end, v0)


def potential_at(trace: LifTrace, t) -> np.ndarray | float:
    """Potencial en tiempos arbitrarios.

    Motor ``event``: exacto (decaimiento desde el último evento). Motor
    ``clock``: valor del último paso completado.
    """
    t_a = np.asarray(t, dtype=np.float64)
    idx = np.searchsorted(trace.times, t_a, side="right") - 1
    safe = np.clip(idx, 0, max(trace.times.size - 1, 0))
    has = (idx >= 0) & (trace.times.size > 0)
    base_v = np.where(has, trace.values[safe] if trace.values.size else 0.0, trace.v_start)
    if trace.engine == "clock":
        out = base_v
    else:
        base_t = np.where(has, trace.times[safe] if trace.times.size else 0.0, trace.t_start)
        out = base_v * np.exp(-(t_a - base_t) / trace.tau)
    return float(out) if np.ndim(out) == 0 else out


def window_peaks(trace: LifTrace, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Máximo del potencial dentro de cada ventana [start, end]."""
    peaks = np.asarray(potential_at(trace, np.asarray(starts)), dtype=np.float64).reshape(-1)
    lo = np.searchsorted(trace.times, starts, side="left")
    hi = np.searchsorted(trace.times, ends, side="right")
    for k in range(peaks.size):
        if hi[k] > lo[k]:
            peaks[k] = max(peaks[k], float(trace.values[lo[k]:hi[k]].max()))
    return peaks


def _noise_values(trace: LifTrace, segments: list[tuple[float, float]], step: float) -> np.ndarray:
    parts = []
    for a, b in segments:
        if b <= a:
            continue
        if trace.engine == "clock":
            lo = np.searchsorted(trace.times, a, side="left")
            hi = np.searchsorted(trace.times, b, side="right")
            parts.append(trace.values[lo:hi])
        else:
            parts.append(np.asarray(potential_at(trace, np.arange(a, b, step))).reshape(-1))
    return np.concatenate(parts) if parts else np.empty(0)


def _noise_segments(
    cycles: np.ndarray, protocol: TrialProtocol, tau: float,
) -> list[tuple[float, float]]:
    """Tramos de ruido de cada ciclo, a ≥ 5τ del fin de cualquier ventana.

    Se omite el tramo previo a la primera presentación (transitorio desde V = 0).
    """
    I = protocol.inter_presentation_interval
    L, T = protocol.params.L, protocol.params.T
    guard = NOISE_GUARD_TAUS * tau
    half_gap = (I - L) / 2
    segments = []
    for c in cycles:
        onset = c * I + half_gap
        if c > 0:
            prev_end = onset - I + L + T + guard
            segments.append((max(c * I, prev_end), onset - T))
        segments.append((onset + L + T + guard, (c + 1) * I))
    return segments


def _available_noise(protocol: TrialProtocol, tau: float) -> float:
    cycles = np.arange(protocol.n_presentations)
    return sum(max(0.0, b - a) for a, b in _noise_segments(cycles, protocol, tau))


# ============================================================
# SNR EMPÍRICA
# ============================================================
def measure_empirical_snr(
    protocol: TrialProtocol,
    config: DetectorConfig,
    rng: RngStream,
    *,
    weights: Optional[np.ndarray] = None,
    dump_trace: Optional[Path] = None,
) -> EmpiricalSnr:
    """Mide la SNR por simulación según el protocolo.

    V_max es la media, sobre presentaciones, del pico del potencial en
    [onset − T, onset + L + T]. V̄_noise y σ_noise se estiman con muestras
    fuera de las ventanas y al menos 5τ después del fin de cada una.

    Args:
        protocol: Protocolo de presentación.
        config: τ y Δt del detector.
        rng: Flujo de la corrida (patrones, jitter y fondo).
        weights: Pesos por aferente; por defecto la máscara de ``select_afferents``.
        dump_trace: CSV opcional ``time_s,V`` con la traza completa.

    Returns:
        EmpiricalSnr de la corrida.

    Raises:
        InsufficientNoiseError: Menos de 100τ de ruido utilizable.
        DegenerateError: Pesos nulos o potencial de ruido constante.
    """
    params, config = validate(protocol.params, config)
    tau = config.tau

    required = MIN_NOISE_TAUS * tau
    available = _available_noise(protocol, tau)
    if available < required:
        raise InsufficientNoiseError(available=available, required=required)

    patterns = generate_patterns(params, rng)
    if weights is None:
        w = select_afferents(patterns, config.dt_window).astype(np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
        _check_weights(w)
    connected = w > 0
    if not connected.any():
        raise DegenerateError("Todos los pesos son 0: el potencial es idénticamente nulo")

    T, L = params.T, params.L
    v = 0.0
    peaks: list[np.ndarray] = []
    n_noise, s1, s2 = 0, 0.0, 0.0
    header = True
    if dump_trace is not None:
        Path(dump_trace).parent.mkdir(parents=True, exist_ok=True)

    for chunk in iter_presentation_chunks(
        patterns, protocol, rng, n_cycles=protocol.n_presentations, afferent_filter=connected,
    ):
        trace = _integrate(
            chunk.afferents, chunk.times, w, tau, protocol.engine,
            protocol.integration_step, chunk.t_start, chunk.t_end, v,
        )
        v = trace.v_end
        peaks.append(window_peaks(trace, chunk.onsets - T, chunk.onsets + L + T))
        noise = _noise_values(
            trace, _noise_segments(chunk.cycles, protocol, tau), protocol.integration_step,
        )
        n_noise += noise.size
        s1 += float(noise.sum())
        s2 += float(np.dot(noise, noise))
        if dump_trace is not None:
            trace.to_frame().to_csv(
                dump_trace, mode="w" if header else "a", header=header,
                index=False, float_format=CSV_FLOAT_FORMAT,
            )
            header = False

    if n_noise == 0:
        raise InsufficientNoiseError(available=0.0, required=required)
    mean = s1 / n_noise
    std = math.sqrt(max(0.0, s2 / n_noise - mean * mean))
    if std == 0:
        raise DegenerateError("σ_noise = 0: SNR indefinida")
    v_max = float(np.concatenate(peaks).mean())

    result = EmpiricalSnr(
        v_max_mean=v_max,
        v_noise_mean=mean,
        v_noise_std=std,
        snr=(v_max - mean) / std,
        n_presentations=protocol.n_presentations,
        noise_time=available,
        m_connected=int(connected.sum()),
    )
    logger.debug(
        "SNR empírica P=%d: V_max=%.4g, V̄=%.4g, σ=%.4g → %.4g",
        params.P, v_max, mean, std, result.snr,
    )
    return result


def _validation_trial(
    protocol: TrialProtocol, config: DetectorConfig, seed: int, trial: int,
) -> dict:
    rng = master_stream(seed).spawn(Purpose.TRIAL, trial)
    empirical = measure_empirical_snr(protocol, config, rng)
    analytic = snr(protocol.params, config)
    return {
        "trial": trial,
        "params": protocol.params.model_dump(),
        "config": config.model_dump(),
        "empirical_snr": empirical.model_dump(),
        "analytic_snr": analytic.snr,
    }


def run_validation_trials(
    protocol: TrialProtocol,
    config: DetectorConfig,
    n_trials: int,
    seed: int,
    workers: int = 1,
) -> list[dict]:
    """Ensayos independientes (un sub-flujo ``TRIAL`` por ensayo).

    Returns:
        Registros {trial, params, config, empirical_snr, analytic_snr}.
    """
    jobs = [(protocol, config, seed, i) for i in range(n_trials)]
    logger.info(
        "Validación P=%d: %d ensayos × %d presentaciones (%s)",
        protocol.params.P, n_trials, protocol.n_presentations, protocol.engine,
    )
    return run_parallel(_validation_trial, jobs, workers, label=f"ensayos P={protocol.params.P}")


# ============================================================
# PROMEDIO SOBRE REALIZACIONES
# ============================================================
def averaging_validation(
    params: ProblemParams,
    dt_window: float,
    n_realizations: int,
    rng: RngStream,
    *,
    chunk_size: int = 200,
) -> AveragingReport:
    """Distribución de (M, r, snr reducida) sobre realizaciones de patrones.

    Por aferente, la cantidad de spikes en las P subsecciones es
    Poisson(P·f·Δt); M cuenta los aferentes con al menos uno. r es la
    cantidad de spikes en la subsección de un patrón dividida por Δt
    (reparto binomial 1/P del total).

    Args:
        params: Parámetros del problema.
        dt_window: Δt (s).
        n_realizations: Cantidad de realizaciones.
        rng: Flujo de la corrida.
        chunk_size: Realizaciones por bloque.

    Returns:
        AveragingReport con los triples, su media y la aproximación.
    """
    if n_realizations < 1:
        raise ConstraintViolationError("se requiere al menos una realización", "n_realizations")
    if n_realizations < 1000:
        logger.warning("Solo %d realizaciones: la media será ruidosa", n_realizations)

    lam = params.P * params.f * dt_window
    ms, rs = [], []
    for j, start in enumerate(range(0, n_realizations, chunk_size)):
        size = min(chunk_size, n_realizations - start)
        gen = rng.spawn(Purpose.REALIZATION, j).generator
        total = gen.poisson(lam, size=(size, params.N))
        own = total if params.P == 1 else gen.binomial(total, 1.0 / params.P)
        ms.append((total > 0).sum(axis=1))
        rs.append(own.sum(axis=1) / dt_window)

    m = np.concatenate(ms).astype(np.float64)
    r = np.concatenate(rs).astype(np.float64)
    valid = m > 0
    excluded = int((~valid).sum())
    if excluded:
        logger.warning("%d realizaciones con M = 0 excluidas de la media", excluded)
    values = np.full(m.shape, np.nan)
    values[valid] = (r[valid] - params.f * m[valid]) / np.sqrt(m[valid])
    if not valid.any():
        raise DegenerateError("Ninguna realización con M > 0")

    return AveragingReport(
        m=m,
        r=r,
        snr=values,
        mean_snr=float(np.mean(values[valid])),
        approx_snr=float(reduced_snr(m.mean(), r.mean(), params.f)),
        excluded=excluded,
    )
