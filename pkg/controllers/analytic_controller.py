"""Expresiones cerradas de la SNR esperada de un detector multi-patrón.

Todas las funciones son puras y aceptan escalares o arreglos numpy
(con broadcasting) donde tiene sentido. Los potenciales se expresan en
unidades de "sinapsis unitaria": un spike de peso 1 suma 1 al potencial.
"""

import math

import numpy as np

from models.params import DetectorConfig, ProblemParams, validate
from models.results import SnrBreakdown
from utils.exceptions import ConstraintViolationError, DegenerateError
from utils.logger import get_logger

logger = get_logger("controllers.analytic")


def _as_output(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


# ============================================================
# COMPONENTES
# ============================================================
def expected_m(params: ProblemParams, dt_window):
    """Cantidad esperada de aferentes conectados ⟨M⟩ = N(1 − e^(−P·f·Δt)).

    Args:
        params: Parámetros del problema.
        dt_window: Duración de la subsección (s), escalar o arreglo.

    Returns:
        ⟨M⟩ con la misma forma que ``dt_window``.
    """
    dt = np.asarray(dt_window, dtype=np.float64)
    return _as_output(-params.N * np.expm1(-params.P * params.f * dt))


def expected_r(params: ProblemParams) -> float:
    """Tasa esperada de entrada durante la ventana Δt: f·N (Hz)."""
    return params.f * params.N


def v_max_reduced(tau, dt_window, T):
    """Pico reducido v_max ∈ (0, 1] del LIF ante un patrón con jitter.

    Para T = 0 se usa el límite analítico 1 − e^(−Δt/τ). Para T > 0::

        v = min(1, Δt/2T) − (τ/2T)·log(1 − e^(−max(Δt,2T)/τ) + e^(−|Δt−2T|/τ))

    evaluado como log1p(−e^(−|Δt−2T|/τ)·expm1(−min(Δt,2T)/τ)).

    Args:
        tau: Constante de membrana (s).
        dt_window: Duración de la subsección (s).
        T: Semiancho del jitter (s).

    Returns:
        v_max con la forma del broadcasting de los argumentos.
    """
    tau_a, dt_a, t_a = np.broadcast_arrays(
        np.asarray(tau, dtype=np.float64),
        np.asarray(dt_window, dtype=np.float64),
        np.asarray(T, dtype=np.float64),
    )
    out = np.empty(tau_a.shape, dtype=np.float64)

    zero = t_a == 0
    out[zero] = -np.expm1(-dt_a[zero] / tau_a[zero])

    nz = ~zero
    if np.any(nz):
        tau_n, dt_n, two_t = tau_a[nz], dt_a[nz], 2.0 * t_a[nz]
        lo = np.minimum(dt_n, two_t)
        gap = np.abs(dt_n - two_t)
        log_term = np.log1p(-np.exp(-gap / tau_n) * np.expm1(-lo / tau_n))
        out[nz] = np.minimum(1.0, dt_n / two_t) - (tau_n / two_t) * log_term

    return _as_output(out)


def noise_stats(tau: float, f: float, m: float, weight: float = 1.0) -> tuple[float, float]:
    """Media y desvío del potencial bajo ruido Poisson estacionario.

    Returns:
        (τ·f·m·w, √(τ·f·m·w²/2)).
    """
    mean = tau * f * m * weight
    std = math.sqrt(tau * f * m * weight * weight / 2.0)
    return mean, std


def reduced_snr(m, r, f: float):
    """SNR reducida (r − f·m)/√m.

    Raises:
        DegenerateError: Si algún m ≤ 0.
    """
    m_a = np.asarray(m, dtype=np.float64)
    if np.any(m_a <= 0):
        raise DegenerateError("SNR reducida indefinida: M = 0")
    return _as_output((np.asarray(r, dtype=np.float64) - f * m_a) / np.sqrt(m_a))


# ============================================================
# SNR ESPERADA
# ============================================================
def snr_value(tau, dt_window, P: int, N: int, f: float, T: float):
    """⟨SNR⟩ ≈ v_max·√(2τ/f)·(f·N − f·⟨M⟩)/√⟨M⟩, vectorizada y sin validar.

    El numerador se evalúa como f·N·e^(−P·f·Δt), igual a f·N − f·⟨M⟩ pero
    sin cancelación cuando ⟨M⟩ se acerca a N. Retorna 0 donde ⟨M⟩ = 0.
    """
    tau_a = np.asarray(tau, dtype=np.float64)
    dt_a = np.asarray(dt_window, dtype=np.float64)
    m = -N * np.expm1(-P * f * dt_a)
    vmax = v_max_reduced(tau_a, dt_a, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = vmax * np.sqrt(2.0 * tau_a / f) * (f * N * np.exp(-P * f * dt_a)) / np.sqrt(m)
    return _as_output(np.where(m > 0, value, 0.0))


def snr(params: ProblemParams, config: DetectorConfig) -> SnrBreakdown:
    """SNR esperada del detector y sus componentes.

    Args:
        params: Parámetros del problema.
        config: τ y Δt del detector.

    Returns:
        SnrBreakdown con v_max, ⟨M⟩, ⟨r⟩, V̄_noise, σ_noise y la SNR.

    Raises:
        ConstraintViolationError: Parámetros inválidos.
        DegenerateError: Si ⟨M⟩ = 0.
    """
    params, config = validate(params, config)
    tau, dt = config.tau, config.dt_window

    m = expected_m(params, dt)
    if m <= 0:
        raise DegenerateError(f"⟨M⟩ = 0 para Δt={dt:.3g}s: SNR indefinida")
    r = expected_r(params)
    vmax = v_max_reduced(tau, dt, params.T)
    v_mean, v_std = noise_stats(tau, params.f, m)
    # f·N − f·⟨M⟩ sin restar términos casi iguales
    excess = params.f * params.N * math.exp(-params.P * params.f * dt)
    value = vmax * math.sqrt(2.0 * tau / params.f) * excess / math.sqrt(m)

    return SnrBreakdown(
        v_max=vmax,
        m_expected=m,
        r_expected=r,
        v_noise_mean=v_mean,
        v_noise_std=v_std,
        snr=value,
    )


def snr_grid(params: ProblemParams, tau_values, dt_values) -> np.ndarray:
    """SNR esperada sobre la grilla producto τ × Δt.

    Returns:
        Arreglo de forma (len(tau_values), len(dt_values)).
    """
    tau = np.asarray(tau_values, dtype=np.float64)[:, None]
    dt = np.asarray(dt_values, dtype=np.float64)[None, :]
    return np.asarray(snr_value(tau, dt, params.P, params.N, params.f, params.T))


def dt_from_m(params: ProblemParams, m: float) -> float:
    """Inversa de ``expected_m``: Δt tal que ⟨M⟩(Δt) = m.

    Raises:
        ConstraintViolationError: Si m está fuera de [0, N).
    """
    if m < 0 or m >= params.N:
        raise ConstraintViolationError(f"m={m} fuera de [0, N={params.N})", "m")
    return -math.log1p(-m / params.N) / (params.P * params.f)
