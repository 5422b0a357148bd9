"""Modelos de resultados analíticos, de optimización y de simulación."""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import INTEGRATION_STEP, PRESENTATION_INTERVAL
from models.params import ProblemParams


# ============================================================
# ANALÍTICO
# ============================================================
class SnrBreakdown(BaseModel):
    """Desglose de la SNR esperada y de sus componentes."""

    model_config = ConfigDict(frozen=True)

    v_max: float
    m_expected: float
    r_expected: float
    v_noise_mean: float
    v_noise_std: float
    snr: float


# ============================================================
# OPTIMIZADOR
# ============================================================
class OptimalDetector(BaseModel):
    """Óptimo de la SNR sobre (τ, Δt) bajo τ·f·M ≥ 10."""

    model_config = ConfigDict(frozen=True)

    tau_opt: float
    dt_opt: float
    snr_opt: float
    m_opt: float
    constraint_active: bool = False


class SweepCell(BaseModel):
    """Celda de un barrido (f, T); ``detector`` es None si es infactible."""

    model_config = ConfigDict(frozen=True)

    f: float
    T: float
    P: int
    detector: Optional[OptimalDetector] = None
    error: str = ""

    @property
    def feasible(self) -> bool:
        return self.detector is not None


class GradedProfile(BaseModel):
    """Perfil de pesos graduados por ventana (orden cronológico inverso)."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1)
    dt_windows: list[float]
    weights: list[float]
    snr: float = 0.0
    binary_snr: float = 0.0
    binary_snr_free: float = 0.0
    gain_vs_binary: float = 0.0
    iterations: int = 0

    @field_validator("weights")
    @classmethod
    def validar_pesos(cls, v: list[float]) -> list[float]:
        """Pesos en [0, 1] con w_1 = 1."""
        if any(w < 0 or w > 1 for w in v):
            raise ValueError("Los pesos deben estar en [0, 1]")
        if v and abs(v[0] - 1.0) > 1e-12:
            raise ValueError("Se impone w_1 = 1")
        return v

    @model_validator(mode="after")
    def validar_largos(self) -> "GradedProfile":
        """Valida que n, Δt_i y w_i sean consistentes."""
        if len(self.dt_windows) != self.n or len(self.weights) != self.n:
            raise ValueError("dt_windows y weights deben tener n elementos")
        if any(dt <= 0 for dt in self.dt_windows):
            raise ValueError("Cada Δt_i debe ser positivo")
        return self


# ============================================================
# SIMULADOR
# ============================================================
class TrialProtocol(BaseModel):
    """Protocolo de presentación de patrones embebidos en ruido Poisson."""

    model_config = ConfigDict(frozen=True)

    params: ProblemParams
    presentations_per_pattern: int = Field(..., ge=1)
    inter_presentation_interval: float = Field(default=PRESENTATION_INTERVAL, gt=0)
    integration_step: float = Field(default=INTEGRATION_STEP, gt=0)
    engine: Literal["clock", "event"] = "clock"

    @model_validator(mode="after")
    def validar_intervalo(self) -> "TrialProtocol":
        """Las presentaciones no deben solaparse."""
        if self.inter_presentation_interval <= self.params.L + 2 * self.params.T:
            raise ValueError("El intervalo entre presentaciones debe superar L + 2T")
        return self

    @property
    def n_presentations(self) -> int:
        return self.presentations_per_pattern * self.params.P


class EmpiricalSnr(BaseModel):
    """SNR medida por simulación: (⟨V_max⟩ − V̄_noise) / σ_noise."""

    model_config = ConfigDict(frozen=True)

    v_max_mean: float
    v_noise_mean: float
    v_noise_std: float
    snr: float
    n_presentations: int
    noise_time: float = 0.0
    m_connected: int = 0


@dataclass
class AveragingReport:
    """Distribución de (M, r, snr reducida) sobre realizaciones de patrones.

    Las realizaciones con M = 0 quedan fuera de la media (``excluded``).
    """

    m: np.ndarray
    r: np.ndarray
    snr: np.ndarray
    mean_snr: float
    approx_snr: float
    excluded: int = 0

    @property
    def relative_error(self) -> float:
        """|media − aproximación| / media."""
        return abs(self.mean_snr - self.approx_snr) / abs(self.mean_snr)

    @property
    def correlation(self) -> float:
        """Correlación de Pearson entre M y r."""
        return float(np.corrcoef(self.m, self.r)[0, 1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"M": self.m, "r_hz": self.r, "snr": self.snr})
