"""Modelos del aprendizaje STDP con umbral adaptativo."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config.settings import DELTA_A_PRE, TAU_PRE, TAU_THETA, THETA_JUMP_FACTOR


class StdpConfig(BaseModel):
    """Constantes de plasticidad y de umbral.

    ``w_init`` = None indica que el peso inicial se calcula con
    ``initial_weight`` (V̄_noise = θ₀ + σ_noise).
    """

    model_config = ConfigDict(frozen=True)

    theta0: float = Field(..., gt=0, description="Umbral basal")
    tau_theta: float = Field(default=TAU_THETA, gt=0)
    delta_a_pre: float = Field(default=DELTA_A_PRE, gt=0)
    tau_pre: float = Field(default=TAU_PRE, gt=0)
    w_out: float = Field(..., lt=0, description="Depresión homeostática por spike")
    w_init: Optional[float] = Field(default=None, gt=0, le=1)

    @property
    def theta_jump(self) -> float:
        """Incremento del umbral por spike postsináptico (1.8·θ₀)."""
        return THETA_JUMP_FACTOR * self.theta0


@dataclass
class LearningOutcome:
    """Resultado de una corrida de aprendizaje más su fase de evaluación."""

    final_weights: np.ndarray
    learned_pattern_count: int
    hit_rate: float
    false_alarm_rate: float
    potentiated_count: int
    convergence_index: float
    learning_time: float
    optimal: bool = False
    pattern_hit_rates: list[float] = field(default_factory=list)
    leading_subsections: list[float] = field(default_factory=list)
    prefix_fraction: float = 0.0
    initial_weight: float = 0.0
    postsynaptic_spikes: int = 0
    convergence_trace: list[tuple[float, float]] = field(default_factory=list)

    def trace_frame(self) -> pd.DataFrame:
        """Traza de convergencia con columnas ``time_s,index``."""
        return pd.DataFrame(self.convergence_trace, columns=["time_s", "index"])

    def weights_frame(self) -> pd.DataFrame:
        """Pesos finales con columnas ``afferent_id,weight``."""
        return pd.DataFrame({
            "afferent_id": np.arange(self.final_weights.size),
            "weight": self.final_weights,
        })

    def to_record(self) -> dict:
        """Resumen serializable en JSON (sin el vector de pesos)."""
        return {
            "learned_pattern_count": self.learned_pattern_count,
            "hit_rate": self.hit_rate,
            "false_alarm_rate": self.false_alarm_rate,
            "potentiated_count": self.potentiated_count,
            "convergence_index": self.convergence_index,
            "learning_time_s": self.learning_time,
            "optimal": self.optimal,
            "pattern_hit_rates": list(self.pattern_hit_rates),
            "leading_subsections_s": list(self.leading_subsections),
            "prefix_fraction": self.prefix_fraction,
            "initial_weight": self.initial_weight,
            "postsynaptic_spikes": self.postsynaptic_spikes,
        }


@dataclass
class GridCell:
    """Estadísticas de una celda (θ₀, w_out) de la búsqueda en grilla."""

    theta0: float
    w_out: float
    runs: int
    p_opt: float
    mean_learned: float
    mean_hit_rate: float
    mean_false_alarm: float


@dataclass
class GridSearchResult:
    """Celdas evaluadas y la mejor según P(opt), luego patrones aprendidos."""

    cells: list[GridCell]
    best: GridCell
    best_outcomes: list[LearningOutcome] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(c) for c in self.cells])
