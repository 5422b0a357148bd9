"""Parámetros del problema y del detector.

Variables impuestas (P, L, N, f, T) y variables libres (τ, Δt) del
detector multi-patrón. Todos los tiempos en segundos.
"""

import math
from typing import Any, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError

from utils.exceptions import ConstraintViolationError
from utils.logger import get_logger

logger = get_logger("models.params")


# ============================================================
# MODELOS PYDANTIC
# ============================================================
class ProblemParams(BaseModel):
    """Variables impuestas del problema.

    ``L`` puede ser ``math.inf`` cuando la duración de los patrones no
    acota a Δt.
    """

    model_config = ConfigDict(frozen=True)

    P: int = Field(..., ge=1, description="Cantidad de patrones")
    L: float = Field(..., gt=0, description="Duración de los patrones (s)")
    N: int = Field(..., ge=1, description="Cantidad de aferentes")
    f: float = Field(..., gt=0, description="Tasa de disparo (Hz)")
    T: float = Field(default=0.0, ge=0, description="Semiancho máximo del jitter (s)")

    @property
    def input_rate(self) -> float:
        """Tasa total de entrada f·N (Hz)."""
        return self.f * self.N

    @property
    def bounded(self) -> bool:
        """Indica si L acota a Δt."""
        return math.isfinite(self.L)


class DetectorConfig(BaseModel):
    """Variables libres del detector: τ y Δt."""

    model_config = ConfigDict(frozen=True)

    tau: float = Field(..., gt=0, description="Constante de tiempo de membrana (s)")
    dt_window: float = Field(..., gt=0, description="Duración de la subsección Δt (s)")


# ============================================================
# VALIDACIÓN
# ============================================================
def _build(model: type[BaseModel], data: BaseModel | Mapping[str, Any]) -> BaseModel:
    if isinstance(data, model):
        return data
    try:
        payload = data.model_dump() if isinstance(data, BaseModel) else dict(data)
        return model(**payload)
    except PydanticValidationError as e:
        err = e.errors()[0]
        field = str(err["loc"][0]) if err.get("loc") else ""
        raise ConstraintViolationError(err["msg"], field) from e


def validate(
    params: ProblemParams | Mapping[str, Any],
    config: DetectorConfig | Mapping[str, Any],
) -> tuple[ProblemParams, DetectorConfig]:
    """Valida un par (problema, detector).

    Args:
        params: Parámetros del problema (modelo o diccionario).
        config: Configuración del detector (modelo o diccionario).

    Returns:
        Tupla (params, config) validada.

    Raises:
        ConstraintViolationError: Si algún invariante no se cumple.
    """
    p = _build(ProblemParams, params)
    c = _build(DetectorConfig, config)
    if c.dt_window > p.L:
        raise ConstraintViolationError(
            f"Δt={c.dt_window:.6g}s supera la duración del patrón L={p.L:.6g}s",
            "dt_window",
        )
    logger.debug("Parámetros válidos: %s / %s", p, c)
    return p, c


def make_params(data: ProblemParams | Mapping[str, Any]) -> ProblemParams:
    """Construye ``ProblemParams`` traduciendo errores de pydantic.

    Raises:
        ConstraintViolationError: Si algún invariante no se cumple.
    """
    return _build(ProblemParams, data)
