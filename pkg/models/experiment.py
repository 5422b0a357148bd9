"""Especificación de un experimento del CLI."""

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator

from config.settings import DEFAULT_SEED, EXPERIMENTOS, RESULTS_DIR, SCALE_SETTINGS
from utils.exceptions import ConstraintViolationError, UnknownExperimentError
from utils.validators import validar_overrides


class ExperimentSpec(BaseModel):
    """Experimento a ejecutar con sus overrides (en unidades SI)."""

    model_config = ConfigDict(frozen=True)

    name: str
    overrides: dict[str, float] = Field(default_factory=dict)
    seed: int = DEFAULT_SEED
    output_dir: Path = RESULTS_DIR
    scale: Literal["desk", "full"] = "desk"
    check: bool = False
    workers: int = Field(default=1, ge=1)
    xlsx: bool = False
    dump_trace: bool = False

    @field_validator("name")
    @classmethod
    def validar_nombre(cls, v: str) -> str:
        if v not in EXPERIMENTOS:
            raise ValueError(f"experimento desconocido '{v}'")
        return v

    @field_validator("overrides")
    @classmethod
    def validar_overrides(cls, v: dict[str, float]) -> dict[str, float]:
        errores = validar_overrides(v)
        if errores:
            raise ValueError("; ".join(errores))
        return v

    @classmethod
    def create(cls, **data: Any) -> "ExperimentSpec":
        """Construye la especificación traduciendo errores de pydantic.

        Raises:
            UnknownExperimentError: Nombre fuera del catálogo.
            ConstraintViolationError: Overrides u opciones inválidas.
        """
        if data.get("name") not in EXPERIMENTOS:
            raise UnknownExperimentError(str(data.get("name")))
        try:
            return cls(**data)
        except PydanticValidationError as e:
            err = e.errors()[0]
            field = str(err["loc"][0]) if err.get("loc") else ""
            raise ConstraintViolationError(err["msg"], field) from e

    @property
    def run_dir(self) -> Path:
        """Directorio de salida determinista ``{experimento}_{seed}_{escala}``."""
        return self.output_dir / f"{self.name}_{self.seed}_{self.scale}"

    @property
    def scale_settings(self) -> dict[str, int | float]:
        return SCALE_SETTINGS[self.scale]

    def override(self, key: str, default: float) -> float:
        """Valor efectivo de un parámetro: override o valor por defecto."""
        return self.overrides.get(key, default)
