"""Flujos de spikes (aferente, tiempo) ordenados por tiempo.

Un ``SpikeStream`` es inmutable: sus arreglos se marcan como de solo
lectura al construirse. Un ``Pattern`` es un flujo de duración L que se
genera una vez y se re-presenta ("frozen noise").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from utils.exceptions import ConstraintViolationError


@dataclass(frozen=True)
class SpikeStream:
    """Eventos (afferent_id, time) ordenados por tiempo."""

    afferents: np.ndarray
    times: np.ndarray
    duration: float
    n_afferents: int

    def __post_init__(self) -> None:
        afferents = np.ascontiguousarray(self.afferents, dtype=np.int64)
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        if afferents.shape != times.shape or afferents.ndim != 1:
            raise ConstraintViolationError("afferents y times deben ser vectores de igual largo", "events")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise ConstraintViolationError("los tiempos deben ser no decrecientes", "times")
            if times[0] < 0 or times[-1] > self.duration:
                raise ConstraintViolationError(
                    f"tiempos fuera de [0, {self.duration}]", "times",
                )
            if afferents.min() < 0 or afferents.max() >= self.n_afferents:
                raise ConstraintViolationError(
                    f"afferent_id fuera de [0, {self.n_afferents})", "afferent_id",
                )
        afferents.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "afferents", afferents)
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return int(self.times.size)

    @classmethod
    def empty(cls, duration: float, n_afferents: int) -> SpikeStream:
        """Flujo sin eventos."""
        return cls(np.empty(0, np.int64), np.empty(0), duration, n_afferents)

    @classmethod
    def from_unsorted(
        cls, afferents: np.ndarray, times: np.ndarray, duration: float, n_afferents: int,
    ) -> SpikeStream:
        """Construye un flujo ordenando los eventos por tiempo (orden estable)."""
        order = np.argsort(times, kind="stable")
        return cls(np.asarray(afferents)[order], np.asarray(times)[order], duration, n_afferents)

    def select(self, mask: np.ndarray) -> SpikeStream:
        """Conserva solo los eventos de los aferentes marcados en ``mask``."""
        keep = np.asarray(mask, dtype=bool)[self.afferents]
        return SpikeStream(self.afferents[keep], self.times[keep], self.duration, self.n_afferents)

    def counts(self) -> np.ndarray:
        """Cantidad de spikes por aferente."""
        return np.bincount(self.afferents, minlength=self.n_afferents)

    def to_frame(self) -> pd.DataFrame:
        """DataFrame con columnas ``afferent_id,time_s``."""
        return pd.DataFrame({"afferent_id": self.afferents, "time_s": self.times})

    def equals(self, other: SpikeStream) -> bool:
        """Igualdad exacta de eventos, duración y cantidad de aferentes."""
        return (
            self.duration == other.duration
            and self.n_afferents == other.n_afferents
            and np.array_equal(self.afferents, other.afferents)
            and np.array_equal(self.times, other.times)
        )


@dataclass(frozen=True)
class Pattern(SpikeStream):
    """Patrón congelado de duración L."""

    pattern_id: int = 0


def merge_streams(a: SpikeStream, b: SpikeStream) -> SpikeStream:
    """Une dos flujos ordenados en uno ordenado (multiconjunto unión).

    Raises:
        ConstraintViolationError: Si los flujos tienen distinto N.
    """
    if a.n_afferents != b.n_afferents:
        raise ConstraintViolationError("los flujos deben compartir N", "n_afferents")
    times = np.concatenate([a.times, b.times])
    afferents = np.concatenate([a.afferents, b.afferents])
    order = np.argsort(times, kind="stable")
    return SpikeStream(afferents[order], times[order], max(a.duration, b.duration), a.n_afferents)
