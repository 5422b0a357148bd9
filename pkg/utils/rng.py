"""Flujos aleatorios reproducibles para SNR-LIF.

Cada propósito lógico (patrón, presentación, ruido de fondo, ensayo...)
obtiene su propio sub-flujo derivado de una semilla maestra mediante
las claves de ``numpy.random.SeedSequence`` y un generador Philox
(basado en contador).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    """Propósitos lógicos de los sub-flujos."""

    PATTERN = 1
    PRESENTATION = 2
    BACKGROUND = 3
    TRIAL = 4
    CELL = 6
    REALIZATION = 7


@dataclass
class RngStream:
    """Sub-flujo aleatorio identificado por (seed, ruta de spawn).

    Un mismo (seed, path) reproduce exactamente los mismos sorteos.
    Las instancias son de un único dueño: no compartir entre workers.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()
    _generator: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        """Generador numpy asociado (creado de forma perezosa)."""
        if self._generator is None:
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
            self._generator = np.random.Generator(np.random.Philox(seq))
        return self._generator

    def spawn(self, purpose: Purpose, index: int = 0) -> RngStream:
        """Deriva un sub-flujo independiente para (propósito, índice)."""
        return RngStream(
            seed=self.seed,
            stream_id=int(index),
            path=self.path + (int(purpose), int(index)),
        )

    def spawn_many(self, purpose: Purpose, count: int) -> list[RngStream]:
        """Deriva ``count`` sub-flujos consecutivos del mismo propósito."""
        return [self.spawn(purpose, i) for i in range(count)]


def master_stream(seed: int) -> RngStream:
    """Crea el flujo raíz de una semilla maestra."""
    return RngStream(seed=int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
