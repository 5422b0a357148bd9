"""Lectura y escritura de flujos de spikes en CSV.

Formato: encabezado ``afferent_id,time_s``, un evento por fila,
tiempos ascendentes. Los tiempos se escriben con precisión de
ida y vuelta (repr de float64).
"""

from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from config.settings import SPIKE_CSV_COLUMNS
from models.spikes import SpikeStream
from utils.exceptions import (
    ConstraintViolationError,
    InvalidFileFormatError,
    MissingColumnsError,
    SpikeFileError,
)
from utils.logger import get_logger

logger = get_logger("utils.spike_csv")


class SpikeStreamIO:
    """Importación/exportación de ``SpikeStream`` en CSV."""

    @staticmethod
    def write_csv(stream: SpikeStream, output_path: str | Path) -> Path:
        """Escribe un flujo en CSV.

        Args:
            stream: Flujo a exportar.
            output_path: Ruta del archivo.

        Returns:
            Path del archivo generado.
        """
        output = Path(output_path)
        try:
            output.parent.mkdir(parents=True, exist_ok=True)
            stream.to_frame().to_csv(output, index=False, lineterminator="\n")
        except OSError as e:
            raise SpikeFileError(f"No se pudo escribir {output}: {e}") from e
        logger.info("Spikes exportados: %s (%d eventos)", output, len(stream))
        return output

    @staticmethod
    def read_csv(
        file_path: str | Path,
        *,
        duration: Optional[float] = None,
        n_afferents: Optional[int] = None,
    ) -> SpikeStream:
        """Lee y valida un flujo desde CSV.

        Args:
            file_path: Ruta al archivo.
            duration: Duración del flujo; por defecto el último tiempo.
            n_afferents: N; por defecto max(afferent_id) + 1.

        Returns:
            SpikeStream validado.

        Raises:
            InvalidFileFormatError: Archivo inexistente o contenido inválido.
            MissingColumnsError: Faltan columnas del encabezado.
        """
        path = Path(file_path)
        if not path.exists():
            raise InvalidFileFormatError(f"El archivo no existe: {path}")

        try:
            df = pd.read_csv(path, float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise InvalidFileFormatError(f"Error al leer {path.name}: {e}") from e

        # Limpiar nombres de columnas
        df.columns = [str(col).strip().lower().replace(" ", "_") for col in df.columns]
        missing = [c for c in SPIKE_CSV_COLUMNS if c not in df.columns]
        if missing:
            raise MissingColumnsError(missing=missing)

        try:
            afferents = df["afferent_id"].to_numpy(dtype=np.int64)
            times = df["time_s"].to_numpy(dtype=np.float64)
        except (ValueError, TypeError) as e:
            raise InvalidFileFormatError(f"Valores no numéricos en {path.name}: {e}") from e

        if duration is None:
            duration = float(times[-1]) if times.size else 0.0
        if n_afferents is None:
            n_afferents = int(afferents.max()) + 1 if afferents.size else 1

        try:
            stream = SpikeStream(afferents, times, float(duration), int(n_afferents))
        except ConstraintViolationError as e:
            raise InvalidFileFormatError(f"{path.name}: {e.message}") from e

        logger.info("Spikes importados: %s (%d eventos)", path.name, len(stream))
        return stream
