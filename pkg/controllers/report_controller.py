"""Controlador de reportes para SNR-LIF.

Escribe las series de cada experimento como CSV con metadatos JSON
asociados, el resumen ``summary.json`` y, opcionalmente, un libro Excel
con todas las tablas.
"""

import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from config.settings import APP_TITLE, CSV_FLOAT_FORMAT, EXCEL_FILE_NAME, EXCEL_SCI_RANGE, SCHEMA_VERSION
from utils.exceptions import ExperimentError, OutputDirectoryError
from utils.logger import get_logger

logger = get_logger("controllers.report")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return value.as_posix()
    raise TypeError(f"Tipo no serializable: {type(value).__name__}")


def _excel_value(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    # openpyxl no admite NaN ni infinitos
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _number_format(column: pd.Series) -> Optional[str]:
    if not pd.api.types.is_float_dtype(column):
        return None
    finite = column[np.isfinite(column) & (column != 0)].abs()
    if finite.empty:
        return "0.000"
    lo, hi = EXCEL_SCI_RANGE
    if finite.min() < lo or finite.max() >= hi:
        return "0.000E+00"
    return "0.0000"


class ReportController:
    """Controlador de archivos de salida de un experimento."""

    def __init__(self, run_dir: str | Path) -> None:
        """Inicializa el controlador y crea el directorio de la corrida.

        Args:
            run_dir: Directorio ``{experimento}_{seed}_{escala}``.

        Raises:
            OutputDirectoryError: Si el directorio no se puede crear.
        """
        self.run_dir = Path(run_dir)
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputDirectoryError(f"No se pudo crear {self.run_dir}: {e}") from e
        self.files: list[str] = []
        self.tables: dict[str, pd.DataFrame] = {}
        self.units: dict[str, dict[str, str]] = {}
        self.titles: dict[str, str] = {}

    def register(self, path: str | Path) -> None:
        """Agrega un archivo producido a la lista de ``summary.json``."""
        path = Path(path)
        try:
            name = path.relative_to(self.run_dir).as_posix()
        except ValueError:
            name = path.as_posix()
        if name not in self.files:
            self.files.append(name)

    def emit_plot_data(
        self,
        frame: pd.DataFrame,
        name: str,
        *,
        columns: Optional[dict[str, str]] = None,
        title: str = "",
    ) -> Path:
        """Escribe una serie como CSV y su descripción como JSON.

        Args:
            frame: Serie con columnas encabezadas.
            name: Nombre base del archivo (sin extensión).
            columns: Unidad de cada columna.
            title: Título del panel.

        Returns:
            Path del CSV generado.

        Raises:
            ExperimentError: Si la serie está vacía.
            OutputDirectoryError: Si el archivo no se puede escribir.
        """
        if frame is None or frame.empty:
            raise ExperimentError(f"Serie vacía: {name}")
        units = {col: (columns or {}).get(col, "") for col in frame.columns}
        csv_path = self.run_dir / f"{name}.csv"
        meta_path = self.run_dir / f"{name}.meta.json"
        meta = {
            "schema_version": SCHEMA_VERSION,
            "title": title or name,
            "rows": int(len(frame)),
            "columns": units,
        }
        try:
            frame.to_csv(csv_path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
            meta_path.write_text(json.dumps(meta, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        except OSError as e:
            raise OutputDirectoryError(f"No se pudo escribir {csv_path}: {e}") from e

        self.register(csv_path)
        self.register(meta_path)
        self.tables[name] = frame
        self.units[name] = units
        self.titles[name] = title or name
        logger.debug("Serie exportada: %s (%d filas)", csv_path.name, len(frame))
        return csv_path

    def write_summary(self, record: dict[str, Any]) -> Path:
        """Escribe ``summary.json`` con la lista de archivos producidos."""
        path = self.run_dir / "summary.json"
        payload = {"schema_version": SCHEMA_VERSION, **record, "files": list(self.files)}
        try:
            path.write_text(
                json.dumps(payload, indent=2, ensure_ascii=False, default=_json_default) + "\n",
                encoding="utf-8",
            )
        except OSError as e:
            raise OutputDirectoryError(f"No se pudo escribir {path}: {e}") from e
        logger.info("Resumen escrito: %s", path)
        return path

    def export_excel(
        self,
        output_path: Optional[str | Path] = None,
        *,
        title: str = "Resultados",
    ) -> Path:
        """Exporta todas las tablas emitidas a un libro Excel.

        Una hoja por tabla: título, fecha, encabezado, fila de unidades y
        datos con formato numérico según la magnitud de cada columna.

        Args:
            output_path: Ruta del libro; por defecto ``tables.xlsx`` en la corrida.
            title: Nombre del experimento.

        Returns:
            Path del archivo generado.
        """
        if not self.tables:
            raise ExperimentError("No hay tablas para exportar")

        import openpyxl

        wb = openpyxl.Workbook()
        wb.remove(wb.active)
        stamp = datetime.now().strftime("%d/%m/%Y %H:%M")
        for name, frame in self.tables.items():
            self._write_sheet(wb, name, frame, f"{title}: {self.titles[name]}", stamp)

        output = Path(output_path) if output_path else self.run_dir / EXCEL_FILE_NAME
        try:
            wb.save(output)
        except OSError as e:
            raise OutputDirectoryError(f"No se pudo escribir {output}: {e}") from e
        self.register(output)
        logger.info("Excel exportado: %s (%d hojas)", output, len(self.tables))
        return output

    def _write_sheet(self, wb, name: str, frame: pd.DataFrame, heading: str, stamp: str) -> None:
        from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
        from openpyxl.utils import get_column_letter

        header_font = Font(name="Calibri", bold=True, size=11, color="FFFFFF")
        header_fill = PatternFill(start_color="1F4E79", end_color="1F4E79", fill_type="solid")
        units_font = Font(name="Calibri", size=9, italic=True, color="666666")
        side = Side(style="thin")
        border = Border(left=side, right=side, top=side, bottom=side)

        # Excel limita los nombres de hoja a 31 caracteres
        ws = wb.create_sheet(name[:31])
        last_col = get_column_letter(max(1, len(frame.columns)))
        for row, text, font in (
            (1, APP_TITLE, Font(name="Calibri", bold=True, size=12.5, color="1F4E79")),
            (2, heading, Font(name="Calibri", bold=True, size=14)),
            (3, f"Generado: {stamp} | {len(frame)} filas", Font(name="Calibri", size=10, italic=True)),
        ):
            ws.merge_cells(f"A{row}:{last_col}{row}")
            ws[f"A{row}"] = text
            ws[f"A{row}"].font = font
            ws[f"A{row}"].alignment = Alignment(horizontal="center")

        header_row, units_row = 5, 6
        units = self.units.get(name, {})
        for col_idx, col_name in enumerate(frame.columns, 1):
            cell = ws.cell(row=header_row, column=col_idx, value=str(col_name))
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal="center", vertical="center")
            cell.border = border
            unit = ws.cell(row=units_row, column=col_idx, value=units.get(col_name, ""))
            unit.font = units_font
            unit.alignment = Alignment(horizontal="center")
            ws.column_dimensions[get_column_letter(col_idx)].width = max(12, len(str(col_name)) + 4)

        formats = [_number_format(frame[c]) for c in frame.columns]
        for row_idx, row in enumerate(frame.itertuples(index=False), units_row + 1):
            for col_idx, (val, fmt) in enumerate(zip(row, formats), 1):
                cell = ws.cell(row=row_idx, column=col_idx, value=_excel_value(val))
                cell.border = border
                if fmt:
                    cell.number_format = fmt
        ws.freeze_panes = ws.cell(row=units_row + 1, column=1)
