"""Sistema de logging centralizado para SNR-LIF.

Un único logger raíz ``snrlif`` con consola (stderr) y archivo rotativo
global. Cada corrida de un experimento agrega además un ``run.log``
propio en su directorio de resultados. Un proceso que no es el
principal (workers lanzados con spawn) solo recibe la consola.
"""

import logging
import multiprocessing
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

from config.settings import (
    LOG_BACKUP_COUNT,
    LOG_DATE_FORMAT,
    LOG_FILE,
    LOG_FORMAT,
    LOG_MAX_BYTES,
    RUN_LOG_NAME,
)

ROOT_LOGGER = "snrlif"


def _formatter() -> logging.Formatter:
    return logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATE_FORMAT)


def _is_main_process() -> bool:
    return multiprocessing.current_process().name == "MainProcess"


def setup_logger(name: str = ROOT_LOGGER, level: int = logging.DEBUG) -> logging.Logger:
    """Configura y retorna el logger con handlers de consola y archivo.

    Args:
        name: Nombre del logger. Usar nombres jerárquicos (ej: 'snrlif.stdp').
        level: Nivel mínimo de logging.

    Returns:
        Logger configurado y listo para usar.
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    logger.setLevel(level)

    # stdout queda libre para el resumen JSON del CLI
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(logging.INFO)
    console.setFormatter(_formatter())
    logger.addHandler(console)

    if not _is_main_process():
        return logger

    try:
        file_handler = RotatingFileHandler(
            filename=str(LOG_FILE),
            maxBytes=LOG_MAX_BYTES,
            backupCount=LOG_BACKUP_COUNT,
            encoding="utf-8",
        )
    except OSError as e:
        logger.warning("No se pudo crear el archivo de log: %s", e)
        return logger
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(_formatter())
    logger.addHandler(file_handler)
    return logger


def set_console_level(level: int) -> None:
    """Ajusta el nivel del handler de consola (--verbose en el CLI)."""
    for handler in setup_logger().handlers:
        if type(handler) is logging.StreamHandler:
            handler.setLevel(level)


def attach_run_log(run_dir: str | Path) -> logging.Handler:
    """Agrega un ``run.log`` (nivel DEBUG) en el directorio de una corrida.

    Returns:
        El handler agregado; se quita con ``detach_run_log``.
    """
    handler = logging.FileHandler(Path(run_dir) / RUN_LOG_NAME, mode="w", encoding="utf-8")
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(_formatter())
    setup_logger().addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    setup_logger().removeHandler(handler)
    handler.close()


def get_logger(module_name: str) -> logging.Logger:
    """Obtiene un logger hijo de ``snrlif``.

    Args:
        module_name: Nombre del módulo que solicita el logger.
    """
    return setup_logger().getChild(module_name)
