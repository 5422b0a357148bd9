"""Validaciones y conversiones de unidades para SNR-LIF.

Funciones de validación de parámetros numéricos recibidos desde
el CLI o desde archivos, y conversión ms ↔ s en el borde del sistema.
"""

import math

from utils.logger import get_logger

logger = get_logger("utils.validators")


def ms_to_s(value_ms: float) -> float:
    """Convierte milisegundos a segundos."""
    return float(value_ms) * 1e-3


def s_to_ms(value_s: float) -> float:
    """Convierte segundos a milisegundos."""
    return float(value_s) * 1e3


def validar_positivo(valor: float, campo: str, *, estricto: bool = True) -> tuple[bool, str]:
    """Valida que un valor sea finito y positivo.

    Args:
        valor: Valor a validar.
        campo: Nombre del campo (para el mensaje).
        estricto: Si True exige > 0; si False acepta 0.

    Returns:
        Tupla (es_válido, mensaje_error).
    """
    if valor is None or (isinstance(valor, float) and math.isnan(valor)):
        return False, f"{campo} es obligatorio"
    if estricto and valor <= 0:
        return False, f"{campo} debe ser estrictamente positivo (recibido {valor})"
    if not estricto and valor < 0:
        return False, f"{campo} no puede ser negativo (recibido {valor})"
    return True, ""


def validar_overrides(overrides: dict[str, float]) -> list[str]:
    """Valida los overrides de parámetros del CLI ya convertidos a SI.

    Args:
        overrides: Diccionario nombre → valor.

    Returns:
        Lista de mensajes de error (vacía si todo es válido).
    """
    errores: list[str] = []
    estrictos = ("P", "N", "f", "tau", "dt_window", "L", "theta0")
    for nombre in estrictos:
        if nombre in overrides:
            ok, msg = validar_positivo(overrides[nombre], nombre)
            if not ok:
                errores.append(msg)
    if "T" in overrides:
        ok, msg = validar_positivo(overrides["T"], "T", estricto=False)
        if not ok:
            errores.append(msg)
    if "w_out" in overrides and overrides["w_out"] >= 0:
        errores.append(f"w_out debe ser negativo (recibido {overrides['w_out']})")
    if errores:
        logger.warning("Overrides inválidos: %s", "; ".join(errores))
    return errores
