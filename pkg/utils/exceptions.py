"""Excepciones personalizadas de SNR-LIF.

Define una jerarquía de excepciones para manejar errores
de forma específica y descriptiva en toda la aplicación.
"""


class SnrLifBaseError(Exception):
    """Excepción base para todas las excepciones de SNR-LIF."""

    def __init__(self, message: str = "Error interno", code: str = "SNRLIF_ERROR"):
        self.message = message
        self.code = code
        super().__init__(self.message)


# ============================================================
# Errores de Validación
# ============================================================
class ValidationError(SnrLifBaseError):
    """Error de validación de datos."""

    def __init__(self, message: str = "Datos inválidos", field: str = ""):
        self.field = field
        if field:
            message = f"Campo '{field}': {message}"
        super().__init__(message, "VALIDATION_ERROR")


class ConstraintViolationError(ValidationError):
    """Un parámetro viola una restricción del modelo."""

    def __init__(self, message: str = "Restricción violada", field: str = ""):
        super().__init__(message, field)
        self.code = "VALIDATION_CONSTRAINT"


class DegenerateError(SnrLifBaseError):
    """La magnitud pedida no está definida (división por cero, varianza nula)."""

    def __init__(self, message: str = "Caso degenerado"):
        super().__init__(message, "DEGENERATE")


# ============================================================
# Errores de Optimización
# ============================================================
class OptimizationError(SnrLifBaseError):
    """Error genérico de optimización."""

    def __init__(self, message: str = "Error de optimización"):
        super().__init__(message, "OPT_ERROR")


class InfeasibleError(OptimizationError):
    """Ningún punto dentro de los límites cumple la restricción τ·f·M ≥ 10."""

    def __init__(self, message: str = "Problema sin soluciones factibles"):
        super().__init__(message)
        self.code = "OPT_INFEASIBLE"


class NonConvergenceError(OptimizationError):
    """Se agotó el presupuesto de iteraciones sin converger."""

    def __init__(self, message: str = "El optimizador no convergió", best_so_far: object = None):
        self.best_so_far = best_so_far
        super().__init__(message)
        self.code = "OPT_NON_CONVERGENCE"


# ============================================================
# Errores de Simulación
# ============================================================
class SimulationError(SnrLifBaseError):
    """Error durante una simulación."""

    def __init__(self, message: str = "Error de simulación"):
        super().__init__(message, "SIM_ERROR")


class InsufficientNoiseError(SimulationError):
    """Los segmentos de ruido son demasiado cortos para estimar V̄_noise y σ_noise."""

    def __init__(self, message: str = "Muestras de ruido insuficientes", available: float = 0.0, required: float = 0.0):
        self.available = available
        self.required = required
        if required > 0:
            message = f"Ruido disponible {available:.4g}s < requerido {required:.4g}s"
        super().__init__(message)
        self.code = "SIM_INSUFFICIENT_NOISE"


# ============================================================
# Errores de Aprendizaje
# ============================================================
class LearningError(SnrLifBaseError):
    """Error durante el aprendizaje STDP."""

    def __init__(self, message: str = "Error de aprendizaje"):
        super().__init__(message, "LEARN_ERROR")


class InfeasibleInitializationError(LearningError):
    """El peso inicial uniforme queda fuera de [0, 1]."""

    def __init__(self, message: str = "Peso inicial fuera de [0, 1]"):
        super().__init__(message)
        self.code = "LEARN_INFEASIBLE_INIT"


class NotConvergedError(LearningError):
    """Los pesos no convergieron a valores binarios."""

    def __init__(self, message: str = "Pesos no convergidos", index: float = 0.0):
        self.index = index
        if index > 0:
            message = f"Pesos no convergidos (índice de convergencia {index:.4f})"
        super().__init__(message)
        self.code = "LEARN_NOT_CONVERGED"


# ============================================================
# Errores de Archivos de Spikes
# ============================================================
class SpikeFileError(SnrLifBaseError):
    """Error durante la lectura o escritura de spikes."""

    def __init__(self, message: str = "Error en archivo de spikes"):
        super().__init__(message, "SPIKE_FILE_ERROR")


class InvalidFileFormatError(SpikeFileError):
    """Contenido de archivo no válido."""

    def __init__(self, message: str = "Formato de archivo no válido"):
        super().__init__(message)
        self.code = "SPIKE_FILE_INVALID_FORMAT"


class MissingColumnsError(SpikeFileError):
    """Columnas requeridas faltantes en el archivo."""

    def __init__(self, message: str = "Faltan columnas requeridas", missing: list[str] | None = None):
        self.missing_columns = missing or []
        if missing:
            cols = ", ".join(missing)
            message = f"Columnas faltantes: {cols}"
        super().__init__(message)
        self.code = "SPIKE_FILE_MISSING_COLUMNS"


# ============================================================
# Errores de Experimentos
# ============================================================
class ExperimentError(SnrLifBaseError):
    """Error al ejecutar un experimento."""

    def __init__(self, message: str = "Error de experimento"):
        super().__init__(message, "EXPERIMENT_ERROR")


class UnknownExperimentError(ExperimentError):
    """Nombre de experimento no reconocido."""

    def __init__(self, name: str = ""):
        super().__init__(f"Experimento desconocido: '{name}'")
        self.code = "EXPERIMENT_UNKNOWN"


class OutputDirectoryError(ExperimentError):
    """No se puede escribir en el directorio de salida."""

    def __init__(self, message: str = "Directorio de salida no escribible"):
        super().__init__(message)
        self.code = "EXPERIMENT_OUTPUT_DIR"
