"""Configuración global de SNR-LIF.

Define constantes, rutas y parámetros por defecto utilizados
en toda la aplicación. Los tiempos se expresan en segundos.
"""

from pathlib import Path

# ============================================================
# RUTAS DEL PROYECTO
# ============================================================
BASE_DIR: Path = Path(__file__).resolve().parent.parent
LOGS_DIR: Path = BASE_DIR / "logs"
RESULTS_DIR: Path = BASE_DIR / "results"

# Crear directorios si no existen
LOGS_DIR.mkdir(parents=True, exist_ok=True)

# ============================================================
# APLICACIÓN
# ============================================================
APP_TITLE: str = "SNR-LIF - Detección de múltiples patrones con LIF y STDP"
APP_VERSION: str = "1.0.0"
SCHEMA_VERSION: str = "1.0"

EXPERIMENTOS: list[str] = [
    "table1-theory",
    "table1-stdp",
    "fig2-averaging",
    "fig3-validation",
    "fig4-maps",
    "fig5-psweep",
    "fig7-graded",
]
ESCALAS: list[str] = ["desk", "full"]
DEFAULT_SEED: int = 2018
DEFAULT_WORKERS: int = 1

# ============================================================
# PROBLEMA (valores de referencia)
# ============================================================
DEFAULT_N: int = 10_000
DEFAULT_F: float = 3.2  # Hz
DEFAULT_T: float = 3.2e-3
DEFAULT_L_STDP: float = 0.100
PRESENTATION_INTERVAL: float = 0.400
INTEGRATION_STEP: float = 1e-4

# ============================================================
# OPTIMIZADOR
# ============================================================
MIN_SYNAPTIC_INPUTS: float = 10.0  # restricción τ·f·M ≥ 10
OPT_GRID_SIZE: int = 64
OPT_VERIFY_GRID_SIZE: int = 200
OPT_TAU_BOUNDS: tuple[float, float] = (1e-4, 1.0)
OPT_DT_BOUNDS: tuple[float, float] = (1e-4, 1.0)
OPT_PENALTY: float = 1e6
OPT_TIE_TOLERANCE: float = 1e-9
OPT_MAXITER: int = 4000

GRADED_WINDOW_SPAN_TAUS: float = 5.0  # Δt_i = 5τ/n
GRADED_MAX_ITER: int = 50_000
GRADED_KKT_TOLERANCE: float = 1e-8

# ============================================================
# SIMULADOR
# ============================================================
NOISE_GUARD_TAUS: float = 5.0
MIN_NOISE_TAUS: float = 100.0
CYCLES_PER_CHUNK: int = 25

# ============================================================
# STDP
# ============================================================
THETA_JUMP_FACTOR: float = 1.8
TAU_THETA: float = 0.080
DELTA_A_PRE: float = 0.1
TAU_PRE: float = 0.020
POTENTIATED_THRESHOLD: float = 0.5
LEARNED_WEIGHT: float = 0.9  # w ≈ 1 tras la convergencia
CONVERGENCE_THRESHOLD: float = 0.01
CONVERGENCE_STABLE_TIME: float = 500.0
CONVERGENCE_SAMPLE_INTERVAL: float = 10.0
MAX_LEARNING_TIME: float = 12_000.0
EVALUATION_PRESENTATIONS: int = 100
OPTIMAL_M_MARGIN: float = 0.05
SUBSECTION_MIN_FRACTION: float = 0.5
GRID_RATIO: float = 0.025
GRID_SPAN: float = 0.5

# Filas de la tabla de rendimiento: P -> (Δt, τ, M, SNR, θ0, w_out)
TABLE1: dict[int, dict[str, float]] = {
    5: {"dt": 11e-3, "tau": 8.9e-3, "m": 1600, "snr": 31, "theta0": 190, "w_out": -6.2e-3},
    10: {"dt": 8.1e-3, "tau": 6.8e-3, "m": 2300, "snr": 20, "theta0": 140, "w_out": -6.3e-3},
    20: {"dt": 5.7e-3, "tau": 5.6e-3, "m": 3100, "snr": 12, "theta0": 110, "w_out": -6.5e-3},
    40: {"dt": 3.7e-3, "tau": 5.1e-3, "m": 3800, "snr": 6.7, "theta0": 92, "w_out": -6.7e-3},
}
TABLE1_STDP_TARGETS: dict[int, dict[str, float]] = {
    5: {"learned": 5, "hit_rate": 0.989, "p_opt": 1.00},
    10: {"learned": 10, "hit_rate": 0.986, "p_opt": 1.00},
    20: {"learned": 20, "hit_rate": 0.979, "p_opt": 1.00},
    40: {"learned": 39.5, "hit_rate": 0.965, "p_opt": 0.58},
}
GRADED_GAIN_TARGETS: dict[float, float] = {1.0: 0.105, 5.0: 0.096, 10.0: 0.089}

# ============================================================
# TOLERANCIAS DE ACEPTACIÓN (--check)
# ============================================================
TOL_TABLE1_RELATIVE: float = 0.05
TOL_FIG2_RELATIVE: float = 0.02
TOL_FIG3_SIGMAS: float = 3.0
TOL_GRADED_GAIN: float = 0.005
TOL_GRADIENT_RELATIVE: float = 1e-5
STDP_MIN_OPTIMAL_FRACTION: float = 0.9
STDP_MIN_HIT_RATE: float = 0.95

# ============================================================
# ESCALAS (desk = reproducción reducida para CI)
# ============================================================
SCALE_SETTINGS: dict[str, dict[str, int | float]] = {
    "desk": {
        "fig2_realizations": 10_000,
        "fig3_trials": 10,
        "fig3_presentations": 200,
        "fig4_grid": 12,
        "stdp_runs": 10,
        "stdp_max_time": MAX_LEARNING_TIME,
    },
    "full": {
        "fig2_realizations": 100_000,
        "fig3_trials": 100,
        "fig3_presentations": 1000,
        "fig4_grid": 40,
        "stdp_runs": 100,
        "stdp_max_time": MAX_LEARNING_TIME,
    },
}
FIG4_F_RANGE: tuple[float, float] = (0.1, 30.0)  # Hz
FIG4_T_RANGE: tuple[float, float] = (1e-4, 30e-3)
FIG5_P_VALUES: dict[str, list[int]] = {
    "desk": [1, 2, 5, 10, 20, 40],
    "full": list(range(1, 51)),
}
FIG4_P: int = 2

# Promedio sobre realizaciones (P, Δt, f)
FIG2_DEFAULTS: dict[str, float] = {"P": 1, "dt_window": 2e-3, "f": 1.0}

# Validación teoría vs simulación
FIG3_P_VALUES: list[int] = [1, 5]
FIG3_DEFAULTS: dict[str, float] = {"L": 20e-3, "dt_window": 20e-3, "f": 5.0, "T": 5e-3, "tau": 10e-3}

# Pesos graduados
GRADED_N: int = 70
FIG7_TAU: float = 10e-3
FIG7_F_VALUES: list[float] = [1.0, 5.0, 10.0]

# Aprendizaje STDP por escala
STDP_P_VALUES: dict[str, list[int]] = {"desk": [5], "full": [5, 10, 20, 40]}
STDP_GRID_STEPS: dict[str, int] = {"desk": 0, "full": 2}

# ============================================================
# LOGGING
# ============================================================
LOG_FILE: Path = LOGS_DIR / "snrlif.log"
LOG_MAX_BYTES: int = 5 * 1024 * 1024  # 5 MB
LOG_BACKUP_COUNT: int = 5
LOG_FORMAT: str = "%(asctime)s | %(levelname)-8s | %(processName)-17s | %(name)-32s | %(message)s"
RUN_LOG_NAME: str = "run.log"
LOG_DATE_FORMAT: str = "%Y-%m-%d %H:%M:%S"

# ============================================================
# ARCHIVOS DE SALIDA
# ============================================================
SPIKE_CSV_COLUMNS: list[str] = ["afferent_id", "time_s"]
CSV_FLOAT_FORMAT: str = "%.10g"
EXCEL_FILE_NAME: str = "tables.xlsx"
# Formato científico en Excel para |x| fuera de [1e-3, 1e5)
EXCEL_SCI_RANGE: tuple[float, float] = (1e-3, 1e5)
