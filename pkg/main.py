"""Punto de entrada principal de SNR-LIF.

Expone los experimentos reproducibles y las utilidades de archivos de
spikes como subcomandos de línea de comandos. Los parámetros en ms se
convierten a segundos en este borde.

Códigos de salida: 0 éxito, 1 chequeo de aceptación fallido (--check),
2 error de uso, configuración o E/S.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

# Asegurar que el directorio raíz esté en el path
ROOT_DIR = Path(__file__).resolve().parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from config.settings import (
    APP_TITLE,
    APP_VERSION,
    DEFAULT_F,
    DEFAULT_L_STDP,
    DEFAULT_N,
    DEFAULT_SEED,
    DEFAULT_T,
    DEFAULT_WORKERS,
    ESCALAS,
    EXPERIMENTOS,
    RESULTS_DIR,
)
from utils.exceptions import SnrLifBaseError
from utils.logger import get_logger, set_console_level, setup_logger
from utils.validators import ms_to_s

logger = get_logger("main")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2

# opción CLI -> (clave interna, factor de conversión a SI)
_OVERRIDES: dict[str, tuple[str, Optional[Callable[[float], float]]]] = {
    "P": ("P", None),
    "f_hz": ("f", None),
    "T_ms": ("T", ms_to_s),
    "N": ("N", None),
    "tau_ms": ("tau", ms_to_s),
    "dt_ms": ("dt_window", ms_to_s),
    "theta0": ("theta0", None),
    "w_out": ("w_out", None),
    "L_ms": ("L", ms_to_s),
}


def _add_parameter_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--P", type=int, help="Cantidad de patrones")
    parser.add_argument("--f-hz", type=float, dest="f_hz", help="Tasa de disparo (Hz)")
    parser.add_argument("--T-ms", type=float, dest="T_ms", help="Semiancho del jitter (ms)")
    parser.add_argument("--N", type=int, help="Cantidad de aferentes")
    parser.add_argument("--tau-ms", type=float, dest="tau_ms", help="Constante de membrana (ms)")
    parser.add_argument("--dt-ms", type=float, dest="dt_ms", help="Duración de la subsección (ms)")
    parser.add_argument("--theta0", type=float, help="Umbral basal")
    parser.add_argument("--w-out", type=float, dest="w_out", help="Depresión homeostática")
    parser.add_argument("--L-ms", type=float, dest="L_ms", help="Duración de los patrones (ms)")


def build_parser() -> argparse.ArgumentParser:
    """Construye el parser con un subcomando por experimento."""
    parser = argparse.ArgumentParser(prog="snrlif", description=APP_TITLE)
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENTOS:
        p = sub.add_parser(name, help=f"Experimento {name}")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--scale", choices=ESCALAS, default="desk")
        p.add_argument("--out", type=Path, default=RESULTS_DIR, help="Directorio de resultados")
        p.add_argument("--check", action="store_true", help="Salir con 1 si falla algún chequeo")
        p.add_argument("--workers", type=int, default=DEFAULT_WORKERS)
        p.add_argument("--xlsx", action="store_true", help="Exportar también un libro Excel")
        p.add_argument("--dump-trace", action="store_true", dest="dump_trace",
                       help="Escribir la traza de potencial (time_s,V)")
        p.add_argument("--verbose", "-v", action="store_true")
        _add_parameter_options(p)

    p = sub.add_parser("export-pattern", help="Generar patrones congelados y escribirlos como CSV")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, default=RESULTS_DIR / "patterns")
    p.add_argument("--verbose", "-v", action="store_true")
    _add_parameter_options(p)

    p = sub.add_parser("inspect-spikes", help="Validar y resumir un CSV de spikes")
    p.add_argument("path", type=Path)
    p.add_argument("--duration-ms", type=float, dest="duration_ms")
    p.add_argument("--N", type=int)
    p.add_argument("--verbose", "-v", action="store_true")
    return parser


def collect_overrides(args: argparse.Namespace) -> dict[str, float]:
    """Overrides del usuario en unidades SI."""
    overrides: dict[str, float] = {}
    for option, (key, convert) in _OVERRIDES.items():
        value = getattr(args, option, None)
        if value is not None:
            overrides[key] = convert(value) if convert else value
    return overrides


def run_experiment(args: argparse.Namespace) -> int:
    """Ejecuta un experimento y escribe el resumen JSON en stdout."""
    from controllers.experiment_controller import ExperimentController
    from models.experiment import ExperimentSpec

    spec = ExperimentSpec.create(
        name=args.command,
        overrides=collect_overrides(args),
        seed=args.seed,
        output_dir=args.out,
        scale=args.scale,
        check=args.check,
        workers=args.workers,
        xlsx=args.xlsx,
        dump_trace=args.dump_trace,
    )
    result = ExperimentController(spec).run()
    print(json.dumps({
        "summary": result.summary_path.as_posix(),
        "passed": result.passed,
        "failed_checks": [c.name for c in result.checks if not c.passed],
    }, ensure_ascii=False))
    return EXIT_CHECK_FAILED if result.exit_code else EXIT_OK


def export_pattern(args: argparse.Namespace) -> int:
    """Genera P patrones congelados y los escribe como ``pattern_{i}.csv``."""
    from controllers.simulation_controller import generate_patterns
    from models.params import make_params
    from utils.rng import master_stream
    from utils.spike_csv import SpikeStreamIO

    o = collect_overrides(args)
    params = make_params({
        "P": int(o.get("P", 1)),
        "L": o.get("L", DEFAULT_L_STDP),
        "N": int(o.get("N", DEFAULT_N)),
        "f": o.get("f", DEFAULT_F),
        "T": o.get("T", DEFAULT_T),
    })
    patterns = generate_patterns(params, master_stream(args.seed))
    files = [
        SpikeStreamIO.write_csv(p, args.out / f"pattern_{p.pattern_id}.csv").as_posix()
        for p in patterns
    ]
    print(json.dumps({"patterns": files, "params": params.model_dump()}, ensure_ascii=False))
    return EXIT_OK


def inspect_spikes(args: argparse.Namespace) -> int:
    """Lee un CSV de spikes, lo valida e imprime un resumen."""
    from utils.spike_csv import SpikeStreamIO

    duration = ms_to_s(args.duration_ms) if args.duration_ms is not None else None
    stream = SpikeStreamIO.read_csv(args.path, duration=duration, n_afferents=args.N)
    counts = stream.counts()
    summary = {
        "path": args.path.as_posix(),
        "events": len(stream),
        "duration_s": stream.duration,
        "n_afferents": stream.n_afferents,
        "active_afferents": int((counts > 0).sum()),
        "mean_rate_hz": len(stream) / (stream.duration * stream.n_afferents) if stream.duration > 0 else None,
        "first_time_s": float(stream.times[0]) if len(stream) else None,
        "last_time_s": float(stream.times[-1]) if len(stream) else None,
    }
    print(json.dumps(summary, ensure_ascii=False))
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    """Función principal de la aplicación."""
    args = build_parser().parse_args(argv)
    setup_logger()
    set_console_level(logging.DEBUG if args.verbose else logging.INFO)
    logger.info("=" * 60)
    logger.info("Iniciando %s v%s: %s", APP_TITLE, APP_VERSION, args.command)
    logger.info("=" * 60)

    try:
        if args.command == "export-pattern":
            return export_pattern(args)
        if args.command == "inspect-spikes":
            return inspect_spikes(args)
        return run_experiment(args)
    except SnrLifBaseError as e:
        logger.error("[%s] %s", e.code, e.message)
        return EXIT_ERROR
    except OSError as e:
        logger.error("Error de E/S: %s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
