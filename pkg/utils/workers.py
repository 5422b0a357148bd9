"""Pool acotado de workers para ensayos y celdas independientes."""

from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Sequence

from utils.logger import get_logger

logger = get_logger("utils.workers")


def run_parallel(
    func: Callable[..., Any],
    jobs: Sequence[tuple],
    workers: int = 1,
    *,
    label: str = "tareas",
) -> list[Any]:
    """Ejecuta ``func(*job)`` para cada job y retorna los resultados en orden.

    Con ``workers <= 1`` se ejecuta en serie en el proceso actual.
    El orden del resultado no depende del orden de finalización.

    Args:
        func: Función de nivel de módulo (debe ser serializable).
        jobs: Argumentos posicionales de cada tarea.
        workers: Cantidad máxima de procesos.
        label: Texto para los mensajes de progreso.

    Returns:
        Lista de resultados alineada con ``jobs``.
    """
    total = len(jobs)
    if workers <= 1 or total <= 1:
        results = []
        for i, job in enumerate(jobs, 1):
            results.append(func(*job))
            logger.debug("%s: %d/%d", label, i, total)
        return results

    results: list[Any] = [None] * total
    done = 0
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = {ex.submit(func, *job): idx for idx, job in enumerate(jobs)}
        for fut in as_completed(futures):
            idx = futures[fut]
            results[idx] = fut.result()
            done += 1
            if done % max(1, total // 10) == 0:
                logger.info("%s: %d%% completado", label, 100 * done // total)
    return results
