"""Configuración común de pytest para SNR-LIF."""

import sys
from pathlib import Path

import pytest

# Asegurar que el directorio raíz esté en el path
ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Ejecutar tests lentos")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: reproducciones largas (requieren --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="usar --runslow para ejecutar")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
