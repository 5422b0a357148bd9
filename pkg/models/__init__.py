"""Módulo de modelos de datos de SNR-LIF."""
