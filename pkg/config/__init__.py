"""Módulo de configuración de SNR-LIF."""
