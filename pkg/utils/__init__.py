"""Módulo de utilidades de SNR-LIF."""
