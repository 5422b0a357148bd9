"""Módulo de tests de SNR-LIF."""
