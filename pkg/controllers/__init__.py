"""Módulo de controladores de SNR-LIF."""
