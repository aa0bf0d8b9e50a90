"""Sim-to-sim spectral skill transfer and residual skill discovery."""
