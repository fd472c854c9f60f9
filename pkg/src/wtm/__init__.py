"""Waveform Transmission Method: distributed waveform relaxation for SPD ODE systems."""

__version__ = "0.1.0"
