"""Relaxation of a frequency-modulated spin-1/2: Redfield, master-equation,
Kraus and Bloch descriptions, and relaxation control by modulation."""

__version__ = "0.1.0"
