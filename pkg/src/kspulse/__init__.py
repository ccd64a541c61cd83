"""Traveling pulses of a chemotaxis system with nonlinear gradient sensing.

Singular orbit construction on the critical manifold, machine-checked
trapping regions, epsilon-continuation, essential-spectrum instability and
a direct PDE cross-check.
"""

__version__ = "0.1.0"

from .errors import KSPulseError
from .model import ModelSpec, WaveParams, build_model, resolve_states, wave_params

__all__ = ["KSPulseError", "ModelSpec", "WaveParams", "build_model", "resolve_states", "wave_params", "__version__"]
