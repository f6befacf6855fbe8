"""
Coupled-channel scattering of ultracold polar molecules in a quasi-2D trap.

Short-range physics enters through quantum-defect boundary conditions
parameterized by the phase parameter ``s`` and the reactivity ``y``; the
long-range van der Waals, dipole-dipole and trap interactions are treated
exactly in a spherical partial-wave basis.
"""

__version__ = "0.1.0"

from .params import ModelParams, NumericsParams, Statistics, derive_scales, validate  # noqa: E402
from .solver import QuasiTwoD, solve  # noqa: E402

__all__ = ["ModelParams", "NumericsParams", "Statistics", "derive_scales", "validate", "QuasiTwoD", "solve", "__version__"]
