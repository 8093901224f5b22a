"""
pncollapse: gravitational decoherence of rotating bodies.

Rigid bodies are modelled as point-mass clouds coupled to white noise in the
gravitoelectromagnetic potentials.  The package assembles the smeared noise
kernels, the resulting Lindblad generators (density, rotational and mixed
channels), a Monte-Carlo unravelling, closed-form decoherence rates and
order-of-magnitude estimators.
"""

__version__ = "0.1.0"

from .core_model import PointMassBody, SpinConfig, discretize_primitive, inertia_tensor, rotate_body  # noqa: E402
from .errors import PNCollapseError  # noqa: E402
from .noise_kernels import KernelSpec, assemble_kernel_matrix, check_tradeoff, saturating_DJ  # noqa: E402

__all__ = ["__version__", "PNCollapseError", "PointMassBody", "SpinConfig", "discretize_primitive",
           "inertia_tensor", "rotate_body", "KernelSpec", "assemble_kernel_matrix", "check_tradeoff",
           "saturating_DJ"]
