"""Discrete sequences in complex manifolds: tameness checks at prefix
scale, the explicit automorphisms that move them, and seeded Monte-Carlo
estimates of the genericity statements."""

from .core import (
    AmbientSpace,
    Composite,
    DiscreteSequence,
    GeneratorInfo,
    HeightAssignment,
    IdentityAut,
    Verdict,
    discreteness_check,
    exhaust_eval,
    load_sequence,
    properness_check,
    save_sequence,
    sl_matrix,
    zeta0_reduce,
)

__version__ = "0.1.0"

__all__ = [
    "AmbientSpace",
    "Composite",
    "DiscreteSequence",
    "GeneratorInfo",
    "HeightAssignment",
    "IdentityAut",
    "Verdict",
    "discreteness_check",
    "exhaust_eval",
    "load_sequence",
    "properness_check",
    "save_sequence",
    "sl_matrix",
    "zeta0_reduce",
    "__version__",
]
