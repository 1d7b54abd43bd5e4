"""Numerical laboratory for reconstructing distributions from coherent germs on the dyadic torus."""

from .coherence import CoherenceReport, coherence_coefficients, fit_alpha_A, h_field
from .errors import ReconError
from .fields import MultiscaleField
from .germ import (
    Germ,
    TwoParamProcess,
    constant_germ,
    incoherent_germ,
    sewing_germ,
    taylor_germ,
)
from .grid import DyadicGrid, SampledFunction, convolve, dilate_translate, quadrature, sample
from .mollifier import MollifierStack, build_stack, check_telescope_identity, moment_cancel
from .quasinorm import QuasinormSpec, apply, scaling_check
from .reconstruct import error_field, verify_theorem_2_1
from .sewing import b_norm, bbar_norm, chi_partition_check, sew, sewing_bound

__version__ = "0.1.0"

__all__ = [
    "CoherenceReport", "DyadicGrid", "Germ", "MollifierStack", "MultiscaleField",
    "QuasinormSpec", "ReconError", "SampledFunction", "TwoParamProcess", "apply",
    "b_norm", "bbar_norm", "build_stack", "check_telescope_identity", "chi_partition_check",
    "coherence_coefficients", "constant_germ", "convolve", "dilate_translate", "error_field",
    "fit_alpha_A", "h_field", "incoherent_germ", "moment_cancel", "quadrature",
    "sample", "scaling_check", "sew", "sewing_bound", "sewing_germ",
    "taylor_germ", "verify_theorem_2_1",
]
