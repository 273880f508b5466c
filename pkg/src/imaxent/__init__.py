"""Indirect maximum entropy (iMaxEnt) bandwidth selection."""

from .criteria import (CvMWeight, anderson_darling, cue_objective, cvm_beta, neyman_statistic,
                       sarda_cv)
from .kernels import (KernelModel, PitVector, Sample, epanechnikov_kernel, gaussian_kernel,
                      gaussian_var_v1, get_kernel, kde, kdfe, loo_pits)
from .mixtures import min_mise_bandwidths, mixture, mixture_sample
from .permutohedron import contains, marginal_density_exact, permutohedron_spec, volume_postnikov
from .reference import MarginalReference, build_reference, cached_reference, cdf_lookup
from .select import BandwidthEstimate, m2_gaussian_bandwidth, minimize, profile, select
from .simulate import SimConfig, SimResult, run_simulation

__version__ = "0.1.0"

__all__ = [
    "CvMWeight", "anderson_darling", "cue_objective", "cvm_beta", "neyman_statistic", "sarda_cv",
    "KernelModel", "PitVector", "Sample", "epanechnikov_kernel", "gaussian_kernel",
    "gaussian_var_v1", "get_kernel", "kde", "kdfe", "loo_pits",
    "min_mise_bandwidths", "mixture", "mixture_sample",
    "contains", "marginal_density_exact", "permutohedron_spec", "volume_postnikov",
    "MarginalReference", "build_reference", "cached_reference", "cdf_lookup",
    "BandwidthEstimate", "m2_gaussian_bandwidth", "minimize", "profile", "select",
    "SimConfig", "SimResult", "run_simulation",
]
