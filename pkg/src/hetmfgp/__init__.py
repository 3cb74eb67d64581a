"""Heterogeneous-input multi-fidelity Gaussian-process surrogates for melt-pool geometry."""
from .analysis import (EllipseBoundary, MetricsReport, SobolIndices, ellipse_boundary, pearson,
                       r_squared, relative_l2, sigma_avg, sobol_indices)
from .doe import (HF_WINDOW, LF_WINDOW, Dataset, Design, ParameterWindow, derive_seed,
                  full_factorial, generate_dataset, lhs_sample)
from .gp import GpConfig, GpModel, KernelParams, fit_gp, log_marginal_likelihood, matern52
from .imc import AffineMap, ImcConfig, ImcResult, apply_map, fit_imc, imc_loss
from .kernels import BACKEND
from .mfgp import HetMfgpModel, MfgpConfig, mfgp_predict, train_mfgp
from .thermal import (GridSpec, HfInput, HfModel, LaserParams, LfInput, LfModel,
                      MaterialProperties, MeltPoolGeometry, PowderStream, calibrate_lf,
                      hf_temperature, lf_temperature, melt_pool_geometry)

__version__ = "0.1.0"
