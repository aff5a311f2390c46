"""S-shaped nonparametric least squares regression."""
from .cones import ConeSpec, kkt_check
from .core import (PiecewiseLinearFit, RegressionData, SShapeFit, diagnostics, evaluate,
                   is_sshaped, rss)
from .homotopy import HomotopyError, project_cone, project_segment
from .solver import SolveMethod, fit_fixed_inflection, fit_sshape, rss_profile

__all__ = [
    "ConeSpec", "HomotopyError", "PiecewiseLinearFit", "RegressionData", "SShapeFit",
    "SolveMethod", "diagnostics", "evaluate", "fit_fixed_inflection", "fit_sshape",
    "is_sshaped", "kkt_check", "project_cone", "project_segment", "rss", "rss_profile",
]
__version__ = "0.1.0"
