"""Gevrey-class generalized functions on sampled grids.

Nets of smooth functions indexed by a ladder of eps values are classified as
negligible, moderate or non-moderate; distributions are embedded by Gevrey
mollifiers; spectral decay fits give singular cones, wave-front estimates and
a numerical check of the product wave-front inclusion.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    EpsilonLadder,
    GeneralizedScalar,
    GevreyOrder,
    Grid,
    GrowthVerdict,
    NetClass,
    SampledNet,
    classify_net,
    classify_scalar,
    growth_indicator,
    net_add,
    net_mul,
    net_scale,
    spectral_derivative,
)
from .embedding import DistributionSpec, embed_distribution  # noqa: E402
from .microlocal import ConeSet, sigma_cone, sigma_localized, sing_supp, wavefront  # noqa: E402
from .mollifier import build_gevrey_bump, build_mollifier, default_mollifier, mollifier_net  # noqa: E402
from .product import cone_separation, cone_sum, hormander_check, wf_sum  # noqa: E402
from .spectral import DirectionBins, Thresholds, fit_decay, fourier_net, regularity_test  # noqa: E402

__all__ = [
    "EpsilonLadder", "GeneralizedScalar", "GevreyOrder", "Grid", "GrowthVerdict", "NetClass", "SampledNet",
    "classify_net", "classify_scalar", "growth_indicator", "net_add", "net_mul", "net_scale",
    "spectral_derivative", "DistributionSpec", "embed_distribution", "ConeSet", "sigma_cone",
    "sigma_localized", "sing_supp", "wavefront", "build_gevrey_bump", "build_mollifier", "default_mollifier",
    "mollifier_net", "cone_separation", "cone_sum", "hormander_check", "wf_sum", "DirectionBins",
    "Thresholds", "fit_decay", "fourier_net", "regularity_test",
]
