__all__ = (  # noqa: F405
    "Ball",
    "Body",
    "Ellipsoid",
    "LinearMap",
    "Polytope",
    "SupportSampled",
    "build_centroid_body",
    "centroid_support",
    "cli",
    "make_profile",
    "norm_solve",
    "orlicz_lorentz_norm",
    "steiner_symmetrize",
)

from .bodies import Ball, Body, Ellipsoid, LinearMap, Polytope, SupportSampled
from .centroid import build_centroid_body, centroid_support
from .olcb import *  # noqa: F403
from .orlicz import norm_solve, orlicz_lorentz_norm
from .rearrange import make_profile
from .steiner import steiner_symmetrize
