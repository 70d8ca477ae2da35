"""Slit Sierpinski carpets at finite generation: exact geodesic metrics,
measures, curve-family moduli, and the shear quasisymmetry group of the
double, with a CLI and SVG rendering on top."""

from .dyadic import Dyadic, as_dyadic
from .carpet import (
    BACK,
    FRONT,
    LEFT,
    RIGHT,
    CarpetPoint,
    Slit,
    SlitSchedule,
    StripPoint,
    fold,
    locate,
    make_point,
    project,
    slits_up_to,
    unfold,
)
from .geodesics import (
    LimitSequence,
    Polyline,
    ball_distances,
    distance_double,
    distance_level,
    distance_limit,
    is_vertical,
)

__version__ = "0.1.0"
