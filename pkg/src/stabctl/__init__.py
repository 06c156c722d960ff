"""Discounted augmented control systems: equilibria, assumption audits and basin maps."""

from .augmented import AugSystem, ControlMode
from .vector_field import BvpField, BvpParams, CircleField, PlanarField, bvp_field

__all__ = ["AugSystem", "BvpField", "BvpParams", "CircleField", "ControlMode", "PlanarField",
           "bvp_field"]
__version__ = "0.1.0"
