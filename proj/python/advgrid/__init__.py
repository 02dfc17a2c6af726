"""Black-box grid perturbation attack against person detectors."""

from ._advgrid import *  # noqa: F401,F403
from ._advgrid import protocol  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
