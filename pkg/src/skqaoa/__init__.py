"""Infinite-size QAOA energies for the Sherrington-Kirkpatrick model.

Two routes to the same energy are provided: an exact bitstring iteration that
is exponential in depth, and a spin-boson tensor-train simulation that scales
polynomially.  Finite-size statevector tools, an angle optimizer and scaling
fits sit on top.
"""

__version__ = "0.1.0"

from .gmatrix import Angles, GMatrix, read_angles, write_angles  # noqa: E402
from .exact import nu_exact  # noqa: E402
from .spinboson import nu_mps  # noqa: E402
from .mps import TruncationPolicy  # noqa: E402

__all__ = ["__version__", "Angles", "GMatrix", "read_angles", "write_angles",
           "nu_exact", "nu_mps", "TruncationPolicy"]
