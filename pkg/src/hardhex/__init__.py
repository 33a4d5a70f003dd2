"""Hard-core (hard-hexagon) Metropolis dynamics on 2K x 3L triangular tori."""

__version__ = "0.1.0"

from .lattice import Grid, GridError, GridSpec, build_grid
from .config import Configuration, stable_configs
