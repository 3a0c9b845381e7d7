"""Library for small-gain analysis of infinite networks.

Provides gain operators on bounded sequences, spectral-radius estimates and
points of strict decay, gain-graph walk statistics, composite ISS Lyapunov
functions and the simulation of truncated networks.
"""

from .config import *
from .format import *
from .gain_graph import *
from .gain_operator import *
from .lyapunov import *
from .network_sim import *
from .sequence_space import *
from .small_gain import *

__author__ = "Giesela Inc."
__version__ = "0.1.0"
