"""sgnet is a command line interface for small-gain analysis of infinite networks."""

import libsgnet

__author__ = libsgnet.__author__
__version__ = libsgnet.__version__
