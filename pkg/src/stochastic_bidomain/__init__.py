__version__ = "0.1.0"

from stochastic_bidomain.bidomain_op import build_operator
from stochastic_bidomain.mesh import make_grid

from . import experiments

__all__ = ["__version__", "build_operator", "experiments", "make_grid"]
