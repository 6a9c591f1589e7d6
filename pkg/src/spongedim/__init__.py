"""Exact dimension theory of random statistically self-affine Sierpinski sponges."""

from ._core import BACKEND
from .dims import *  # noqa: F401,F403
from .errors import BudgetExceeded, ContractError, DegenerateError, ModelError, SpongeError
from .measures import *  # noqa: F401,F403
from .model import *  # noqa: F401,F403
from .modelfile import load_model, model_to_json, parse_model
from .oracle import *  # noqa: F401,F403
from .pressure import *  # noqa: F401,F403
from .sim import *  # noqa: F401,F403

__version__ = "0.1.0"
