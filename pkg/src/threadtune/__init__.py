"""threadtune: black-box tuning of stepped integer parameter spaces.

Searches a bounded grid of integer parameters (thread counts, pool sizes)
for the assignment that maximizes a measured throughput score. The score
comes either from running a user command and scraping a number out of its
output, or from a built-in analytic model used for tests and demos.
"""

__version__ = "0.1.0"

from threadtune.objective import EvalCache, EvalStatus, Evaluation, Measurement
from threadtune.space import ParamSpec, Point, SearchSpace, parse_param_spec

__all__ = [
    "EvalCache",
    "EvalStatus",
    "Evaluation",
    "Measurement",
    "ParamSpec",
    "Point",
    "SearchSpace",
    "parse_param_spec",
    "__version__",
]
