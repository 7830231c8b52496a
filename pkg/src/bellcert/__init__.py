"""Exact certificates for Bell nonlocality: LP bounds, local strategies,
functional transformations, corruption-based functionals and quantum checks."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BOT,
    BellFunctional,
    DistributionFamily,
    Scenario,
    chsh_functional,
    evaluate,
    is_nonsignaling,
    pr_box,
    uniform_distribution,
)
from .bounds import eff, eff_eps, nu, nu_eps  # noqa: E402
from .local import is_local, max_bell_over_ldet  # noqa: E402

__all__ = [
    "BOT", "BellFunctional", "DistributionFamily", "Scenario", "chsh_functional", "evaluate",
    "is_nonsignaling", "pr_box", "uniform_distribution", "eff", "eff_eps", "nu", "nu_eps",
    "is_local", "max_bell_over_ldet", "__version__",
]
