"""Simulation and analysis toolkit for limsup laws of selfsimilar additive processes."""

__version__ = "0.1.0"

from . import errors, g_toolkit, levy_core, limsup_lab, rng, sampler, tail_analysis  # noqa: E402
from .errors import Inconclusive, NotConstructible, SatoError  # noqa: E402
from .levy_core import ProcessSpec  # noqa: E402
from .limsup_lab import predict_C, run_experiment  # noqa: E402

__all__ = [
    "__version__", "errors", "g_toolkit", "levy_core", "limsup_lab", "rng", "sampler", "tail_analysis",
    "Inconclusive", "NotConstructible", "SatoError", "ProcessSpec", "predict_C", "run_experiment",
]
