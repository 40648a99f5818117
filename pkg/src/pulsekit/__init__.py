"""Traveling pulses with oscillatory tails: simulation, continuation, reduction.

Submodules load lazily so the command line can pin the BLAS thread pool
before numpy is first imported.
"""
from __future__ import annotations

from .errors import (ArnoldiBreakdown, BlowUp, BudgetExceeded, ConfigInvalid,
                     DeadEnd, FellBack, MissingInput, NoConvergence, NoMatch,
                     NoPulse, NoFiniteWavenumber, PulsekitError,
                     SignConditionViolated, SingularPhaseCondition,
                     TailTooShort, TauOutOfRange)

__version__ = "0.1.0"

_SUBMODULES = ("model", "spectral", "shooting", "continuation", "reduced",
               "outcomes", "io", "cli")


def __getattr__(name: str):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
