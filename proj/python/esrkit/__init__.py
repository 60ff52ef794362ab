"""Model, simulate, and fit on-chip ESR spectra of dilute surface spins.

Thin wrapper over the compiled ``_esrkit`` extension.  The heavy lifting
(exact spin diagonalization, Voigt/Lorentzian resonator loads, trust-region
fits) lives in C++; this package re-exports the bound entry points.
"""

try:
    from ._esrkit import *  # noqa: F401,F403  (installed wheel layout)
    from . import _esrkit as _impl
except ImportError:
    # Build-tree layout: the extension sits on sys.path next to the package.
    from _esrkit import *  # noqa: F401,F403
    import _esrkit as _impl

__version__ = "0.1.0"
__all__ = [name for name in dir(_impl) if not name.startswith("_")]
