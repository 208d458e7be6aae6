"""Kernel backend selection.

Two interchangeable backends provide the memory-bound per-iteration kernels
(mode unfolding/folding, masked projection, fused consensus update):

* ``compiled`` -- the Cython extension ``lrtc.kernels._compiled``, built by
  ``setup.py`` when Cython and a C compiler are available;
* ``numpy`` -- the pure-Python fallback in ``lrtc.kernels._numpy_backend``.

The compiled backend is picked at import when present.  Set the environment
variable ``LRTC_KERNELS`` to ``numpy`` or ``compiled`` to force one (forcing
``compiled`` raises if the extension is missing), or call :func:`use` at
runtime.  Both backends produce bit-identical outputs; switching only changes
speed.  Singular value decompositions are not part of this layer -- they run
in LAPACK through numpy in either case.
"""

import os

from . import _numpy_backend

try:
    from . import _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"numpy": _numpy_backend}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = None

unfold = None
fold = None
apply_mask = None
consensus_update = None


def available_backends():
    """Names of the backends importable in this environment."""
    return tuple(sorted(_BACKENDS))


def backend_name():
    """Name of the backend currently serving the kernel calls."""
    return _active.name


def get_backend(name):
    """Return the backend module for `name` ('numpy' or 'compiled')."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} not available; have {available_backends()}"
        ) from None


def use(name):
    """Switch the active backend. Not safe to call mid-solve."""
    global _active, unfold, fold, apply_mask, consensus_update
    mod = get_backend(name)
    _active = mod
    unfold = mod.unfold
    fold = mod.fold
    apply_mask = mod.apply_mask
    consensus_update = mod.consensus_update
    return mod


def _initial_backend():
    requested = os.environ.get("LRTC_KERNELS", "auto").strip().lower()
    if requested == "auto":
        return "compiled" if _compiled is not None else "numpy"
    if requested not in _BACKENDS:
        raise ImportError(
            f"LRTC_KERNELS={requested!r} but available backends are "
            f"{available_backends()}"
        )
    return requested


use(_initial_backend())
