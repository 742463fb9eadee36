"""Backend selection for the hot kernels.

Every kernel exists twice: a numba @njit loop version and a vectorized
pure-numpy version with the same signature and the same counter-based
randomness layout, so the two backends produce the same results.  The
active backend is numba when importable, unless the environment variable
KNOCKFORGE_NUMBA is set to 0/false/off/numpy.

benchmarks/bench_backends.py times the two implementations side by side.
"""

from __future__ import annotations

import os

try:
    import numba  # noqa: F401

    NUMBA_IMPORTABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_IMPORTABLE = False

_flag = os.environ.get("KNOCKFORGE_NUMBA", "").strip().lower()
if _flag in ("0", "false", "off", "numpy"):
    NUMBA_ENABLED = False
elif _flag in ("1", "true", "on", "numba"):
    if not NUMBA_IMPORTABLE:
        raise ImportError("KNOCKFORGE_NUMBA requested numba but it is not importable")
    NUMBA_ENABLED = True
else:
    NUMBA_ENABLED = NUMBA_IMPORTABLE


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


from . import kernels_numpy as _np_impl  # noqa: E402

if NUMBA_IMPORTABLE:
    from . import kernels_numba as _nb_impl  # noqa: E402
else:  # pragma: no cover
    _nb_impl = None

_active = _nb_impl if NUMBA_ENABLED else _np_impl

mgs_orthonormalize = _active.mgs_orthonormalize
lasso_cd_path = _active.lasso_cd_path
logistic_cd_path = _active.logistic_cd_path
ising_gibbs_sweeps = _active.ising_gibbs_sweeps
ising_cftp = _active.ising_cftp
mh_table_chain = _active.mh_table_chain
mh_table_final_many = _active.mh_table_final_many


def implementations():
    """(name -> module) map of the available kernel implementations."""
    impls = {"numpy": _np_impl}
    if NUMBA_IMPORTABLE:
        impls["numba"] = _nb_impl
    return impls
