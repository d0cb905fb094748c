"""Kernel backend selection.

Numba-compiled scalar kernels are used by default. Setting the
environment variable ``COOPNMPC_NO_NUMBA`` to a non-empty value other
than ``0`` (before import) selects the pure-numpy fallback, which is
also used automatically when numba cannot be imported.
"""
import os

_flag = os.environ.get("COOPNMPC_NO_NUMBA", "").strip()
NUMBA_DISABLED = _flag not in ("", "0")

if NUMBA_DISABLED:
    from . import kernels_numpy as impl
else:
    try:
        from . import kernels_numba as impl
    except ImportError:
        from . import kernels_numpy as impl

BACKEND = impl.BACKEND_NAME

curvature_value = impl.curvature_value
rhs_single = impl.rhs_single
rk4_step_arr = impl.rk4_step_arr
rk4_step_jac = impl.rk4_step_jac
constraint_residuals = impl.constraint_residuals
project_box = impl.project_box
objective_and_grad = impl.objective_and_grad
