"""Backend selection for the two hot loops (plant integration, ADMM).

Compiled Cython modules are preferred when importable; the pure-Python twins
are used otherwise. Set KOOPCAR_PURE_PYTHON=1 to force the fallback.
"""

import os

_force_pure = os.environ.get("KOOPCAR_PURE_PYTHON", "") not in ("", "0")

if not _force_pure:
    try:
        from ._plant_cy import rollout as plant_rollout
        PLANT_BACKEND = "compiled"
    except ImportError:
        _plant_missing = True
    else:
        _plant_missing = False
    try:
        from ._qp_cy import admm_iterate
        QP_BACKEND = "compiled"
    except ImportError:
        _qp_missing = True
    else:
        _qp_missing = False
else:
    _plant_missing = True
    _qp_missing = True

if _force_pure or _plant_missing:
    from .plant_py import rollout as plant_rollout
    PLANT_BACKEND = "python"
if _force_pure or _qp_missing:
    from .qp_py import admm_iterate
    QP_BACKEND = "python"

__all__ = ["plant_rollout", "admm_iterate", "PLANT_BACKEND", "QP_BACKEND"]
