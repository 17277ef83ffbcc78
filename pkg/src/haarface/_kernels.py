"""Select the scan kernel backend at import time.

The compiled extension is used when importable; set ``HAARFACE_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
scan_scale = _pykernels.scan_scale

if os.environ.get("HAARFACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        scan_scale = _ckernels.scan_scale

available = {"python": _pykernels.scan_scale}
try:
    from . import _ckernels as _c

    available["cython"] = _c.scan_scale
except ImportError:
    pass
