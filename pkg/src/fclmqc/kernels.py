"""Backend selection for the annealing and MQC kernels.

The compiled extension is used when it has been built; otherwise the
pure-Python implementation is used. Set ``FCLMQC_BACKEND=python`` to force the
fallback. Both produce identical output for identical input.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("FCLMQC_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

anneal = _impl.anneal
combine = _impl.combine
combine_level = _impl.combine_level


def available_backends():
    names = {"python": _pykernels}
    try:
        from . import _ckernels
        names["cython"] = _ckernels
    except ImportError:
        pass
    return names
