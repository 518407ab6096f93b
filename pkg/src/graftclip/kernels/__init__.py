"""Hot kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when present; set the environment
variable ``GRAFTCLIP_PURE_PYTHON=1`` to force the numpy backend. Both
backends implement the same arithmetic and are interchangeable.
"""

import os

from . import reference

BACKEND = "python"
_impl = reference

if os.environ.get("GRAFTCLIP_PURE_PYTHON", "") != "1":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass

bilinear_resize = _impl.bilinear_resize
gelu = _impl.gelu
gelu_grad = _impl.gelu_grad
adamw_update = _impl.adamw_update

__all__ = ["BACKEND", "adamw_update", "bilinear_resize", "gelu", "gelu_grad"]
