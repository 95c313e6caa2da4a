"""Hot-kernel backend selection.

Prefers the compiled extension (churnforge._ckernels) and falls back to the
pure numpy twins in churnforge.kernels.pure. Set CHURNFORGE_PURE=1 to force
the fallback. Both backends are bit-identical; see benchmarks/bench_kernels.py
for the speed comparison.
"""

import os

from . import pure

if os.environ.get("CHURNFORGE_PURE") == "1":
    _impl = pure
else:
    try:
        from churnforge import _ckernels as _impl
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND


def im2col(x, kh, kw, sh, sw):
    return _impl.im2col(x, kh, kw, sh, sw)


def col2im(cols, B, C, H, W, kh, kw, sh, sw):
    return _impl.col2im(cols, B, C, H, W, kh, kw, sh, sw)


def split_gains(y_sorted, cand_pos, criterion):
    return _impl.split_gains(y_sorted, cand_pos, criterion)
