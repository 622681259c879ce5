"""Set-associative LRU cache model over the kernel selected at import.

The per-access kernel ships twice: a Cython extension (built at install
time) and a pure-Python fallback. Import prefers the extension; set
``MR32_PURE_PYTHON=1`` to force the fallback. ``KERNEL_IMPL`` names the one
in use. ``benchmarks/bench_cache.py`` compares their throughput.
"""

from __future__ import annotations

import os

from .hw import CacheConfig

if os.environ.get("MR32_PURE_PYTHON"):
    from . import _cachekernel_py as _kernel
else:
    try:
        from . import _cachekernel as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _cachekernel_py as _kernel

CacheKernel = _kernel.CacheKernel
HIT = _kernel.HIT
EVICTED_DIRTY = _kernel.EVICTED_DIRTY
KERNEL_IMPL: str = _kernel.IMPL


class CacheModel:
    """One cache instance: address mapping plus the LRU kernel."""

    def __init__(self, cfg: CacheConfig, kernel_cls=None):
        self.cfg = cfg
        self.sets = cfg.sets
        self.line = cfg.line
        self._set_mask = cfg.sets - 1
        self._line_shift = cfg.line.bit_length() - 1
        self.kernel = (kernel_cls or CacheKernel)(cfg.sets, cfg.assoc)

    def access(self, addr: int, is_write: bool) -> int:
        """Access one byte address; returns kernel flags (HIT/EVICTED_DIRTY)."""
        line_addr = addr >> self._line_shift
        return self.kernel.access(line_addr & self._set_mask, line_addr, is_write)

    def line_of(self, addr: int) -> int:
        return addr >> self._line_shift

    def set_of(self, addr: int) -> int:
        return (addr >> self._line_shift) & self._set_mask
