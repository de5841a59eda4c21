"""glibc allocator tuning for the training loop.

Each step allocates a few dozen ~1 MB temporaries.  Above glibc's default
mmap threshold every one of them is mapped and unmapped, and the resulting
page faults cost more than the arithmetic.  Raising the threshold keeps them
on the heap.  No-op off glibc or when VDM_NO_MALLOC_TUNING is set.
"""

import ctypes
import ctypes.util
import os
import sys

_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3
_SIZE = 256 * 1024 * 1024

_done = False


def tune_allocator():
    global _done
    if _done:
        return
    _done = True
    if not sys.platform.startswith("linux") or os.environ.get("VDM_NO_MALLOC_TUNING"):
        return
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        for param in (_M_MMAP_THRESHOLD, _M_TRIM_THRESHOLD, _M_TOP_PAD):
            libc.mallopt(param, _SIZE)
    except (OSError, AttributeError):
        pass
