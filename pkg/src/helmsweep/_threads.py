"""BLAS threadpool control.

The factorizations issue thousands of small BLAS/LAPACK calls; letting the
threadpool fan each one out to multiple cores costs far more in wakeup and
spin-wait than the kernels gain (25x observed on a 2-core box).  Hot entry
points therefore pin BLAS to one thread for their duration.
"""

from __future__ import annotations

from contextlib import contextmanager, nullcontext

try:
    from threadpoolctl import threadpool_limits

    def limit_blas_threads(n=1):
        return threadpool_limits(limits=n, user_api="blas")

except ImportError:  # pragma: no cover - threadpoolctl ships with scipy stacks

    def limit_blas_threads(n=1):
        return nullcontext()
