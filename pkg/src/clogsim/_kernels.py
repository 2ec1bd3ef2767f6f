"""Hot numerical kernels, JIT-compiled when numba is available.

Two inner loops dominate a simulation run: the aggregation right-hand
side evaluated at every quadrature point of every time step, and the
block-tridiagonal solve of the coupled implicit step.  Both are written
as plain-numpy functions and wrapped with ``numba.njit`` unless numba is
missing or the environment variable ``CLOGSIM_NO_NUMBA`` is set to a
truthy value (``1``, ``true``, ``yes``), in which case the pure-numpy
versions are used unchanged.  ``benchmarks/bench_kernels.py`` compares
the two paths.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    HAS_NUMBA = False

_FLAG = os.environ.get("CLOGSIM_NO_NUMBA", "").strip().lower()
NUMBA_ACTIVE = HAS_NUMBA and _FLAG not in ("1", "true", "yes")


def _smoluchowski_rates_impl(u, ka, kb, full_loss, out):
    """Aggregation rates for all points of a batch.

    u:   (P, N) concentrations of size classes 1..N at P points
    ka:  (N, N) aggregation efficiencies, symmetric
    kb:  (N, N) collision kernel, symmetric
    full_loss: loss sums run over all partners (mass leaks to clusters
        larger than N); otherwise partners are capped at N - k so that
        sum_k k*R_k vanishes identically
    out: (P, N) filled with the rates
    """
    P, N = u.shape
    for p in range(P):
        for k in range(N):
            gain = 0.0
            # pairs (i+1) + (j+1) == k+1, zero-based i + j == k - 1
            for i in range(k):
                j = k - 1 - i
                gain += 0.5 * ka[i, j] * kb[i, j] * u[p, i] * u[p, j]
            top = N if full_loss else N - (k + 1)
            loss = 0.0
            for i in range(top):
                loss += ka[k, i] * kb[k, i] * u[p, i]
            out[p, k] = gain - u[p, k] * loss
    return out


def _block_tridiag_solve_impl(sub, diag, sup, rhs):
    """Thomas elimination for a block-tridiagonal system.

    sub[j] couples block row j to j-1 (sub[0] ignored), diag[j] is the
    j-th diagonal block, sup[j] couples j to j+1 (sup[-1] ignored).
    Returns x with rhs.shape.  No pivoting across blocks: the diagonal
    blocks of the implicit step are strictly dominant for admissible dt.
    """
    m, n = rhs.shape
    cp = np.zeros((m, n, n))
    dp = np.zeros((m, n))
    cp[0] = np.linalg.solve(diag[0], sup[0])
    dp[0] = np.linalg.solve(diag[0], rhs[0])
    for j in range(1, m):
        denom = diag[j] - np.dot(sub[j], cp[j - 1])
        if j < m - 1:
            cp[j] = np.linalg.solve(denom, sup[j])
        dp[j] = np.linalg.solve(denom, rhs[j] - np.dot(sub[j], dp[j - 1]))
    x = np.zeros((m, n))
    x[m - 1] = dp[m - 1]
    for j in range(m - 2, -1, -1):
        x[j] = dp[j] - np.dot(cp[j], x[j + 1])
    return x


# Pure-numpy entry points (always available, used by the benchmark and
# the cross-path equivalence tests).
smoluchowski_rates_py = _smoluchowski_rates_impl
block_tridiag_solve_py = _block_tridiag_solve_impl

if NUMBA_ACTIVE:
    smoluchowski_rates = njit(_smoluchowski_rates_impl)
    block_tridiag_solve = njit(_block_tridiag_solve_impl)
else:
    smoluchowski_rates = _smoluchowski_rates_impl
    block_tridiag_solve = _block_tridiag_solve_impl
