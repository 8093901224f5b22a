"""
Hot pairwise kernels with two interchangeable backends.

Every spatial double integral in the package reduces to a sum over point
pairs weighted by a radial profile ``g(r)``.  These sums are the runtime
bottleneck, so each kernel exists twice:

* a Numba ``@njit(parallel=True)`` loop version, and
* a pure-NumPy broadcasting version (chunked to bound memory).

The NumPy path is selected by setting ``PNCOLLAPSE_DISABLE_NUMBA=1`` before
import, or at runtime through :func:`set_backend`.  Row-parallel loops write
disjoint rows and partial sums are reduced serially, so results do not
depend on the thread count.

Radial profile families (``family`` code):

0  capped Coulomb      ``1 / max(r, sigma)``
1  Gaussian-smeared    ``erf(r / (2 sigma)) / r``, ``1 / (sigma sqrt(pi))`` at 0
2  tabulated           linear interpolation of ``(table_r, table_g)``,
                       clamped to the end values
"""

import math
import os

import numpy as np
from scipy.special import erf

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

COULOMB, GAUSSIAN, TABULATED = 0, 1, 2

_SQRT_PI = math.sqrt(math.pi)
_CHUNK = 512

_disabled = os.environ.get("PNCOLLAPSE_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")
_backend = "numba" if (HAVE_NUMBA and not _disabled) else "numpy"

if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # the portable layer; avoids probing for an optional TBB install
    numba.config.THREADING_LAYER = "workqueue"

if HAVE_NUMBA and os.environ.get("PNCOLLAPSE_THREADS"):
    # clamp to the pool size numba was started with
    numba.set_num_threads(max(1, min(int(os.environ["PNCOLLAPSE_THREADS"]), numba.config.NUMBA_NUM_THREADS)))


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch between ``"numba"`` and ``"numpy"`` kernels."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


# --------------------------------------------------------------------------
# NumPy implementations
# --------------------------------------------------------------------------

def _profile_np(r, sigma, family, tab_r, tab_g):
    r = np.asarray(r, dtype=float)
    if family == COULOMB:
        return 1.0 / np.maximum(r, sigma)
    if family == GAUSSIAN:
        out = np.empty_like(r)
        small = r < 1e-8 * sigma
        rs = r[~small]
        out[~small] = erf(rs / (2.0 * sigma)) / rs
        out[small] = 1.0 / (sigma * _SQRT_PI)
        return out
    return np.interp(r, tab_r, tab_g)


def _distances_np(pa, pb):
    d = pa[:, None, :] - pb[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def radial_matrix_np(pa, pb, sigma, family, tab_r, tab_g):
    out = np.empty((pa.shape[0], pb.shape[0]))
    for i0 in range(0, pa.shape[0], _CHUNK):
        r = _distances_np(pa[i0:i0 + _CHUNK], pb)
        out[i0:i0 + _CHUNK] = _profile_np(r, sigma, family, tab_r, tab_g)
    return out


def pair_sum_np(pa, wa, pb, wb, sigma, family, tab_r, tab_g):
    rows = np.empty(pa.shape[0])
    for i0 in range(0, pa.shape[0], _CHUNK):
        g = _profile_np(_distances_np(pa[i0:i0 + _CHUNK], pb), sigma, family, tab_r, tab_g)
        rows[i0:i0 + _CHUNK] = wa[i0:i0 + _CHUNK] * (g @ wb)
    return float(np.sum(rows))


def green_sum_np(src, weights, targets):
    out = np.empty((targets.shape[0], weights.shape[1]))
    for i0 in range(0, targets.shape[0], _CHUNK):
        inv_r = 1.0 / _distances_np(targets[i0:i0 + _CHUNK], src)
        out[i0:i0 + _CHUNK] = inv_r @ weights
    return out


def dressed_pair_sum_np(pos, tmat, sigma, family, tab_r, tab_g):
    g = radial_matrix_np(pos, pos, sigma, family, tab_r, tab_g)
    return np.einsum("ab,akp,bkq->pq", g, tmat, tmat)


# --------------------------------------------------------------------------
# Numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _profile_nb(r, sigma, family, tab_r, tab_g):
        if family == 0:
            return 1.0 / max(r, sigma)
        if family == 1:
            if r < 1e-8 * sigma:
                return 1.0 / (sigma * _SQRT_PI)
            return math.erf(r / (2.0 * sigma)) / r
        return np.interp(r, tab_r, tab_g)

    @njit(cache=True)
    def _dist_nb(pa, i, pb, j):
        dx = pa[i, 0] - pb[j, 0]
        dy = pa[i, 1] - pb[j, 1]
        dz = pa[i, 2] - pb[j, 2]
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    @njit(parallel=True, cache=True)
    def radial_matrix_nb(pa, pb, sigma, family, tab_r, tab_g):
        na, nb = pa.shape[0], pb.shape[0]
        out = np.empty((na, nb))
        for i in prange(na):
            for j in range(nb):
                out[i, j] = _profile_nb(_dist_nb(pa, i, pb, j), sigma, family, tab_r, tab_g)
        return out

    @njit(parallel=True, cache=True)
    def _pair_rows_nb(pa, wa, pb, wb, sigma, family, tab_r, tab_g):
        na, nb = pa.shape[0], pb.shape[0]
        rows = np.empty(na)
        for i in prange(na):
            acc = 0.0
            for j in range(nb):
                acc += wb[j] * _profile_nb(_dist_nb(pa, i, pb, j), sigma, family, tab_r, tab_g)
            rows[i] = wa[i] * acc
        return rows

    def pair_sum_nb(pa, wa, pb, wb, sigma, family, tab_r, tab_g):
        return float(np.sum(_pair_rows_nb(pa, wa, pb, wb, sigma, family, tab_r, tab_g)))

    @njit(parallel=True, cache=True)
    def green_sum_nb(src, weights, targets):
        nt, ns, k = targets.shape[0], src.shape[0], weights.shape[1]
        out = np.zeros((nt, k))
        for i in prange(nt):
            for j in range(ns):
                inv_r = 1.0 / _dist_nb(targets, i, src, j)
                for c in range(k):
                    out[i, c] += weights[j, c] * inv_r
        return out

    @njit(parallel=True, cache=True)
    def _dressed_rows_nb(pos, tmat, sigma, family, tab_r, tab_g):
        n = pos.shape[0]
        part = np.zeros((n, 3, 3))
        for a in prange(n):
            # acc_kq = sum_b g_ab T_b[k, q]
            acc = np.zeros((3, 3))
            for b in range(n):
                g = _profile_nb(_dist_nb(pos, a, pos, b), sigma, family, tab_r, tab_g)
                for k in range(3):
                    for q in range(3):
                        acc[k, q] += g * tmat[b, k, q]
            for p in range(3):
                for q in range(3):
                    s = 0.0
                    for k in range(3):
                        s += tmat[a, k, p] * acc[k, q]
                    part[a, p, q] = s
        return part

    def dressed_pair_sum_nb(pos, tmat, sigma, family, tab_r, tab_g):
        return np.sum(_dressed_rows_nb(pos, tmat, sigma, family, tab_r, tab_g), axis=0)


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------

def _prep(points):
    return np.ascontiguousarray(points, dtype=np.float64)


def _table(tab_r, tab_g):
    if tab_r is None:
        return np.zeros(1), np.zeros(1)
    return _prep(tab_r), _prep(tab_g)


def radial_matrix(pa, pb, sigma, family=COULOMB, tab_r=None, tab_g=None):
    """``out[i, j] = g(|pa_i - pb_j|)``."""
    args = (_prep(pa), _prep(pb), float(sigma), int(family), *_table(tab_r, tab_g))
    if _backend == "numba":
        return radial_matrix_nb(*args)
    return radial_matrix_np(*args)


def pair_sum(pa, wa, pb, wb, sigma, family=COULOMB, tab_r=None, tab_g=None):
    """``sum_ij wa_i wb_j g(|pa_i - pb_j|)`` without storing the matrix."""
    args = (_prep(pa), _prep(wa), _prep(pb), _prep(wb), float(sigma), int(family),
            *_table(tab_r, tab_g))
    if _backend == "numba":
        return pair_sum_nb(*args)
    return pair_sum_np(*args)


def green_sum(src, weights, targets):
    """``out[t, c] = sum_i weights[i, c] / |targets_t - src_i|`` (unregularized)."""
    w = _prep(weights)
    if w.ndim == 1:
        w = w[:, None]
    args = (_prep(src), w, _prep(targets))
    if _backend == "numba":
        return green_sum_nb(*args)
    return green_sum_np(*args)


def dressed_pair_sum(pos, tmat, sigma, family=COULOMB, tab_r=None, tab_g=None):
    """``sum_ab g_ab T_a^T T_b`` for per-point 3x3 dressing matrices ``T``."""
    args = (_prep(pos), _prep(tmat), float(sigma), int(family), *_table(tab_r, tab_g))
    if _backend == "numba":
        return dressed_pair_sum_nb(*args)
    return dressed_pair_sum_np(*args)
