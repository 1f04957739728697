"""Hot numerical kernels with a JIT path and a pure-NumPy fallback.

Two loops dominate every large run: the column reduction of a filtered
boundary matrix over F2, and pairwise segment-crossing counts between long
polylines.  Both carry a ``numba``-compiled implementation and an equivalent
interpreted implementation.  The fallback is selected either automatically
(``numba`` missing) or explicitly by setting the environment variable
``BARLAB_DISABLE_NUMBA=1`` before import; individual calls may also force a
backend, which is what ``benchmarks/bench_kernels.py`` does to time the two
paths against each other.

Conventions for the reduction kernel
------------------------------------
Columns arrive in filtration order as a CSR triple ``(col_ptr, col_rows)``
with ``col_rows`` ascending inside each column.  Row indices live in
``[0, n_rows)`` and are themselves assigned in filtration order, so the last
entry of a column is its pivot candidate.  ``skip`` marks columns known to
reduce to zero (the clearing optimisation); they are not touched.  The result
is one pivot row per column, ``-1`` for columns that reduce to zero.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("BARLAB_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on",
)

try:  # pragma: no cover - exercised implicitly by every import
    if _DISABLED:
        raise ImportError("numba disabled by BARLAB_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        """No-op decorator stand-in when the JIT path is unavailable."""

        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


def backend_name() -> str:
    """Name of the default kernel backend for manifests and benchmarks."""
    return "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# boundary-matrix reduction over F2
# ---------------------------------------------------------------------------


@njit(cache=True)
def _reduce_jit(col_ptr, col_rows, n_rows, skip):  # pragma: no cover - jitted
    nc = col_ptr.size - 1
    low = np.full(nc, -1, dtype=np.int32)
    owner = np.full(n_rows, -1, dtype=np.int32)

    # reduced columns, stored back-to-back; grows by doubling
    cap = col_rows.size * 2 + 64
    buf = np.empty(cap, dtype=np.int32)
    sptr = np.zeros(nc + 1, dtype=np.int64)

    # scratch: a column never holds more than n_rows distinct entries
    work = np.empty(n_rows, dtype=np.int32)
    merged = np.empty(n_rows, dtype=np.int32)

    used = np.int64(0)
    for j in range(nc):
        sptr[j] = used
        if skip[j]:
            sptr[j + 1] = used
            continue
        lo = col_ptr[j]
        m = col_ptr[j + 1] - lo
        for t in range(m):
            work[t] = col_rows[lo + t]
        cur = m
        while cur > 0:
            r = work[cur - 1]
            o = owner[r]
            if o == -1:
                owner[r] = j
                low[j] = r
                break
            # symmetric difference with the reduced column owning pivot r
            a0 = sptr[o]
            a1 = sptr[o + 1]
            ia = np.int64(0)
            ib = a0
            out = 0
            while ia < cur and ib < a1:
                va = work[ia]
                vb = buf[ib]
                if va < vb:
                    merged[out] = va
                    out += 1
                    ia += 1
                elif vb < va:
                    merged[out] = vb
                    out += 1
                    ib += 1
                else:
                    ia += 1
                    ib += 1
            while ia < cur:
                merged[out] = work[ia]
                out += 1
                ia += 1
            while ib < a1:
                merged[out] = buf[ib]
                out += 1
                ib += 1
            tmp = work
            work = merged
            merged = tmp
            cur = out
        if cur > 0:
            # persist the settled column for future additions
            if used + cur > cap:
                newcap = cap * 2
                while newcap < used + cur:
                    newcap *= 2
                nbuf = np.empty(newcap, dtype=np.int32)
                nbuf[:used] = buf[:used]
                buf = nbuf
                cap = newcap
            for t in range(cur):
                buf[used + t] = work[t]
            used += cur
        sptr[j + 1] = used
    return low


def _reduce_py(col_ptr, col_rows, n_rows, skip):
    """Interpreted twin of :func:`_reduce_jit` built on sorted-array set ops."""
    nc = col_ptr.size - 1
    low = np.full(nc, -1, dtype=np.int32)
    owner: dict[int, int] = {}
    stored: list[np.ndarray | None] = [None] * nc
    for j in range(nc):
        if skip[j]:
            continue
        cur = col_rows[col_ptr[j]:col_ptr[j + 1]].copy()
        while cur.size:
            r = int(cur[-1])
            o = owner.get(r, -1)
            if o == -1:
                owner[r] = j
                low[j] = r
                stored[j] = cur
                break
            cur = np.setxor1d(cur, stored[o], assume_unique=True)
    return low


def reduce_columns(col_ptr, col_rows, n_rows, skip=None, force_backend=None):
    """Reduce a filtration-ordered boundary matrix over F2.

    Parameters
    ----------
    col_ptr, col_rows : CSR arrays; ``col_rows`` ascending within a column.
    n_rows : size of the row universe (rows indexed in filtration order).
    skip : optional boolean mask of columns cleared in advance.
    force_backend : ``"numba"``/``"numpy"`` to override the module default.

    Returns
    -------
    ``low`` — int32 array, one pivot row per column (``-1`` for zero columns).
    A column ``j`` with ``low[j] == r`` pairs row ``r`` (birth) with ``j``
    (death); the pairing is the standard lowest-one matching.
    """
    col_ptr = np.ascontiguousarray(col_ptr, dtype=np.int64)
    col_rows = np.ascontiguousarray(col_rows, dtype=np.int32)
    if skip is None:
        skip = np.zeros(col_ptr.size - 1, dtype=np.bool_)
    else:
        skip = np.ascontiguousarray(skip, dtype=np.bool_)
    use_jit = HAS_NUMBA if force_backend is None else (force_backend == "numba")
    if use_jit and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but unavailable")
    impl = _reduce_jit if use_jit else _reduce_py
    return impl(col_ptr, col_rows, np.int64(n_rows), skip)


# ---------------------------------------------------------------------------
# segment-crossing counter
# ---------------------------------------------------------------------------


@njit(cache=True)
def _crossings_jit(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1):  # pragma: no cover
    count = 0
    na = ax0.size
    nb = bx0.size
    for i in range(na):
        px = ax0[i]
        py = ay0[i]
        rx = ax1[i] - px
        ry = ay1[i] - py
        for j in range(nb):
            sx = bx1[j] - bx0[j]
            sy = by1[j] - by0[j]
            den = rx * sy - ry * sx
            if den == 0.0:
                continue
            qpx = bx0[j] - px
            qpy = by0[j] - py
            t = (qpx * sy - qpy * sx) / den
            u = (qpx * ry - qpy * rx) / den
            if 0.0 <= t < 1.0 and 0.0 <= u < 1.0:
                count += 1
    return count


def _crossings_py(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1):
    """Vectorised twin of :func:`_crossings_jit` (blocked to bound memory)."""
    count = 0
    rx = ax1 - ax0
    ry = ay1 - ay0
    sx = bx1 - bx0
    sy = by1 - by0
    block = max(1, int(4e6) // max(1, bx0.size))
    for lo in range(0, ax0.size, block):
        hi = min(lo + block, ax0.size)
        RX = rx[lo:hi, None]
        RY = ry[lo:hi, None]
        den = RX * sy[None, :] - RY * sx[None, :]
        qpx = bx0[None, :] - ax0[lo:hi, None]
        qpy = by0[None, :] - ay0[lo:hi, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qpx * sy[None, :] - qpy * sx[None, :]) / den
            u = (qpx * RY - qpy * RX) / den
        hit = (den != 0.0) & (t >= 0.0) & (t < 1.0) & (u >= 0.0) & (u < 1.0)
        count += int(hit.sum())
    return count


def count_segment_crossings(a_segs, b_segs, force_backend=None):
    """Count transversal crossings between two segment soups.

    Segments are ``(n, 4)`` float arrays ``[x0, y0, x1, y1]``.  The parameter
    interval of every segment is half-open, so chains sharing endpoints count
    each geometric crossing exactly once.  Exactly parallel pairs never count.
    """
    a = np.ascontiguousarray(a_segs, dtype=np.float64)
    b = np.ascontiguousarray(b_segs, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return 0
    use_jit = HAS_NUMBA if force_backend is None else (force_backend == "numba")
    if use_jit and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but unavailable")
    impl = _crossings_jit if use_jit else _crossings_py
    return int(
        impl(
            a[:, 0], a[:, 1], a[:, 2], a[:, 3],
            b[:, 0], b[:, 1], b[:, 2], b[:, 3],
        )
    )
