"""Action-filtered cubical complexes on the configuration torus.

For a period-``k``, winding-``m`` configuration the discrete action

    W(x_0 .. x_{k-1}) = sum_i [ step(x_{i+1} - x_i)^2 / 2
                                + (K / 4 pi^2) cos(2 pi x_i) ]

descends to the k-torus once each step difference is wrapped to the branch
nearest ``m/k`` (the representative in ``[m/k - 1/2, m/k + 1/2)``); the
result is continuous and its smooth critical points are periodic
configurations.  Sampling W on an ``n^k`` vertex grid and assigning every
cube the maximum of its vertices (lower-star rule) gives a filtered cubical
complex whose barcode approximates the action-filtered invariants of the
map; the approximation error is controlled by the modulus of continuity
``sup|grad W| * sqrt(k) / n``.

The full k-torus is used: the diagonal circle action (simultaneous rotation
of all coordinates) is NOT quotiented out, so homology carries an extra
circle factor and every barcode here shows ``2^k`` infinite bars.

Reduction runs dimension by dimension (boundary matrices are block-diagonal
across dimensions over F2), so peak memory is one cube dimension, not the
whole complex.  Budgets bound the vertex count ``n^k``; actual memory
scales with ``2^k n^k`` total cubes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .entropy import BarcodeSequence
from .errors import BudgetExceeded, DegenerateInput, ParameterOutOfRange
from .persistence import Barcode, FilteredComplex, Generator, build_complex
from .twist import OrbitRecord, TwistMapSpec

TWO_PI = 2.0 * math.pi

__all__ = [
    "GridActionComplex",
    "MatchReport",
    "grid_action_complex",
    "grid_sequence",
    "max_feasible_n",
    "action_values",
    "grid_modulus",
    "orbit_complex",
    "cross_validate",
    "bars_close",
    "write_grid_sidecar",
]


def action_values(spec: TwistMapSpec, k: int, m: int, n: int) -> np.ndarray:
    """Wrapped discrete action sampled on the ``n^k`` vertex grid, flat C-order."""
    total = np.zeros((n,) * k)
    c = spec.K / (4.0 * math.pi**2)
    center = m / k
    grid = np.arange(n) / n
    for i in range(k):
        xi = grid.reshape((1,) * i + (n,) + (1,) * (k - i - 1))
        j = (i + 1) % k
        xj = grid.reshape((1,) * j + (n,) + (1,) * (k - j - 1))
        d = xj - xi
        d = center + np.mod(d - center + 0.5, 1.0) - 0.5
        total = total + 0.5 * d * d + c * np.cos(TWO_PI * xi)
    return total.reshape(-1)


def grid_modulus(spec: TwistMapSpec, k: int, n: int) -> float:
    """Upper bound on the variation of W across one grid cube.

    Each partial derivative is at most two half-unit wrapped steps plus the
    kick derivative, so ``sup|grad W| <= sqrt(k) * (1 + |K|/2pi)``; times the
    cube diagonal ``sqrt(k)/n`` this bounds the per-cube variation.
    """
    return k * (1.0 + abs(spec.K) / TWO_PI) / n


def max_feasible_n(k: int, budget: int) -> int:
    n = max(int(math.floor(budget ** (1.0 / k))), 1)
    while (n + 1) ** k <= budget:
        n += 1
    while n > 1 and n**k > budget:
        n -= 1
    return n


@dataclass
class GridActionComplex:
    """Sampled action with its lower-star cubical barcode.

    ``values`` is the flat C-order vertex sample; ``barcode`` is computed at
    construction with zero-length (tie) pairs dropped; ``modulus`` is the
    continuity bound used as matching tolerance by the validators.
    """

    spec: TwistMapSpec
    k: int
    m: int
    n: int
    values: np.ndarray
    barcode: Barcode
    modulus: float
    n_cells: int
    infinite_by_degree: dict[int, int] = field(default_factory=dict)

    def gamma_proxy(self) -> float:
        """Spread of the sampled action (range of W on the grid)."""
        return float(self.values.max() - self.values.min())

    def tie_eta(self) -> float:
        return max(1.0, float(np.abs(self.values).max())) * 2.0**-40

    def to_filtered_complex(self, max_cells: int = 300_000) -> FilteredComplex:
        """Explicit generator/boundary view, for validation on small grids.

        The core demands strictly decreasing action across the boundary, so
        ties are broken symbolically: every cube's action is shifted by
        ``dim * eta`` with ``eta = tie_eta()``.  Barcode endpoints computed
        from this view differ from the fast path by at most ``k * eta``,
        and tie pairs show up as length-``eta`` bars instead of being
        dropped.
        """
        if self.n_cells > max_cells:
            raise BudgetExceeded(
                f"{self.n_cells} cubes exceed the {max_cells} limit for the "
                "explicit complex view"
            )
        return _explicit_complex(self.k, self.n, self.values, self.tie_eta())


def grid_action_complex(
    spec: TwistMapSpec,
    k: int,
    m: int = 0,
    n: int = 64,
    budget: int = 20_000_000,
) -> GridActionComplex:
    """Sample the wrapped action and reduce its lower-star filtration.

    The budget bounds the vertex count ``n^k``; on violation the error names
    the largest feasible resolution for this ``k``.  The result is checked
    against the torus sanity count: exactly ``2^k`` infinite bars.
    """
    if k < 1:
        raise ParameterOutOfRange(f"period k must be >= 1, got {k}")
    if n < 3:
        raise ParameterOutOfRange(f"grid resolution must be >= 3, got {n}")
    if n**k > budget:
        raise BudgetExceeded(
            f"n^k = {n ** k} vertices exceed the budget {budget}; "
            f"max feasible n for k={k} is {max_feasible_n(k, budget)}",
            max_feasible_n=max_feasible_n(k, budget),
        )
    values = action_values(spec, k, m, n)
    finite, infinite, by_deg, n_cells = _reduce_grid(values, k, n)
    bc = Barcode.from_pairs(finite, infinite)
    assert bc.n_infinite == 2**k, (
        f"torus homology demands {2 ** k} infinite bars, reduction gave "
        f"{bc.n_infinite}"
    )
    return GridActionComplex(
        spec=spec,
        k=k,
        m=m,
        n=n,
        values=values,
        barcode=bc,
        modulus=grid_modulus(spec, k, n),
        n_cells=n_cells,
        infinite_by_degree=by_deg,
    )


def _cube_types_by_dim(k: int) -> list[list[int]]:
    by_dim: list[list[int]] = [[] for _ in range(k + 1)]
    for t in range(2**k):
        by_dim[bin(t).count("1")].append(t)
    return by_dim


def _cube_values(vertex_grid: np.ndarray, t: int, k: int) -> np.ndarray:
    """Lower-star value (max over vertices) for every cube of type ``t``."""
    vals = vertex_grid
    for axis in range(k):
        if t & (1 << axis):
            vals = np.maximum(vals, np.roll(vals, -1, axis=axis))
    return vals


def _dim_cell_values(vertex_grid: np.ndarray, types: list[int],
                     k: int) -> np.ndarray:
    """Concatenated lower-star values for all cubes of the given types."""
    nk = vertex_grid.size
    vals = np.empty(len(types) * nk)
    for ti, t in enumerate(types):
        vals[ti * nk:(ti + 1) * nk] = _cube_values(vertex_grid, t, k).reshape(-1)
    return vals


def _reduce_grid(values: np.ndarray, k: int, n: int):
    """Dimension-streamed lowest-one reduction of the cubical filtration.

    Cells are ordered by (value, dimension, uid); boundary matrices are
    block-diagonal across dimensions over F2, so each dimension reduces
    independently against the one below.  Dimensions run top-down with
    clearing: a cell paired as a birth by the block above must have a zero
    column in its own block (canonical pairing), so its reduction is
    skipped outright — on these complexes that removes most of the work.
    """
    vertex_grid = values.reshape((n,) * k)
    nk = values.size
    by_dim = _cube_types_by_dim(k)
    base = np.arange(nk).reshape((n,) * k)
    shifted = [np.roll(base, -1, axis=a).reshape(-1) for a in range(k)]
    flat_ids = np.arange(nk)

    finite_b: list[np.ndarray] = []
    finite_d: list[np.ndarray] = []
    infinite: list[np.ndarray] = []
    inf_by_degree: dict[int, int] = {}
    n_cells = sum(len(by_dim[d]) * nk for d in range(k + 1))

    # cleared[uid], over the current column dimension: cell was paired as a
    # birth by the block above, so its own column is zero and is skipped.
    cleared = np.zeros(len(by_dim[k]) * nk, dtype=bool)

    for d in range(k, 0, -1):
        col_types = by_dim[d]
        row_types = by_dim[d - 1]
        n_cols = len(col_types) * nk
        n_rows = len(row_types) * nk

        col_vals = _dim_cell_values(vertex_grid, col_types, k)
        row_vals = _dim_cell_values(vertex_grid, row_types, k)
        col_order = np.argsort(col_vals, kind="stable")
        row_order = np.argsort(row_vals, kind="stable")
        row_rank = np.empty(n_rows, dtype=np.int64)
        row_rank[row_order] = np.arange(n_rows)
        col_vals_sorted = col_vals[col_order]
        row_vals_sorted = row_vals[row_order]

        n_faces = 2 * d
        rows = np.empty((n_cols, n_faces), dtype=np.int32)
        row_pos = {t: i for i, t in enumerate(row_types)}
        for ti, t in enumerate(col_types):
            slot = 0
            sl = slice(ti * nk, (ti + 1) * nk)
            for axis in range(k):
                if not t & (1 << axis):
                    continue
                ft = t & ~(1 << axis)
                fbase = row_pos[ft] * nk
                rows[sl, slot] = row_rank[fbase + flat_ids]
                rows[sl, slot + 1] = row_rank[fbase + shifted[axis]]
                slot += 2
        rows = np.sort(rows[col_order], axis=1)
        col_ptr = np.arange(0, (n_cols + 1) * n_faces, n_faces, dtype=np.int64)
        low = _kernels.reduce_columns(col_ptr, rows.reshape(-1), n_rows,
                                      skip=cleared[col_order])

        paired_cols = np.nonzero(low >= 0)[0]
        paired_rows = low[paired_cols].astype(np.int64)
        births = row_vals_sorted[paired_rows]
        deaths = col_vals_sorted[paired_cols]
        keep = deaths > births
        finite_b.append(births[keep])
        finite_d.append(deaths[keep])

        # infinite bars in degree d: zero columns (cleared ones were births
        # that die above, so they are excluded)
        zero_uid = np.ones(n_cols, dtype=bool)
        zero_uid[col_order[paired_cols]] = False
        alive = zero_uid & ~cleared
        inf_by_degree[d] = int(alive.sum())
        infinite.append(col_vals[alive])

        # rows paired here are (d-1)-births that die: clear them below
        cleared = np.zeros(n_rows, dtype=bool)
        cleared[row_order[paired_rows]] = True

    # degree 0: every vertex column is zero; infinite unless paired above
    alive0 = ~cleared
    inf_by_degree[0] = int(alive0.sum())
    infinite.append(values[alive0])

    fb = np.concatenate(finite_b) if finite_b else np.empty(0)
    fd = np.concatenate(finite_d) if finite_d else np.empty(0)
    inf = np.concatenate(infinite) if infinite else np.empty(0)
    finite_pairs = list(zip(fb.tolist(), fd.tolist()))
    inf_by_degree = dict(sorted(inf_by_degree.items()))
    return finite_pairs, inf.tolist(), inf_by_degree, n_cells


def _explicit_complex(k: int, n: int, values: np.ndarray,
                      eta: float) -> FilteredComplex:
    """Generator/boundary view with symbolic dimension-shift tie-breaking."""
    vertex_grid = values.reshape((n,) * k)
    base = np.arange(values.size).reshape((n,) * k)
    shifted = [np.roll(base, -1, axis=a).reshape(-1) for a in range(k)]
    gens: list[Generator] = []
    boundary: dict[str, set[str]] = {}

    for t in range(2**k):
        vals = _cube_values(vertex_grid, t, k).reshape(-1)
        dim = bin(t).count("1")
        for flat in range(values.size):
            cid = f"c{t}_{flat}"
            gens.append(Generator(id=cid, action=float(vals[flat] + dim * eta),
                                  degree=dim))
            faces: set[str] = set()
            for axis in range(k):
                if not t & (1 << axis):
                    continue
                ft = t & ~(1 << axis)
                faces.add(f"c{ft}_{flat}")
                faces.add(f"c{ft}_{int(shifted[axis][flat])}")
            if faces:
                boundary[cid] = faces
    return build_complex(gens, boundary)


# ---------------------------------------------------------------------------
# orbit complexes and cross-validation
# ---------------------------------------------------------------------------


def orbit_complex(
    orbits: Sequence[OrbitRecord],
    grid: GridActionComplex | None = None,
) -> tuple[FilteredComplex, bool]:
    """Filtered complex generated by orbits at their action values.

    One generator per orbit, filtered at its action, graded by Morse index.

    Returns ``(complex, spectrum_only)``.  Without a grid the differential
    is zero and ``spectrum_only`` is True: the bars are pure spectrum, all
    infinite.  With a grid, finite grid bars whose two endpoints sit within
    ``2 * modulus`` of distinct orbit actions (strictly increasing, so the
    filtration stays valid) are imported as differential entries; bars that
    fail to match are left out rather than guessed.
    """
    if not orbits:
        return build_complex([], {}), grid is None
    key = {(r.k, r.m) for r in orbits}
    if len(key) > 1:
        raise DegenerateInput(f"orbit complex mixes (k, m) classes {sorted(key)}")
    if any(not r.nondegenerate for r in orbits):
        raise DegenerateInput("orbit complex requires nondegenerate orbits")
    recs = sorted(orbits, key=lambda r: (r.action, r.points))
    gens = [
        Generator(id=f"orb{i}", action=r.action, degree=r.morse_index)
        for i, r in enumerate(recs)
    ]
    boundary: dict[str, set[str]] = {}
    spectrum_only = True
    if grid is not None:
        if (grid.k, grid.m) != (recs[0].k, recs[0].m):
            raise DegenerateInput(
                f"grid is for (k={grid.k}, m={grid.m}), orbits for "
                f"(k={recs[0].k}, m={recs[0].m})"
            )
        spectrum_only = False
        tol = 2.0 * grid.modulus
        actions = np.array([r.action for r in recs])
        used = np.zeros(len(recs), dtype=bool)
        for birth, death, mult in grid.barcode.finite:
            for _ in range(mult):
                bi = _claim_nearest(actions, used, birth, tol)
                di = _claim_nearest(actions, used, death, tol)
                if (bi is None or di is None
                        or not actions[di] > actions[bi]):
                    if bi is not None:
                        used[bi] = False
                    if di is not None:
                        used[di] = False
                    continue
                boundary[f"orb{di}"] = {f"orb{bi}"}
    return build_complex(gens, boundary), spectrum_only


def _claim_nearest(actions: np.ndarray, used: np.ndarray, value: float,
                   tol: float) -> int | None:
    free = np.nonzero(~used)[0]
    if free.size == 0:
        return None
    gaps = np.abs(actions[free] - value)
    j = int(np.argmin(gaps))
    if gaps[j] > tol:
        return None
    used[free[j]] = True
    return int(free[j])


@dataclass(frozen=True)
class MatchReport:
    """Greedy endpoint-to-action matching summary."""

    tolerance: float
    matched: tuple[tuple[float, float], ...]
    unmatched_endpoints: tuple[float, ...]
    unmatched_actions: tuple[float, ...]

    @property
    def clean(self) -> bool:
        return not self.unmatched_endpoints


def cross_validate(
    grid: GridActionComplex,
    orbits: Sequence[OrbitRecord],
    tolerance: float | None = None,
) -> MatchReport:
    """Match every grid bar endpoint to a nearby orbit action.

    Endpoints are finite-bar births and deaths plus infinite births; each
    should sit within the tolerance (default ``2 * modulus``) of some orbit
    action.  One action may absorb several endpoints: distinct grid cells
    can witness the same orbit.  Unmatched endpoints are grid features with
    no orbit explanation; unmatched actions are orbits the grid missed.

    The grid sees every rotation class whose wrapped steps fit the branch
    window, so the orbit list should pool the neighbouring classes (total
    winding within ``m +- k/2``) before calling this.
    """
    tol = 2.0 * grid.modulus if tolerance is None else tolerance
    endpoints: list[float] = []
    for birth, death, mult in grid.barcode.finite:
        endpoints.extend([birth, death] * mult)
    for birth, mult in grid.barcode.infinite:
        endpoints.extend([birth] * mult)
    arr = np.array(sorted({r.action for r in orbits}))
    matched: list[tuple[float, float]] = []
    unmatched_endpoints: list[float] = []
    hit = np.zeros(arr.size, dtype=bool)
    for e in sorted(endpoints):
        if arr.size:
            j = int(np.argmin(np.abs(arr - e)))
            if abs(arr[j] - e) <= tol:
                matched.append((float(e), float(arr[j])))
                hit[j] = True
                continue
        unmatched_endpoints.append(float(e))
    unmatched_actions = [float(a) for a, h in zip(arr, hit) if not h]
    return MatchReport(
        tolerance=float(tol),
        matched=tuple(matched),
        unmatched_endpoints=tuple(unmatched_endpoints),
        unmatched_actions=tuple(unmatched_actions),
    )


def bars_close(a: Barcode, b: Barcode, tol: float) -> bool:
    """Endpointwise matching of two barcodes within ``tol``.

    Finite bars pair greedily with both endpoints within ``tol``; bars of
    length ``<= 2 * tol`` on either side may instead be dropped (at that
    scale they are indistinguishable from sampling noise).  Infinite bars
    must pair one-to-one within ``tol``.
    """

    def expanded(bc: Barcode) -> list[tuple[float, float]]:
        out: list[tuple[float, float]] = []
        for birth, death, mult in bc.finite:
            out.extend([(birth, death)] * mult)
        return sorted(out)

    fa = expanded(a)
    fb = expanded(b)
    used = [False] * len(fb)
    for birth, death in fa:
        found = False
        for j, (b2, d2) in enumerate(fb):
            if used[j]:
                continue
            if abs(b2 - birth) <= tol and abs(d2 - death) <= tol:
                used[j] = True
                found = True
                break
        if not found and death - birth > 2.0 * tol:
            return False
    for j, (b2, d2) in enumerate(fb):
        if not used[j] and d2 - b2 > 2.0 * tol:
            return False

    ia = sorted(a.infinite_births())
    ib = sorted(b.infinite_births())
    if len(ia) != len(ib):
        return False
    return all(abs(x - y) <= tol for x, y in zip(ia, ib))


def write_grid_sidecar(grid: GridActionComplex, path) -> None:
    """JSON sidecar describing a grid barcode CSV."""
    doc = {
        "K": grid.spec.K,
        "phase_space": grid.spec.phase_space,
        "k": grid.k,
        "m": grid.m,
        "n": grid.n,
        "modulus": grid.modulus,
        "n_cells": grid.n_cells,
        "infinite_by_degree": {str(d): v for d, v in
                               sorted(grid.infinite_by_degree.items())},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def grid_sequence(
    spec: TwistMapSpec,
    ks: Sequence[int],
    m: int = 0,
    budget: int = 300_000,
    n_cap: int = 128,
) -> tuple[BarcodeSequence, dict[int, GridActionComplex]]:
    """Grid barcodes across iterate counts, packaged for the estimators.

    For each ``k`` the resolution is the largest ``n <= n_cap`` whose vertex
    count ``n^k`` fits the budget, so high iterates are coarser by
    necessity; the per-``k`` noise floor (twice the refinement modulus) is
    attached to the sequence so that the estimators never mistake the
    coarsening for bar growth.  The default budget keeps the whole
    ``k = 2..6`` sweep around a minute; raising it buys resolution at the
    usual ``n^k`` price.  Returns the sequence and the underlying grid jobs.
    """
    grids = {}
    for k in sorted(set(int(k) for k in ks)):
        n = min(n_cap, max_feasible_n(k, budget))
        grids[k] = grid_action_complex(spec, k=k, m=m, n=n, budget=budget)
    seq = BarcodeSequence(
        entries={k: g.barcode for k, g in grids.items()},
        provenance="grid",
        noise_floor={k: 2.0 * g.modulus for k, g in grids.items()},
    )
    return seq, grids
