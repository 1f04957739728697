"""A kicked twist map on the unit torus and its variational orbit machinery.

The map is the one-parameter family

    x' = x + y - (K / 2 pi) sin(2 pi x)
    y' = y -     (K / 2 pi) sin(2 pi x)

acting on the unit square with both coordinates taken mod 1 (``torus``) or
with ``y`` unbounded (``cylinder``).  It is area preserving and, for ``K``
large, strongly chaotic.  Period-``k`` orbits in winding class ``m`` are the
critical points of the discrete action

    W(x_0 .. x_{k-1}) = sum_i h(x_i, x_{i+1}),   x_k = x_0 + m,
    h(x, x') = (x' - x)^2 / 2 + (K / 4 pi^2) cos(2 pi x),

which we locate by a damped Newton iteration on grad W, seeded either from
half-integer kick-potential patterns (the anti-integrable limit) or at
random.  Curves are polylines in lift coordinates; iteration refines them
adaptively so adjacent image points stay within a spacing tolerance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    BudgetExhausted,
    DegenerateInput,
    ParameterOutOfRange,
)

TWO_PI = 2.0 * math.pi

__all__ = [
    "TwistMapSpec",
    "OrbitRecord",
    "OrbitCensus",
    "Polyline",
    "CurveGrowth",
    "map_apply",
    "map_apply_many",
    "tangent_matrix",
    "generating_term",
    "discrete_action",
    "action_gradient",
    "action_hessian",
    "periodic_orbits",
    "orbit_census",
    "count_periodic_points",
    "orbit_phase_points",
    "vertical_circle",
    "horizontal_circle",
    "iterate_curve",
    "length_growth_rate",
    "count_intersections",
    "lipschitz_bound",
    "pk_monotonicity_report",
    "write_orbits_csv",
]


@dataclass(frozen=True)
class TwistMapSpec:
    """Map parameters: kick strength and phase-space convention."""

    K: float
    phase_space: str = "torus"  # "torus" wraps y mod 1, "cylinder" leaves it free

    def __post_init__(self):
        if self.phase_space not in ("torus", "cylinder"):
            raise ParameterOutOfRange(
                f"phase_space must be 'torus' or 'cylinder', got {self.phase_space!r}"
            )
        if not np.isfinite(self.K):
            raise ParameterOutOfRange("K must be finite")


def _kick(spec: TwistMapSpec, x):
    return (spec.K / TWO_PI) * np.sin(TWO_PI * np.asarray(x))


def map_apply(spec: TwistMapSpec, point) -> np.ndarray:
    """One application of the map in lift coordinates (no wrapping)."""
    x, y = float(point[0]), float(point[1])
    y1 = y - (spec.K / TWO_PI) * math.sin(TWO_PI * x)
    return np.array([x + y1, y1])


def map_apply_many(spec: TwistMapSpec, pts: np.ndarray) -> np.ndarray:
    """Vectorised map on an ``(N, 2)`` array of lift points."""
    pts = np.asarray(pts, dtype=float)
    y1 = pts[:, 1] - _kick(spec, pts[:, 0])
    return np.stack([pts[:, 0] + y1, y1], axis=1)


def tangent_matrix(spec: TwistMapSpec, x) -> np.ndarray:
    """Derivative of the map at a point (depends on ``x`` only); det == 1."""
    c = spec.K * math.cos(TWO_PI * float(x))
    return np.array([[1.0 - c, 1.0], [-c, 1.0]])


def wrap01(v):
    return np.mod(v, 1.0)


# ---------------------------------------------------------------------------
# discrete action
# ---------------------------------------------------------------------------


def generating_term(spec: TwistMapSpec, x, x1):
    """One step of the discrete action: kinetic part plus kick potential."""
    x = np.asarray(x, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    return 0.5 * (x1 - x) ** 2 + (spec.K / (4.0 * math.pi**2)) * np.cos(TWO_PI * x)


def _closure_roll(xs: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Next and previous configurations under the lift closure x_k = x_0 + m."""
    nxt = np.roll(xs, -1, axis=-1)
    nxt[..., -1] += m
    prv = np.roll(xs, 1, axis=-1)
    prv[..., 0] -= m
    return nxt, prv


def discrete_action(spec: TwistMapSpec, xs: np.ndarray, m: int) -> np.ndarray:
    """W over batches: ``xs`` has shape ``(..., k)``."""
    xs = np.asarray(xs, dtype=float)
    nxt, _ = _closure_roll(xs, m)
    return generating_term(spec, xs, nxt).sum(axis=-1)


def action_gradient(spec: TwistMapSpec, xs: np.ndarray, m: int) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    nxt, prv = _closure_roll(xs, m)
    return 2.0 * xs - nxt - prv - _kick(spec, xs)


def action_hessian(spec: TwistMapSpec, xs: np.ndarray) -> np.ndarray:
    """Cyclic second variation, shape ``(..., k, k)``.

    The circulant structure degenerates gracefully at small periods: for
    ``k == 1`` both off-diagonal neighbours land on the diagonal and the
    matrix is the scalar ``-K cos(2 pi x)``; for ``k == 2`` the two corner
    couplings stack to ``-2``.
    """
    xs = np.asarray(xs, dtype=float)
    k = xs.shape[-1]
    diag = 2.0 - spec.K * np.cos(TWO_PI * xs)
    shape = xs.shape[:-1] + (k, k)
    H = np.zeros(shape)
    idx = np.arange(k)
    H[..., idx, idx] = diag
    H[..., idx, (idx + 1) % k] += -1.0
    H[..., idx, (idx - 1) % k] += -1.0
    return H


def orbit_phase_points(spec: TwistMapSpec, xs: Sequence[float], m: int) -> np.ndarray:
    """Phase-space points ``(x_i, y_i)`` of a configuration orbit."""
    xs = np.asarray(xs, dtype=float)
    _, prv = _closure_roll(xs[None, :], m)
    ys = xs - prv[0]
    return np.stack([xs, ys], axis=1)


# ---------------------------------------------------------------------------
# periodic orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitRecord:
    """A deduplicated period-``k`` configuration orbit."""

    k: int
    m: int
    points: tuple[float, ...]  # x_i on the torus, canonical rotation
    action: float
    morse_index: int
    residue: float
    hyperbolic: bool
    nondegenerate: bool
    primitive_period: int
    grad_norm: float


@dataclass(frozen=True)
class OrbitCensus:
    """Counts over a batch of orbit records.

    Point totals weight each orbit by its primitive period and exclude
    degenerate families, which have no isolated point count.  The homology
    comparison asks whether the map carries more hyperbolic periodic points
    than the total homology rank of the annulus (H_0 + H_1 = 2).
    """

    k: int
    total_orbits: int
    hyperbolic: int
    elliptic: int
    degenerate: int
    points_total: int
    hyperbolic_points: int
    by_m: dict = field(default_factory=dict)

    def exceeds_homology(self, homology_dim: int = 2) -> bool:
        return self.hyperbolic_points > homology_dim


def _pattern_seeds(k: int, m: int) -> np.ndarray:
    """The 2^k half-integer kick-pattern seeds, ramped to winding ``m``."""
    grids = np.indices((2,) * k).reshape(k, -1).T * 0.5
    ramp = m * np.arange(k) / k
    return grids + ramp[None, :]


def _jump_seeds(k: int, m: int, K: float, max_seeds: int) -> np.ndarray:
    """Half-integer step sequences with bounded second differences.

    Enumerates lift configurations ``v`` with ``v_0 in {0, 1/2}``, steps
    ``d_i = v_i - v_{i-1}`` in half-integers, cyclic second differences
    bounded by the kick amplitude (rounded up to the half-integer lattice),
    and total winding exactly ``m``.  This is the exhaustive anti-integrable
    seeding; the plain pattern seeds are the subfamily whose steps follow a
    single winding ramp.  Everything is done on doubled integers so the
    lattice stays exact.
    """
    J2 = max(int(math.ceil(2.0 * abs(K) / TWO_PI - 1e-12)), 1)
    dmax2 = int(abs(m) * 2 // k + J2 * k // 2 + 1)
    m2 = 2 * m
    deltas = np.arange(-J2, J2 + 1, dtype=np.int64)

    cur = np.arange(-dmax2, dmax2 + 1, dtype=np.int64)[:, None]
    for i in range(1, k):
        grown = np.repeat(cur, deltas.size, axis=0)
        last = (cur[:, -1][:, None] + deltas[None, :]).reshape(-1, 1)
        cur = np.concatenate([grown, last], axis=1)
        keep = np.abs(cur[:, -1]) <= dmax2
        cur = cur[keep]
        rem = k - (i + 1)
        reach = J2 * rem * (rem + 1) // 2
        s = cur.sum(axis=1) + rem * cur[:, -1]
        keep = (m2 >= s - reach) & (m2 <= s + reach)
        cur = cur[keep]
        if cur.shape[0] > max_seeds:
            raise ParameterOutOfRange(
                f"symbolic jump enumeration exceeds {max_seeds} seeds at "
                f"period {k}; lower k or raise max_seeds"
            )
    keep = (cur.sum(axis=1) == m2) & (np.abs(cur[:, 0] - cur[:, -1]) <= J2)
    cur = cur[keep]
    if cur.shape[0] == 0:
        return _pattern_seeds(k, m)
    zeros = np.zeros((cur.shape[0], 1))
    base = np.concatenate([zeros, np.cumsum(cur[:, :-1], axis=1) / 2.0], axis=1)
    return np.concatenate([base, base + 0.5], axis=0)


def _canonical_orbit(xs: np.ndarray, m: int, decimals: int = 9) -> np.ndarray:
    """Lexicographically minimal cyclic rotation, first point wrapped to [0, 1).

    Rotating the base point of a winding-``m`` configuration continues the
    lift past the closure, so wrapped entries pick up ``+m``; the global
    integer translation is then normalised away via the first coordinate.
    """
    k = xs.size
    best = None
    for s in range(k):
        v = np.roll(xs, -s).copy()
        if s:
            v[k - s:] += m
        # floor of the rounded coordinate so solver noise around an integer
        # cannot flip the translation normalisation
        v = v - math.floor(round(v[0], decimals))
        key = tuple(np.round(v, decimals))
        if best is None or key < best[0]:
            best = (key, v)
    return best[1]


def _canonical_batch(xs: np.ndarray, m: int) -> np.ndarray:
    """Vectorised ``_canonical_orbit`` over rows of ``xs``."""
    S, k = xs.shape
    shift = np.arange(k)
    idx = (shift[:, None] + shift[None, :]) % k          # (rotation, position)
    wraps = (shift[:, None] + shift[None, :]) >= k
    rots = xs[:, idx] + m * wraps[None, :, :]            # (S, k, k)
    rots = rots - np.floor(np.round(rots[:, :, :1], 9))
    flat = rots.reshape(S * k, k)
    q = np.round(flat * 1e9).astype(np.int64)
    group = np.repeat(np.arange(S), k)
    keys = tuple(q[:, j] for j in range(k - 1, -1, -1)) + (group,)
    order = np.lexsort(keys)
    first = np.searchsorted(group[order], np.arange(S), side="left")
    return flat[order[first]]


def _primitive_period(xs: np.ndarray, m: int, tol: float = 1e-6) -> int:
    k = xs.size
    for ell in range(1, k):
        if k % ell or (m * ell) % k:
            continue
        shifted = np.roll(xs, -ell).copy()
        wrap = m * ell // k
        shifted[k - ell:] += m
        shifted -= wrap
        if np.max(np.abs(shifted - xs)) <= tol:
            return ell
    return k


def _orbit_residue(spec: TwistMapSpec, xs: np.ndarray, m: int) -> float:
    pts = orbit_phase_points(spec, xs, m)
    M = np.eye(2)
    for x, _ in pts:
        M = tangent_matrix(spec, x) @ M
    return float((2.0 - np.trace(M)) / 4.0)


def periodic_orbits(
    spec: TwistMapSpec,
    k: int,
    m_range: Iterable[int] = (0,),
    seeding: str = "symbolic",
    random_count: int = 0,
    seed: int = 0,
    max_iter: int = 30,
    max_seeds: int = 2_000_000,
    dedup_tol: float = 1e-6,
) -> list[OrbitRecord]:
    """Enumerate period-``k`` orbits per winding class by Newton descent.

    ``seeding`` is ``"symbolic"`` (2^k kick patterns per class),
    ``"symbolic_jumps"`` (exhaustive bounded-jump enumeration), or
    ``"random"``; random seeds can be mixed in with ``random_count``.
    Converged configurations are canonicalised (minimal cyclic rotation,
    integer translation removed) and deduplicated within ``dedup_tol``.
    Seeds whose Newton iteration leaves the basin or hits a singular second
    variation are dropped and tallied, never fatal.
    """
    if k < 1:
        raise ParameterOutOfRange(f"period k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    records: list[OrbitRecord] = []
    for m in m_range:
        seeds_list = []
        if seeding == "symbolic":
            seeds_list.append(_pattern_seeds(k, int(m)))
        elif seeding == "symbolic_jumps":
            seeds_list.append(_jump_seeds(k, int(m), spec.K, max_seeds))
        elif seeding != "random":
            raise ParameterOutOfRange(f"unknown seeding {seeding!r}")
        if seeding == "random" or random_count:
            count = random_count if random_count else 2**k
            seeds_list.append(
                rng.uniform(0.0, 1.0, size=(count, k))
                + (int(m) * np.arange(k) / k)[None, :]
            )
        seeds = np.concatenate(seeds_list, axis=0)
        records.extend(
            _solve_class(spec, k, int(m), seeds, max_iter, dedup_tol)
        )
    return records


def _solve_class(spec, k, m, seeds, max_iter, dedup_tol) -> list[OrbitRecord]:
    xs = np.array(seeds, dtype=float)
    S = xs.shape[0]
    alive = np.ones(S, dtype=bool)
    degenerate_at_seed = np.zeros(S, dtype=bool)

    for it in range(max_iter):
        if not alive.any():
            break
        g = action_gradient(spec, xs[alive], m)
        gnorm = np.abs(g).max(axis=1)
        if it >= 12:
            # Newton either converges quadratically within a dozen steps or
            # bounces between basins; cut the bouncers instead of polishing
            stalled = gnorm > 1e-4
            stalled_idx = np.where(alive)[0][stalled]
            alive[stalled_idx] = False
            xs[stalled_idx] = np.nan
            if stalled.any():
                g = g[~stalled]
                gnorm = gnorm[~stalled]
                if not alive.any():
                    break
        H = action_hessian(spec, xs[alive])
        det = np.linalg.det(H)
        singular = np.abs(det) < 1e-12
        done = gnorm <= 1e-12

        idx = np.where(alive)[0]
        # flat directions with a vanishing gradient: a degenerate family
        degenerate_at_seed[idx[singular & done]] = True
        alive[idx[singular | done]] = False

        solve_mask = ~(singular | done)
        if not solve_mask.any():
            continue
        step = np.linalg.solve(H[solve_mask], g[solve_mask][..., None])[..., 0]
        # damp long steps; Newton is only trusted near a critical point
        norms = np.abs(step).max(axis=1)
        scale = np.minimum(1.0, 0.5 / np.maximum(norms, 1e-30))
        scale[norms <= 0.5] = 1.0
        step = step * scale[:, None]
        target = idx[solve_mask]
        xs[target] -= step
        blown = ~np.isfinite(xs[target]).all(axis=1)
        if blown.any():
            alive[target[blown]] = False
            xs[target[blown]] = np.nan

    ok = np.isfinite(xs).all(axis=1)
    g_final = np.full(xs.shape[0], np.inf)
    g_final[ok] = np.abs(action_gradient(spec, xs[ok], m)).max(axis=1)
    keep = np.where(ok & (g_final <= 1e-10))[0]
    if keep.size == 0:
        return []

    canon = _canonical_batch(xs[keep], m)
    grads = g_final[keep]
    # collapse Newton-noise copies exactly, then enforce the stated
    # tolerance with a pairwise sweep over the survivors
    _, uniq = np.unique(np.round(canon, 9), axis=0, return_index=True)
    uniq = np.sort(uniq)
    canon, grads = canon[uniq], grads[uniq]
    order = np.lexsort(tuple(canon[:, j] for j in range(k - 1, -1, -1)))
    canon, grads = canon[order], grads[order]

    accepted = np.empty_like(canon)
    acc_grads: list[float] = []
    n_acc = 0
    for row, g in zip(canon, grads):
        if n_acc:
            # translation-aware distance: first coordinates live in [0, 1),
            # so copies of one orbit can still sit one lattice unit apart
            dist = min(
                float(np.abs(accepted[:n_acc] - (row + t)).max(axis=1).min())
                for t in (-1.0, 0.0, 1.0)
            )
            if dist <= dedup_tol:
                continue
        accepted[n_acc] = row
        acc_grads.append(float(g))
        n_acc += 1
    accepted = accepted[:n_acc]

    H = action_hessian(spec, accepted)
    detH = np.linalg.det(H)
    index = (np.linalg.eigvalsh(H) < 0).sum(axis=1)
    actions = discrete_action(spec, accepted, m)

    records: list[OrbitRecord] = []
    for i in range(n_acc):
        residue = _orbit_residue(spec, accepted[i], m)
        trace = 2.0 - 4.0 * residue
        records.append(
            OrbitRecord(
                k=k,
                m=m,
                points=tuple(float(v) for v in accepted[i]),
                action=float(actions[i]),
                morse_index=int(index[i]),
                residue=residue,
                hyperbolic=bool(abs(trace) > 2.0),
                nondegenerate=bool(abs(detH[i]) > 1e-8),
                primitive_period=_primitive_period(accepted[i], m),
                grad_norm=acc_grads[i],
            )
        )
    return records


def orbit_census(records: Sequence[OrbitRecord]) -> OrbitCensus:
    if not records:
        return OrbitCensus(0, 0, 0, 0, 0, 0, 0, {})
    ks = {r.k for r in records}
    if len(ks) > 1:
        raise DegenerateInput(f"census mixes periods {sorted(ks)}")
    k = ks.pop()
    by_m: dict[int, int] = {}
    hyper = ell = degen = points = hpoints = 0
    for r in records:
        by_m[r.m] = by_m.get(r.m, 0) + 1
        if not r.nondegenerate:
            degen += 1
            continue
        points += r.primitive_period
        if r.hyperbolic:
            hyper += 1
            hpoints += r.primitive_period
        else:
            ell += 1
    return OrbitCensus(
        k=k,
        total_orbits=len(records),
        hyperbolic=hyper,
        elliptic=ell,
        degenerate=degen,
        points_total=points,
        hyperbolic_points=hpoints,
        by_m=by_m,
    )


def count_periodic_points(
    spec: TwistMapSpec,
    k: int,
    seeding: str = "symbolic_jumps",
    max_seeds: int = 2_000_000,
) -> OrbitCensus:
    """Census over all winding classes ``m in 0..k-1`` of the torus map.

    Every period-``k`` torus orbit lifts to exactly one winding class mod
    ``k`` (shifting the ``y`` lift by an integer shifts the class by ``k``),
    so this range counts each orbit once and ``points_total`` is the
    period-``k`` point count p(k).  Orbits whose ``y`` drifts by a nonzero
    integer per period (accelerator modes of the torus quotient) are outside
    the bounded-annulus model and deliberately not counted.
    """
    recs = periodic_orbits(
        spec, k, m_range=range(k), seeding=seeding, max_seeds=max_seeds
    )
    return orbit_census(recs)


def pk_monotonicity_report(
    k: int,
    K_values: Sequence[float] = (4.0, 6.0, 8.0, 10.0),
    seeding: str = "symbolic",
) -> dict:
    """Measure p(k) across kick strengths and report monotonicity honestly.

    In the large-kick regime the point count should not decrease with ``K``;
    seeding is heuristic, so this is a measured property and any decrease is
    listed under ``violations`` instead of being smoothed over.
    """
    p_values = []
    for K in K_values:
        census = count_periodic_points(TwistMapSpec(K=K), k, seeding=seeding)
        p_values.append(census.points_total)
    violations = [
        {"K_from": K_values[i], "K_to": K_values[i + 1],
         "p_from": p_values[i], "p_to": p_values[i + 1]}
        for i in range(len(p_values) - 1)
        if p_values[i + 1] < p_values[i]
    ]
    return {
        "k": k,
        "K_values": list(K_values),
        "p_values": p_values,
        "nondecreasing": not violations,
        "violations": violations,
    }


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


@dataclass
class Polyline:
    """A closed curve in lift coordinates.

    The loop closes from the last vertex back to ``vertices[0] + closure``
    where ``closure`` is an integer lattice vector, so curves wrapping the
    torus keep an exact homology record.  Lengths are lift lengths.
    """

    vertices: np.ndarray
    closure: tuple[int, int] = (0, 0)
    refinement_budget: int | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise DegenerateInput("polyline vertices must have shape (N, 2)")
        if self.vertices.shape[0] < 2:
            raise DegenerateInput("polyline needs at least two vertices")
        self._length = float(self._recompute_length())

    def _segments(self) -> np.ndarray:
        v = self.vertices
        closing = v[0] + np.asarray(self.closure, dtype=float)
        starts = v
        ends = np.vstack([v[1:], closing])
        return np.hstack([starts, ends])

    def _recompute_length(self) -> float:
        segs = self._segments()
        return float(
            np.sqrt((segs[:, 2] - segs[:, 0]) ** 2 + (segs[:, 3] - segs[:, 1]) ** 2).sum()
        )

    @property
    def length(self) -> float:
        return self._length

    def length_consistent(self, tol: float = 1e-9) -> bool:
        return abs(self._recompute_length() - self._length) <= tol


def vertical_circle(x: float = 0.25, n: int = 64) -> Polyline:
    ys = np.arange(n) / n
    return Polyline(np.stack([np.full(n, x), ys], axis=1), closure=(0, 1))


def horizontal_circle(y: float = 0.0, n: int = 4) -> Polyline:
    xs = np.arange(n) / n
    return Polyline(np.stack([xs, np.full(n, y)], axis=1), closure=(1, 0))


def lipschitz_bound(spec: TwistMapSpec, samples: int = 4096) -> float:
    """Global operator-norm bound of the tangent map over the torus."""
    x = np.arange(samples) / samples
    c = spec.K * np.cos(TWO_PI * x)
    # singular values of [[1-c, 1], [-c, 1]]
    a11, a12, a21, a22 = 1.0 - c, 1.0, -c, 1.0
    fr = a11**2 + a12**2 + a21**2 + a22**2
    det = np.abs(a11 * a22 - a12 * a21)  # == 1
    smax = np.sqrt((fr + np.sqrt(np.maximum(fr**2 - 4 * det**2, 0.0))) / 2.0)
    return float(smax.max())


@dataclass
class CurveGrowth:
    """Iterates of a closed curve with per-step bookkeeping."""

    initial: Polyline
    lengths: list[float]           # lift lengths, L_0 first
    final: Polyline
    steps_done: int
    budget_exhausted: bool
    lipschitz_global: float
    lipschitz_steps: list[float]   # max tangent norm measured along the curve
    vertex_counts: list[int]
    resolved_steps: list[bool]     # spacing tolerance met at this iterate

    def resolved_lengths(self) -> list[float]:
        """L_0 plus every iterate length the refinement fully resolved."""
        out = [self.lengths[0]]
        for length, ok in zip(self.lengths[1:], self.resolved_steps):
            if not ok:
                break
            out.append(length)
        return out


def _interp_on(poly: Polyline, ts: np.ndarray) -> np.ndarray:
    """Points at fractional vertex positions ``ts`` in [0, N)."""
    v = poly.vertices
    n = v.shape[0]
    closing = v[0] + np.asarray(poly.closure, dtype=float)
    ext = np.vstack([v, closing])
    i = np.floor(ts).astype(int)
    frac = ts - i
    return ext[i] * (1.0 - frac)[:, None] + ext[i + 1] * frac[:, None]


def iterate_curve(
    spec: TwistMapSpec,
    curve: Polyline,
    k: int,
    tol: float = 0.05,
    vertex_budget: int = 2_000_000,
) -> CurveGrowth:
    """Iterate a closed curve ``k`` times with adaptive refinement.

    After every map application, segments whose image endpoints are farther
    apart than ``tol`` are split at parameter midpoints of the *initial*
    curve and the new points are pushed through the map from scratch, so the
    polyline always samples the true iterated curve.  When the vertex budget
    runs out the refinement stops and the result carries a flag; lengths are
    then lower bounds.
    """
    if k < 0:
        raise ParameterOutOfRange("iteration count must be >= 0")
    n0 = curve.vertices.shape[0]
    ts = np.arange(n0, dtype=float)
    pts = curve.vertices.copy()
    closure = np.asarray(curve.closure, dtype=int)
    lengths = [curve.length]
    counts = [n0]
    lip_steps: list[float] = []
    resolved: list[bool] = []
    exhausted = False
    shear = np.array([[1, 1], [0, 1]])

    for step in range(1, k + 1):
        pts = map_apply_many(spec, pts)
        closure = shear @ closure
        lip_steps.append(_max_tangent_norm(spec, pts[:, 0]))
        step_resolved = True
        while True:
            gaps = _gap_lengths(pts, closure)
            bad = np.where(gaps > tol)[0]
            if bad.size == 0:
                break
            if pts.shape[0] + bad.size > vertex_budget:
                exhausted = True
                step_resolved = False
                break
            new_ts = _midpoint_params(ts, bad, n0)
            new_pts = _interp_on(curve, new_ts)
            for _ in range(step):
                new_pts = map_apply_many(spec, new_pts)
            ts = np.concatenate([ts, new_ts])
            order = np.argsort(ts, kind="stable")
            ts = ts[order]
            pts = np.concatenate([pts, new_pts])[order]
        lengths.append(float(_gap_lengths(pts, closure).sum()))
        counts.append(pts.shape[0])
        resolved.append(step_resolved)
        if exhausted:
            # finish remaining steps without refinement so callers still see
            # (under-resolved) lengths for every iterate
            for _ in range(step + 1, k + 1):
                pts = map_apply_many(spec, pts)
                closure = shear @ closure
                lip_steps.append(_max_tangent_norm(spec, pts[:, 0]))
                lengths.append(float(_gap_lengths(pts, closure).sum()))
                counts.append(pts.shape[0])
                resolved.append(False)
            break

    final = Polyline(pts, closure=tuple(int(c) for c in closure))
    return CurveGrowth(
        initial=curve,
        lengths=lengths,
        final=final,
        steps_done=k,
        budget_exhausted=exhausted,
        lipschitz_global=lipschitz_bound(spec),
        lipschitz_steps=lip_steps,
        vertex_counts=counts,
        resolved_steps=resolved,
    )


def length_growth_rate(growth: CurveGrowth, k_min: int = 2) -> tuple[float, float]:
    """Exponential rate of the resolved lengths, in bits per iteration.

    Fits ``log2 L_k = c + h k + p log2 k`` over the resolved window starting
    at ``k_min``; the ``log2 k`` regressor absorbs polynomial growth so an
    integrable map reports a rate near zero instead of the slope of its
    linear length growth.  Returns ``(h, p)``.
    """
    lengths = growth.resolved_lengths()
    ks = np.arange(k_min, len(lengths))
    if ks.size < 3:
        raise DegenerateInput(
            f"need at least 3 resolved iterates beyond k={k_min - 1} to fit a rate"
        )
    lk = np.log2(np.asarray(lengths, dtype=float)[ks])
    A = np.stack([np.ones(ks.size), ks, np.log2(ks)], axis=1)
    coef, *_ = np.linalg.lstsq(A, lk, rcond=None)
    return float(coef[1]), float(coef[2])


def _gap_lengths(pts: np.ndarray, closure: np.ndarray) -> np.ndarray:
    nxt = np.vstack([pts[1:], pts[0] + closure])
    return np.sqrt(((nxt - pts) ** 2).sum(axis=1))


def _midpoint_params(ts: np.ndarray, bad: np.ndarray, n0: int) -> np.ndarray:
    t0 = ts[bad]
    t1 = np.where(bad + 1 < ts.size, ts[(bad + 1) % ts.size], n0)
    return (t0 + t1) / 2.0


def _max_tangent_norm(spec: TwistMapSpec, xs: np.ndarray) -> float:
    c = spec.K * np.cos(TWO_PI * xs)
    fr = (1.0 - c) ** 2 + 1.0 + c**2 + 1.0
    smax = np.sqrt((fr + np.sqrt(np.maximum(fr**2 - 4.0, 0.0))) / 2.0)
    return float(smax.max())


# ---------------------------------------------------------------------------
# crossing counts on the torus
# ---------------------------------------------------------------------------


def _wrap_segments(poly: Polyline, shift_y: float = 0.0) -> np.ndarray:
    """Cut lift segments at integer lines and drop them into [0, 1)^2."""
    segs = poly._segments()
    if shift_y:
        segs = segs.copy()
        segs[:, 1] += shift_y
        segs[:, 3] += shift_y
    pieces: list[np.ndarray] = []
    for x0, y0, x1, y1 in segs:
        cuts = [0.0, 1.0]
        for a, b in ((x0, x1), (y0, y1)):
            lo, hi = (a, b) if a <= b else (b, a)
            first = math.floor(lo) + 1
            while first < hi:
                if b != a:
                    t = (first - a) / (b - a)
                    if 0.0 < t < 1.0:
                        cuts.append(t)
                first += 1
        cuts = sorted(set(cuts))
        for ta, tb in zip(cuts[:-1], cuts[1:]):
            mx = (ta + tb) / 2.0
            px = x0 + (x1 - x0) * ta
            py = y0 + (y1 - y0) * ta
            qx = x0 + (x1 - x0) * tb
            qy = y0 + (y1 - y0) * tb
            ox = math.floor(x0 + (x1 - x0) * mx)
            oy = math.floor(y0 + (y1 - y0) * mx)
            pieces.append(np.array([px - ox, py - oy, qx - ox, qy - oy]))
    if not pieces:
        return np.empty((0, 4))
    return np.vstack(pieces)


def count_intersections(a: Polyline, b: Polyline, delta: float = 1e-9) -> int:
    """Transversal crossing count of two closed torus curves.

    The second curve is shifted by ``delta`` in ``y`` before counting, which
    resolves tangential contacts and shared endpoints deterministically;
    exactly parallel overlaps contribute nothing.
    """
    segs_a = _wrap_segments(a)
    segs_b = _wrap_segments(b, shift_y=delta)
    return _kernels.count_segment_crossings(segs_a, segs_b)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_orbits_csv(records: Sequence[OrbitRecord], path) -> None:
    """One row per orbit: winding data, action, index, stability, points."""
    kmax = max((r.k for r in records), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = [
            "k[steps]",
            "m[winding]",
            "action[action]",
            "index[count]",
            "residue[1]",
            "hyperbolic[bool]",
        ] + [f"x{i}[torus]" for i in range(kmax)]
        w.writerow(header)
        for r in sorted(records, key=lambda r: (r.k, r.m, r.points)):
            row = [
                str(r.k),
                str(r.m),
                format(r.action, ".12g"),
                str(r.morse_index),
                format(r.residue, ".12g"),
                str(int(r.hyperbolic)),
            ]
            row += [format(x, ".12g") for x in r.points]
            row += [""] * (kmax - r.k)
            w.writerow(row)
