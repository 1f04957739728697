"""Growth-rate estimators for sequences of barcodes.

A barcode sequence assigns to each iterate count ``k`` the barcode of the
``k``-th iterate of a system (a grid job, an orbit complex, or a synthetic
growth law).  The estimators here measure how fast threshold bar counts

    ``b_k(eps) = #{finite bars of B_k longer than max(eps, floor_k)}``

grow with ``k``, in bits per iteration.  ``floor_k`` is an optional per-``k``
noise floor the producer attaches to the sequence; grid jobs set it to twice
their refinement modulus so that discretization debris is never counted as
growth.  Infinite bars are excluded by default: for the configuration-torus
grid model their number is ``2**k`` by construction, a kinematic count that
would masquerade as one bit per iteration, while for annulus-like inputs it
is a small constant that contributes nothing to a slope.  Pass
``include_infinite=True`` to count them anyway.

The limiting growth rate is out of reach at finite ``k``, so two
finite-sample surrogates are reported side by side: the least-squares slope
of ``log2 b`` over the fit window (primary, with its residual), and the
maximum of ``log2(b_k)/k`` (secondary; a ceiling that is monotone when one
count sequence dominates another pointwise).  Both clamp at zero, and both
return exactly zero when the counts are all zero or constant -- a bounded
count sequence carries no growth.  When no window is given the fit runs
over the tail half of the sequence, since the quantity being estimated is
a limsup and early transients would otherwise bias it.

Thresholds may depend on ``k`` through a :class:`Schedule`.  Only
subexponentially decaying schedules make the growth comparison meaningful;
:func:`is_subexponential` certifies closed-form kinds analytically and
explicit lists empirically, and estimator calls with a failing schedule are
tagged but still computed.

Logarithms are base 2 throughout, with ``log_plus(0) = 0`` so that empty
counts carry no bits (see :func:`log_plus`).
"""

from __future__ import annotations

import json
import math
import warnings
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CoverageGap,
    DegenerateInput,
    EmptyGrid,
    EmptySchedule,
    NonDyadicGrid,
    NonpositiveEpsilon,
    NonSubexponentialSchedule,
    NotIncreasing,
    ParameterOutOfRange,
    RangeMismatch,
    ScheduleRangeMismatch,
    TooShort,
    WindowTooSmall,
)
from .persistence import Barcode, b_eps_finite, min_finite_length

__all__ = [
    "BarcodeSequence",
    "Schedule",
    "SubexpCertificate",
    "EntropyEstimate",
    "BarcodeEntropy",
    "EntropyReport",
    "HtopBoundReport",
    "GapClassification",
    "ApBoundReport",
    "AiIterationReport",
    "log_plus",
    "is_subexponential",
    "epsilon_entropy",
    "sequential_entropy",
    "barcode_entropy",
    "entropy_report",
    "shortest_bar_series",
    "htop_bound_check",
    "quasi_arithmetic_gaps",
    "ap_bound_check",
    "ai_iteration_check",
]

PROVENANCES = ("grid", "orbit", "synthetic")

# Empirical subexponentiality: |log2 eps_k| / k must fall below this over the
# tail third of an explicit schedule.  Coarse, but it separates polynomial
# from exponential decay decisively for ranges up to k ~ 50.
SUBEXP_TAIL_TOLERANCE = 0.01


def log_plus(x) -> float:
    """Base-2 logarithm with ``log_plus(x) = 0`` for ``x <= 0``.

    The zero convention makes empty bar counts carry zero bits instead of
    blowing up a slope fit.  Accepts exact integers of any size (the
    synthetic superexponential law produces counts far beyond float range).
    """
    if x <= 0:
        return 0.0
    return math.log2(x)


# ---------------------------------------------------------------------------
# sequences and schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BarcodeSequence:
    """Barcodes indexed by iterate count, with an optional noise floor.

    ``entries`` maps each positive iterate count to its barcode.
    ``noise_floor`` gives, per iterate, a length below which finite bars are
    not trusted (grid producers use twice the refinement modulus; synthetic
    and orbit producers leave it empty).  Counting respects the floor:
    a bar enters ``count(k, eps)`` only if it is longer than both ``eps``
    and the floor.
    """

    entries: Mapping[int, Barcode]
    provenance: str = "synthetic"
    noise_floor: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        object.__setattr__(self, "noise_floor", dict(self.noise_floor))
        if not self.entries:
            raise DegenerateInput("barcode sequence has no entries")
        for k in self.entries:
            if not (isinstance(k, (int, np.integer)) and int(k) >= 1):
                raise ParameterOutOfRange(
                    f"iterate counts must be positive integers, got {k!r}"
                )
        if self.provenance not in PROVENANCES:
            raise ParameterOutOfRange(
                f"provenance must be one of {PROVENANCES}, got {self.provenance!r}"
            )
        for k, floor in self.noise_floor.items():
            if floor < 0:
                raise ParameterOutOfRange(f"noise floor at k={k} is negative")

    def ks(self) -> list[int]:
        return sorted(int(k) for k in self.entries)

    def count(self, k: int, eps: float, include_infinite: bool = False) -> int:
        """Bars of the k-th barcode longer than ``max(eps, floor_k)``."""
        if not eps > 0:
            raise NonpositiveEpsilon(f"eps must be > 0, got {eps}")
        bc = self.entries[k]
        n = b_eps_finite(bc, max(eps, self.noise_floor.get(k, 0.0)))
        if include_infinite:
            n += bc.n_infinite
        return n


@dataclass(frozen=True)
class Schedule:
    """Threshold sequence ``eps_k``, either closed-form or explicit.

    Kinds: ``constant`` (eps), ``power`` (eps * k**-p), ``exponential``
    (eps * 2**(-eta k)), ``explicit`` (a map k -> eps_k that must cover
    whatever range it is evaluated on).
    """

    kind: str
    eps: float | None = None
    p: float | None = None
    eta: float | None = None
    values: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "power", "exponential", "explicit"):
            raise ParameterOutOfRange(f"unknown schedule kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.values:
                raise EmptySchedule("explicit schedule has no values")
            object.__setattr__(self, "values", dict(self.values))
            for k, e in self.values.items():
                if not (isinstance(k, (int, np.integer)) and int(k) >= 1):
                    raise ParameterOutOfRange(f"schedule index {k!r} not a positive integer")
                if not e > 0:
                    raise NonpositiveEpsilon(f"schedule value at k={k} must be > 0, got {e}")
            return
        if self.eps is None or not self.eps > 0:
            raise NonpositiveEpsilon(f"schedule base threshold must be > 0, got {self.eps}")
        if self.kind == "power" and (self.p is None or not self.p > 0):
            raise ParameterOutOfRange(f"power schedule needs decay exponent p > 0, got {self.p}")
        if self.kind == "exponential" and (self.eta is None or not self.eta > 0):
            raise ParameterOutOfRange(f"exponential schedule needs rate eta > 0, got {self.eta}")

    @classmethod
    def constant(cls, eps: float) -> "Schedule":
        return cls(kind="constant", eps=eps)

    @classmethod
    def power(cls, eps: float, p: float = 1.0) -> "Schedule":
        return cls(kind="power", eps=eps, p=p)

    @classmethod
    def exponential(cls, eps: float, eta: float) -> "Schedule":
        return cls(kind="exponential", eps=eps, eta=eta)

    @classmethod
    def explicit(cls, values: Mapping[int, float]) -> "Schedule":
        return cls(kind="explicit", values=values)

    def value_at(self, k: int) -> float:
        if k < 1:
            raise ParameterOutOfRange(f"iterate count must be >= 1, got {k}")
        if self.kind == "constant":
            return self.eps
        if self.kind == "power":
            return self.eps * float(k) ** (-self.p)
        if self.kind == "exponential":
            return self.eps * 2.0 ** (-self.eta * k)
        try:
            return self.values[k]
        except KeyError:
            raise ScheduleRangeMismatch(
                f"explicit schedule has no value at k={k}"
            ) from None

    def describe(self) -> str:
        if self.kind == "constant":
            return f"eps={self.eps:g}"
        if self.kind == "power":
            return f"eps={self.eps:g}*k^-{self.p:g}"
        if self.kind == "exponential":
            return f"eps={self.eps:g}*2^-{self.eta:g}k"
        ks = sorted(self.values)
        return f"explicit[{ks[0]}..{ks[-1]}]"


@dataclass(frozen=True)
class SubexpCertificate:
    """Outcome of the subexponential-decay test, with the rule that decided it."""

    subexponential: bool
    rule: str
    statistic: float | None = None

    def __bool__(self) -> bool:
        return self.subexponential


def is_subexponential(schedule: Schedule) -> SubexpCertificate:
    """Decide whether ``log2(eps_k)/k -> 0`` for the schedule.

    Closed-form kinds are decided analytically; explicit lists by the tail
    test ``|log2 eps_k|/k < SUBEXP_TAIL_TOLERANCE`` over the last third of
    the range.  The certificate records which rule fired.
    """
    if schedule.kind == "constant":
        return SubexpCertificate(True, "analytic: constant threshold")
    if schedule.kind == "power":
        return SubexpCertificate(
            True, f"analytic: polynomial decay k^-{schedule.p:g}, log2(eps_k)/k -> 0"
        )
    if schedule.kind == "exponential":
        return SubexpCertificate(
            False,
            f"analytic: log2(eps_k)/k -> -eta = {-schedule.eta:g} != 0",
            statistic=-schedule.eta,
        )
    if not schedule.values:
        raise EmptySchedule("explicit schedule has no values")
    ks = sorted(schedule.values)
    tail = ks[-max(1, math.ceil(len(ks) / 3)):]
    stat = max(abs(log_plus(schedule.values[k])) / k for k in tail)
    ok = stat < SUBEXP_TAIL_TOLERANCE
    return SubexpCertificate(
        ok,
        f"empirical: tail max |log2 eps_k|/k = {stat:.4g} "
        f"{'<' if ok else '>='} {SUBEXP_TAIL_TOLERANCE}",
        statistic=stat,
    )


# ---------------------------------------------------------------------------
# growth-rate estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntropyEstimate:
    """Growth rate of a threshold bar-count sequence, bits per iteration.

    ``value`` is the least-squares slope of ``log2 b_k`` against ``k`` over
    the iterates with positive counts, clamped at zero; exactly zero when the
    counts are all zero or constant.  ``secondary`` is ``max log2(b_k)/k``
    over the window.  ``residual`` is the rms deviation of the fit.
    """

    value: float
    residual: float
    secondary: float
    window: tuple[int, int]
    fit_ks: tuple[int, ...]
    counts: Mapping[int, int]
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(self.counts))
        assert math.isfinite(self.value) and self.value >= 0.0

    def __float__(self) -> float:
        return self.value


def _window_ks(seq: BarcodeSequence, window: tuple[int, int] | None) -> list[int]:
    ks = seq.ks()
    if window is None:
        # Tail half (never fewer than three iterates): the estimators stand in
        # for a limsup, so by default early transients are left out of the fit.
        return ks[-max(3, math.ceil(len(ks) / 2)):]
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise ParameterOutOfRange(f"window {window} is empty")
    return [k for k in ks if lo <= k <= hi]


def _slope_fit(ks: Sequence[int], bs: Sequence[int]) -> tuple[float, float, tuple[int, ...]]:
    """LS slope of log2 b against k over the positive counts, clamped at 0."""
    positive = [(k, b) for k, b in zip(ks, bs) if b > 0]
    if len(positive) < 2:
        return 0.0, 0.0, tuple(k for k, _ in positive)
    if len({b for _, b in positive}) == 1:
        return 0.0, 0.0, tuple(k for k, _ in positive)
    x = np.array([k for k, _ in positive], dtype=float)
    y = np.array([log_plus(b) for _, b in positive], dtype=float)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return max(float(coef[0]), 0.0), resid, tuple(int(k) for k, _ in positive)


def _estimate(
    seq: BarcodeSequence,
    eps_at,
    window: tuple[int, int] | None,
    include_infinite: bool,
    note: str,
) -> EntropyEstimate:
    ks = _window_ks(seq, window)
    if len(ks) < 3:
        raise WindowTooSmall(
            f"need at least 3 iterates in the window, have {len(ks)}"
        )
    counts = {k: seq.count(k, eps_at(k), include_infinite) for k in ks}
    value, resid, fit_ks = _slope_fit(ks, [counts[k] for k in ks])
    secondary = max((log_plus(counts[k]) / k for k in ks), default=0.0)
    return EntropyEstimate(
        value=value,
        residual=resid,
        secondary=secondary,
        window=(ks[0], ks[-1]),
        fit_ks=fit_ks,
        counts=counts,
        note=note,
    )


def epsilon_entropy(
    seq: BarcodeSequence,
    eps: float,
    window: tuple[int, int] | None = None,
    *,
    include_infinite: bool = False,
) -> EntropyEstimate:
    """Growth rate of ``b_eps`` at a fixed threshold, bits per iteration."""
    if not eps > 0:
        raise NonpositiveEpsilon(f"eps must be > 0, got {eps}")
    return _estimate(seq, lambda k: eps, window, include_infinite, note="")


def sequential_entropy(
    seq: BarcodeSequence,
    schedule: Schedule,
    window: tuple[int, int] | None = None,
    *,
    include_infinite: bool = False,
) -> EntropyEstimate:
    """Growth rate under a k-dependent threshold schedule.

    A constant schedule reproduces :func:`epsilon_entropy` bit for bit.
    Schedules that fail the subexponential-decay test are still evaluated,
    but the estimate carries a warning note: against a threshold that decays
    exponentially, count growth no longer separates dynamics from noise.
    """
    cert = is_subexponential(schedule)
    note = ""
    if not cert:
        note = "non-subexponential schedule; growth comparisons inapplicable"
        warnings.warn(note + f" ({cert.rule})", NonSubexponentialSchedule, stacklevel=2)
    return _estimate(seq, schedule.value_at, window, include_infinite, note=note)


@dataclass(frozen=True)
class BarcodeEntropy:
    """Max of epsilon_entropy over a decreasing threshold grid, with profile."""

    value: float
    profile: tuple[tuple[float, EntropyEstimate], ...]

    def __float__(self) -> float:
        return self.value


def barcode_entropy(
    seq: BarcodeSequence,
    eps_grid: Sequence[float],
    window: tuple[int, int] | None = None,
    *,
    include_infinite: bool = False,
) -> BarcodeEntropy:
    """Threshold-free growth rate: the sup over ``eps -> 0`` is approximated
    by the max of :func:`epsilon_entropy` over a strictly decreasing grid
    (valid because the rate is nondecreasing as the threshold shrinks)."""
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise EmptyGrid("threshold grid has no entries")
    if any(not e > 0 for e in grid):
        raise NonpositiveEpsilon("threshold grid values must be > 0")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ParameterOutOfRange("threshold grid must be strictly decreasing")
    profile = tuple(
        (e, epsilon_entropy(seq, e, window, include_infinite=include_infinite))
        for e in grid
    )
    return BarcodeEntropy(
        value=max(est.value for _, est in profile),
        profile=profile,
    )


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntropyReport:
    """Full estimator output for one sequence: count table, per-threshold
    slopes, an optional schedule estimate, and inequality verdicts."""

    provenance: str
    window: tuple[int, int]
    eps_grid: tuple[float, ...]
    table: Mapping[tuple[float, int], int]
    profile: tuple[tuple[float, EntropyEstimate], ...]
    barcode_entropy: float
    sequential: EntropyEstimate | None
    schedule: Schedule | None
    verdicts: Mapping[str, bool]

    def __post_init__(self):
        object.__setattr__(self, "table", dict(self.table))
        object.__setattr__(self, "verdicts", dict(self.verdicts))
        for key, b in self.table.items():
            assert b >= 0 and int(b) == b, f"count table entry {key} -> {b!r}"
        for _, est in self.profile:
            assert math.isfinite(est.value)

    def to_json_dict(self) -> dict:
        out = {
            "provenance": self.provenance,
            "window": list(self.window),
            "eps_grid": list(self.eps_grid),
            "table": [
                {"eps": e, "k": k, "count": int(b)}
                for (e, k), b in sorted(self.table.items(), key=lambda kv: (-kv[0][0], kv[0][1]))
            ],
            "profile": [
                {
                    "eps": e,
                    "value": est.value,
                    "residual": est.residual,
                    "secondary": est.secondary,
                    "fit_ks": list(est.fit_ks),
                }
                for e, est in self.profile
            ],
            "barcode_entropy": self.barcode_entropy,
            "verdicts": dict(sorted(self.verdicts.items())),
        }
        if self.sequential is not None:
            out["sequential"] = {
                "schedule": self.schedule.describe(),
                "value": self.sequential.value,
                "residual": self.sequential.residual,
                "secondary": self.sequential.secondary,
                "counts": {str(k): int(v) for k, v in sorted(self.sequential.counts.items())},
                "note": self.sequential.note,
            }
        return out

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    def write_csv(self, path) -> None:
        rows = ["eps,k,count"]
        for (e, k), b in sorted(self.table.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
            rows.append("%.12g,%d,%d" % (e, k, b))
        Path(path).write_text("\n".join(rows) + "\n")

    def write_plot_data(self, directory, stem: str = "counts") -> list[Path]:
        """One two-column (k, count) text file per threshold; returns paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, e in enumerate(self.eps_grid):
            lines = [
                "%d %d" % (k, self.table[(e, k)])
                for k in sorted(k for (ee, k) in self.table if ee == e)
            ]
            p = directory / f"{stem}_eps{i}.dat"
            p.write_text("# eps = %.12g\n" % e + "\n".join(lines) + "\n")
            paths.append(p)
        return paths


def entropy_report(
    seq: BarcodeSequence,
    eps_grid: Sequence[float],
    schedule: Schedule | None = None,
    window: tuple[int, int] | None = None,
    *,
    include_infinite: bool = False,
    order_tolerance: float = 0.02,
) -> EntropyReport:
    """Run the whole estimator battery on one sequence.

    Verdicts recorded (measured, never asserted): the per-threshold profile
    is nondecreasing as the threshold shrinks, and -- when a schedule is
    given -- its estimate dominates the constant-threshold estimate at the
    schedule's largest value minus ``order_tolerance`` (a schedule that is
    pointwise smaller counts at least as many bars everywhere).
    """
    be = barcode_entropy(seq, eps_grid, window, include_infinite=include_infinite)
    ks = _window_ks(seq, window)
    table = {
        (float(e), k): seq.count(k, float(e), include_infinite)
        for e in eps_grid
        for k in ks
    }
    values = [est.value for _, est in be.profile]
    verdicts = {
        "profile_nondecreasing_as_eps_shrinks": all(
            b >= a - 1e-12 for a, b in zip(values, values[1:])
        ),
    }
    sequential = None
    if schedule is not None:
        sequential = sequential_entropy(
            seq, schedule, window, include_infinite=include_infinite
        )
        eps_top = max(schedule.value_at(k) for k in ks)
        const = epsilon_entropy(seq, eps_top, window, include_infinite=include_infinite)
        verdicts["sequential_dominates_constant"] = (
            sequential.value >= const.value - order_tolerance
        )
    return EntropyReport(
        provenance=seq.provenance,
        window=(ks[0], ks[-1]),
        eps_grid=tuple(float(e) for e in eps_grid),
        table=table,
        profile=be.profile,
        barcode_entropy=be.value,
        sequential=sequential,
        schedule=schedule,
        verdicts=verdicts,
    )


# ---------------------------------------------------------------------------
# inequality checks
# ---------------------------------------------------------------------------

def shortest_bar_series(seq: BarcodeSequence) -> dict[int, float]:
    """Per-iterate length of the shortest finite bar; iterates without
    finite bars are omitted rather than defaulted."""
    out = {}
    for k in seq.ks():
        shortest = min_finite_length(seq.entries[k])
        if shortest is not None:
            out[k] = shortest
    return out


@dataclass(frozen=True)
class HtopRow:
    k: int
    slack: float
    allowance: float
    satisfied: bool


@dataclass(frozen=True)
class HtopBoundReport:
    """Per-iterate slack of ``k*htop + d*|log2 beta_min| >= log2 p(k)``.

    ``slack`` is the left side minus the right; a fitted sublinear allowance
    ``a*sqrt(k)`` (coefficient clamped at zero) plus ``tolerance`` bits of
    constant headroom absorb the bounded and lower-order terms the asymptotic
    statement ignores."""

    rows: tuple[HtopRow, ...]
    satisfied: bool
    allowance_coeff: float
    tolerance: float


def htop_bound_check(
    p_series: Mapping[int, int],
    beta_min_series: Mapping[int, float],
    d: int,
    htop_estimate: float,
    *,
    tolerance: float = 2.0,
) -> HtopBoundReport:
    """Check that periodic-point growth is paid for by entropy and bar shrinkage.

    ``p_series`` counts periodic points (or total bars) per iterate,
    ``beta_min_series`` the shortest finite bar length, ``d`` the dimension
    weight on the bar term.  The shortfall ``log2 p(k) - k*htop -
    d*|log2 beta_min_k|`` is fitted to ``a*sqrt(k)`` through the origin; a
    row is satisfied when its slack plus the fitted allowance plus
    ``tolerance`` (default two bits, a factor 4 in counts) is nonnegative.
    """
    if d < 1:
        raise ParameterOutOfRange(f"dimension weight d must be >= 1, got {d}")
    if htop_estimate < 0:
        raise ParameterOutOfRange(f"htop estimate must be >= 0, got {htop_estimate}")
    if set(p_series) != set(beta_min_series):
        raise RangeMismatch(
            f"series cover different iterates: {sorted(p_series)} vs {sorted(beta_min_series)}"
        )
    if not p_series:
        raise RangeMismatch("series are empty")
    ks = sorted(p_series)
    slack = {
        k: k * htop_estimate
        + d * abs(log_plus(beta_min_series[k]))
        - log_plus(p_series[k])
        for k in ks
    }
    sq = np.sqrt(np.array(ks, dtype=float))
    shortfall = np.array([-slack[k] for k in ks])
    coeff = max(float((sq @ shortfall) / (sq @ sq)), 0.0)
    rows = tuple(
        HtopRow(
            k=k,
            slack=slack[k],
            allowance=coeff * math.sqrt(k),
            satisfied=slack[k] + coeff * math.sqrt(k) + tolerance >= 0.0,
        )
        for k in ks
    )
    return HtopBoundReport(
        rows=rows,
        satisfied=all(r.satisfied for r in rows),
        allowance_coeff=coeff,
        tolerance=tolerance,
    )


@dataclass(frozen=True)
class GapClassification:
    """Gap structure of an increasing iterate list."""

    max_gap: int
    bounded: bool
    alpha_tail: float
    gaps: tuple[int, ...]


def quasi_arithmetic_gaps(k_list: Sequence[int]) -> GapClassification:
    """Classify the gaps of a strictly increasing integer list.

    Reports the largest gap, whether the tail third shows no gap growth
    beyond the head (the finite-sample reading of "bounded gaps"), and the
    smallest ``alpha`` with ``k_{i+1} - k_i <= alpha * k_i`` over the tail.
    """
    ks = [int(k) for k in k_list]
    if len(ks) < 3:
        raise TooShort(f"need at least 3 iterates to classify gaps, got {len(ks)}")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise NotIncreasing(f"iterate list must be strictly increasing: {ks}")
    gaps = [b - a for a, b in zip(ks, ks[1:])]
    n_tail = max(1, math.ceil(len(gaps) / 3))
    head, tail = gaps[:-n_tail], gaps[-n_tail:]
    bounded = max(tail) <= max(head) if head else True
    alpha_tail = max(g / a for g, a in zip(tail, ks[-n_tail - 1:-1]))
    return GapClassification(
        max_gap=max(gaps),
        bounded=bounded,
        alpha_tail=alpha_tail,
        gaps=tuple(gaps),
    )


@dataclass(frozen=True)
class ApBoundReport:
    """Almost-periodicity bound: counts at returns stay under a short-time max."""

    bound: int
    gap: int
    eps: float
    checked: tuple[int, ...]
    violations: tuple[tuple[int, int], ...]
    classification: GapClassification

    @property
    def passed(self) -> bool:
        return not self.violations


def ap_bound_check(
    seq: BarcodeSequence,
    k_list: Sequence[int],
    eps: float,
    *,
    k0: Barcode | None = None,
    include_infinite: bool = False,
) -> ApBoundReport:
    """Check ``b_eps(k) <= max over l in 0..N of b_{eps/2}(l)`` at returns.

    ``k_list`` is the subsequence of near-identity returns; its largest gap
    ``N`` bounds how far any iterate sits from a return, so every
    representable ``k = k_i + l`` with ``0 <= l <= N`` must have its count
    dominated by the short-time max at the halved threshold.  ``k0`` supplies
    the iterate-0 barcode (model-dependent base case; required).  Raises
    :class:`CoverageGap` when the sequence is missing iterates ``1..N``.
    """
    if not eps > 0:
        raise NonpositiveEpsilon(f"eps must be > 0, got {eps}")
    classification = quasi_arithmetic_gaps(k_list)
    n_gap = classification.max_gap
    if k0 is None:
        raise CoverageGap("iterate-0 barcode must be supplied (model-dependent base case)")
    missing = [l for l in range(1, n_gap + 1) if l not in seq.entries]
    if missing:
        raise CoverageGap(
            f"sequence lacks iterates {missing} needed for the short-time bound (gap N={n_gap})"
        )
    half = eps / 2.0
    bound = b_eps_finite(k0, half) + (k0.n_infinite if include_infinite else 0)
    for l in range(1, n_gap + 1):
        bound = max(bound, seq.count(l, half, include_infinite))
    returns = sorted(int(k) for k in k_list)
    checked = []
    violations = []
    for k in seq.ks():
        if not any(ki <= k <= ki + n_gap for ki in returns):
            continue
        checked.append(k)
        b = seq.count(k, eps, include_infinite)
        if b > bound:
            violations.append((k, b))
    return ApBoundReport(
        bound=bound,
        gap=n_gap,
        eps=eps,
        checked=tuple(checked),
        violations=tuple(violations),
        classification=classification,
    )


@dataclass(frozen=True)
class AiIterationReport:
    """Outcome of iterating ``rate(eps) <= alpha * rate(eps/2)`` down a grid."""

    alpha: float
    holds: bool
    chain_bound: float
    consistent_zero: bool
    divergent: bool
    verdict: str
    failures: tuple[float, ...]


def ai_iteration_check(
    profile: Mapping[float, float],
    alpha: float,
    *,
    tolerance: float = 1e-9,
    conclusion_tolerance: float = 0.05,
) -> AiIterationReport:
    """Iterate a contraction inequality down a dyadic threshold grid.

    If ``rate(eps) <= alpha * rate(eps/2)`` holds at every halving, chaining
    gives ``rate(eps0) <= alpha^m * rate(eps_min)``.  When that chained bound
    collapses below ``conclusion_tolerance`` the profile is consistent with
    zero growth at every threshold; when the profile itself grows fast enough
    to keep the bound away from zero, the profile is flagged divergent
    (no finite rate is consistent with it).
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterOutOfRange(f"alpha must be in (0, 1), got {alpha}")
    eps_sorted = sorted(profile, reverse=True)
    if len(eps_sorted) < 2:
        raise TooShort("need at least two thresholds to iterate")
    for a, b in zip(eps_sorted, eps_sorted[1:]):
        if abs(b - a / 2.0) > 1e-9 * max(a, 1.0):
            raise NonDyadicGrid(f"grid step {a} -> {b} is not a halving")
    failures = tuple(
        a for a, b in zip(eps_sorted, eps_sorted[1:])
        if profile[a] > alpha * profile[b] + tolerance
    )
    m = len(eps_sorted) - 1
    chain_bound = (alpha ** m) * profile[eps_sorted[-1]]
    holds = not failures
    consistent_zero = holds and chain_bound <= conclusion_tolerance
    divergent = holds and not consistent_zero
    if not holds:
        verdict = "halving inequality fails; no conclusion"
    elif consistent_zero:
        verdict = "chained bound collapses: zero growth rate consistent at every threshold"
    else:
        verdict = "profile growth defeats the iteration: inconsistent with a finite rate"
    return AiIterationReport(
        alpha=alpha,
        holds=holds,
        chain_bound=chain_bound,
        consistent_zero=consistent_zero,
        divergent=divergent,
        verdict=verdict,
        failures=failures,
    )
