"""Synthetic barcode sequences with prescribed growth laws.

Real dynamics at desk scale cannot produce clean exponential count growth,
superexponential separations, or provable almost-periodicity, so the
estimators and inequality checks are calibrated against sequences built to
satisfy their defining law exactly:

- ``exponential_growth``: ``round(2**(c*k))`` unit-length finite bars plus
  two infinite bars per iterate.  An estimator that does not recover ``c``
  is wrong, not unlucky.
- ``superexp_count_shrinking_bars``: ``2**(k*k)`` bars of length
  ``2**(-k*k)`` plus four unit bars.  Total counts outrun every
  exponential, yet any fixed threshold eventually sees only the four unit
  bars -- count growth and threshold growth are different things.
- ``almost_periodic``: barcodes repeat with period ``N`` up to seeded
  endpoint perturbations of at most ``eps/4``.  Template bar lengths avoid
  the band around the working threshold, so the periodicity bound holds by
  construction rather than by luck of the draw.
- ``pseudo_rotation``: one and the same barcode of ``n+1`` infinite bars at
  every iterate; nothing finite, nothing growing.

Bar multisets are stored run-length compressed (count, length pairs inside
:class:`~barlab.persistence.Barcode`), which keeps the superexponential law
representable: ``2**900`` equal bars are a single tuple entry, and the
count statistics operate on exact integers throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entropy import BarcodeSequence
from .errors import ParameterOutOfRange
from .persistence import Barcode

__all__ = [
    "SyntheticLaw",
    "exponential_growth",
    "superexp_count_shrinking_bars",
    "almost_periodic",
    "pseudo_rotation",
    "generate",
    "ap_template",
    "write_sequence_csv",
]

KINDS = (
    "exponential_growth",
    "superexp_count_shrinking_bars",
    "almost_periodic",
    "pseudo_rotation",
)

# 2**(-k*k) must stay a normal float64; k = 31 is the last safe exponent,
# kept with a margin.
SUPEREXP_K_CAP = 30


@dataclass(frozen=True)
class SyntheticLaw:
    """A growth law, one of :data:`KINDS`, with its parameters.

    ``c`` is the target rate in bits per iteration (exponential_growth);
    ``period`` and ``eps`` shape the almost-periodic model (repeat period and
    working threshold); ``n`` is the pseudo-rotation class count; ``seed``
    drives the endpoint perturbations of the almost-periodic model.
    """

    kind: str
    c: float | None = None
    period: int | None = None
    eps: float | None = None
    n: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterOutOfRange(f"unknown synthetic law kind {self.kind!r}")
        if self.kind == "exponential_growth" and (self.c is None or not self.c > 0):
            raise ParameterOutOfRange(f"exponential growth needs rate c > 0, got {self.c}")
        if self.kind == "almost_periodic":
            if self.period is None or self.period < 1:
                raise ParameterOutOfRange(f"almost-periodic law needs period >= 1, got {self.period}")
            if self.eps is None or not self.eps > 0:
                raise ParameterOutOfRange(f"almost-periodic law needs eps > 0, got {self.eps}")
        if self.kind == "pseudo_rotation" and (self.n is None or self.n < 1):
            raise ParameterOutOfRange(f"pseudo-rotation law needs n >= 1, got {self.n}")


def exponential_growth(c: float) -> SyntheticLaw:
    return SyntheticLaw(kind="exponential_growth", c=c)


def superexp_count_shrinking_bars() -> SyntheticLaw:
    return SyntheticLaw(kind="superexp_count_shrinking_bars")


def almost_periodic(period: int, eps: float, seed: int = 0) -> SyntheticLaw:
    return SyntheticLaw(kind="almost_periodic", period=period, eps=eps, seed=seed)


def pseudo_rotation(n: int) -> SyntheticLaw:
    return SyntheticLaw(kind="pseudo_rotation", n=n)


def generate(law: SyntheticLaw, k_max: int) -> BarcodeSequence:
    """Materialize the law as a barcode per iterate ``k = 1..k_max``."""
    if k_max < 4:
        raise ParameterOutOfRange(f"k_max must be >= 4, got {k_max}")
    if law.kind == "exponential_growth":
        entries = {
            k: Barcode(
                finite=((0.0, 1.0, int(round(2.0 ** (law.c * k)))),),
                infinite=((0.0, 2),),
            )
            for k in range(1, k_max + 1)
        }
    elif law.kind == "superexp_count_shrinking_bars":
        if k_max > SUPEREXP_K_CAP:
            raise ParameterOutOfRange(
                f"k_max={k_max}: bar length 2**(-k*k) underflows float64 beyond "
                f"k={SUPEREXP_K_CAP}"
            )
        entries = {
            k: Barcode(
                finite=(
                    (0.0, 2.0 ** (-k * k), 2 ** (k * k)),
                    (0.0, 1.0, 4),
                )
            )
            for k in range(1, k_max + 1)
        }
    elif law.kind == "almost_periodic":
        entries = _almost_periodic_entries(law, k_max)
    else:
        infinite = tuple((0.1 * i, 1) for i in range(law.n + 1))
        entries = {k: Barcode(infinite=infinite) for k in range(1, k_max + 1)}
    return BarcodeSequence(entries=entries, provenance="synthetic")


def ap_template(law: SyntheticLaw, residue: int = 0) -> Barcode:
    """Unperturbed template of one residue class of the almost-periodic law.

    The residue-0 template doubles as the iterate-0 base case that
    ``ap_bound_check`` requires from its caller.
    """
    if law.kind != "almost_periodic":
        raise ParameterOutOfRange(f"templates exist only for almost_periodic laws, got {law.kind}")
    return _template(law, residue % law.period)


def _template(law: SyntheticLaw, residue: int) -> Barcode:
    """Bars of one residue class, lengths clear of the threshold band.

    Long bars are at least ``2.5*eps`` and short bars at most ``eps/8``;
    after endpoint perturbations of ``eps/4`` a long bar still exceeds both
    ``eps`` and ``eps/2``, and a short one never reaches ``eps``.  The count
    at the working threshold is therefore exactly the long-bar count of the
    residue class, which is what makes the periodicity bound provable.
    """
    eps = law.eps
    finite = []
    for j in range(2 + residue):
        finite.append((0.3 * j, 0.3 * j + (2.5 + 0.5 * j) * eps, 1))
    for j in range(1 + residue % 2):
        finite.append((0.1 + 0.2 * j, 0.1 + 0.2 * j + eps / 8.0, 1))
    return Barcode(finite=tuple(finite), infinite=((0.0, 2),))


def _almost_periodic_entries(law: SyntheticLaw, k_max: int) -> dict[int, Barcode]:
    rng = np.random.default_rng(law.seed)
    entries = {}
    for k in range(1, k_max + 1):
        template = _template(law, k % law.period)
        finite = []
        for b, d, mult in template.finite:
            for _ in range(mult):
                db, dd = rng.uniform(-law.eps / 4.0, law.eps / 4.0, size=2)
                # a short bar may vanish under the perturbation; that is
                # within the tolerance, so it is dropped rather than clamped
                if d + dd > b + db:
                    finite.append((b + db, d + dd, 1))
        entries[k] = Barcode(finite=tuple(finite), infinite=template.infinite)
    return entries


def write_sequence_csv(seq: BarcodeSequence, path) -> None:
    """Barcode CSV across iterates, with multiplicity kept as a column."""
    rows = ["k,kind,birth,death,length,multiplicity"]
    for k in seq.ks():
        bc = seq.entries[k]
        for b, d, m in sorted(bc.finite):
            rows.append("%d,finite,%.12g,%.12g,%.12g,%d" % (k, b, d, d - b, m))
        for b, m in sorted(bc.infinite):
            rows.append("%d,infinite,%.12g,,,%d" % (k, b, m))
    Path(path).write_text("\n".join(rows) + "\n")
