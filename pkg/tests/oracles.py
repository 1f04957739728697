"""Independent reference implementations used to pin expected test values.

The barcode oracle here never touches the package's reduction kernel: it
computes ranks of sublevel-inclusion maps at every pair of action thresholds
by Gaussian elimination on integer bitmasks, and recovers the bar multiset by
inclusion-exclusion over threshold pairs.  Slow, obviously correct, and only
ever run at tiny sizes.
"""

from __future__ import annotations

from collections import Counter


def rank_f2(columns: list[int]) -> int:
    """Rank over F2 of a matrix whose columns are integer bitmasks."""
    basis: dict[int, int] = {}
    rank = 0
    for col in columns:
        cur = col
        while cur:
            hb = cur.bit_length() - 1
            if hb in basis:
                cur ^= basis[hb]
            else:
                basis[hb] = cur
                rank += 1
                break
    return rank


def oracle_barcode(cx) -> tuple[Counter, Counter]:
    """Bar multiset of a filtered complex from sublevel ranks.

    Returns ``(finite, infinite)`` counters keyed by ``(birth, death)`` and
    ``birth``.  Bars of zero length (same birth and death threshold) are
    invisible to this construction by design, matching the convention that a
    bar must have positive length.
    """
    gens = list(cx.generators)
    n = len(gens)
    index = {g.id: i for i, g in enumerate(gens)}
    cols = [0] * n
    for child, parents in cx.boundary.items():
        mask = 0
        for p in parents:
            mask |= 1 << index[p]
        cols[index[child]] = mask

    thresholds = sorted({g.action for g in gens})
    T = len(thresholds)

    # generators present at or below each threshold, as index lists / masks
    below: list[list[int]] = []
    above_mask: list[int] = []
    for t in thresholds:
        ids = [i for i, g in enumerate(gens) if g.action <= t]
        below.append(ids)
        am = 0
        for i, g in enumerate(gens):
            if g.action > t:
                am |= 1 << i
        above_mask.append(am)

    d_cols = [[cols[i] for i in below[j]] for j in range(T)]
    rank_full = [rank_f2(d_cols[j]) for j in range(T)]
    kerdim = [len(below[j]) - rank_full[j] for j in range(T)]

    def rrank(j: int, i: int) -> int:
        """Rank of the level-j boundary with rows at or below level i removed."""
        mask = above_mask[i]
        return rank_f2([c & mask for c in d_cols[j]])

    # R[i][j]: classes born at or below threshold i, still alive strictly
    # after threshold j (1-based thresholds; R[0][.] == 0)
    R = [[0] * (T + 1) for _ in range(T + 1)]
    for i in range(1, T + 1):
        for j in range(i, T + 1):
            R[i][j] = kerdim[i - 1] - (rank_full[j - 1] - rrank(j - 1, i - 1))

    finite: Counter = Counter()
    infinite: Counter = Counter()
    for i in range(1, T + 1):
        # survivors to the top of the filtration never die
        mult_inf = R[i][T] - R[i - 1][T]
        if mult_inf:
            infinite[thresholds[i - 1]] += mult_inf
        for j in range(i + 1, T + 1):
            mult = R[i][j - 1] - R[i - 1][j - 1] - R[i][j] + R[i - 1][j]
            if mult:
                finite[(thresholds[i - 1], thresholds[j - 1])] += mult
    return finite, infinite


def oracle_b_eps(cx, eps: float) -> int:
    """Threshold count straight from the oracle bars."""
    finite, infinite = oracle_barcode(cx)
    count = sum(infinite.values())
    count += sum(m for (b, d), m in finite.items() if d - b > eps)
    return count
