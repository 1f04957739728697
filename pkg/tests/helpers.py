"""Shared builders for randomized tests.

Two families of random-but-valid filtered complexes:

* two-layer complexes — a random birth/death split where death columns only
  ever hit birth generators, which makes the boundary square to zero by
  construction while still exercising ties, multiplicities, and unpaired
  generators;
* simplicial complexes — random filtered subcomplexes of a small simplex,
  where death generators themselves appear inside boundaries (the fully
  general shape of the reduction).
"""

from __future__ import annotations

import numpy as np

from barlab.persistence import FilteredComplex, Generator, build_complex


def random_two_layer_complex(
    rng: np.random.Generator,
    max_gens: int = 12,
    min_pair_gap: float = 0.0,
) -> FilteredComplex:
    n = int(rng.integers(1, max_gens + 1))
    n_births = int(rng.integers(max(1, n // 2), n + 1))
    actions = np.round(rng.uniform(0.0, 10.0, size=n), 3)
    births = list(range(n_births))
    gens = []
    boundary: dict[str, list[str]] = {}
    for i in range(n):
        gens.append(Generator(id=f"g{i}", action=float(actions[i])))
    for i in range(n_births, n):
        eligible = [
            b
            for b in births
            if actions[b] < actions[i] - min_pair_gap
        ]
        if not eligible or rng.random() < 0.15:
            continue  # stays a birth generator in effect (zero column)
        size = int(rng.integers(1, min(len(eligible), 4) + 1))
        picks = rng.choice(eligible, size=size, replace=False)
        boundary[f"g{i}"] = [f"g{int(p)}" for p in picks]
    return build_complex(gens, boundary)


def random_simplicial_complex(
    rng: np.random.Generator,
    n_vertices: int = 5,
    p_edge: float = 0.6,
    p_tri: float = 0.6,
) -> FilteredComplex:
    verts = list(range(n_vertices))
    action = {}
    gens = []
    boundary: dict[str, list[str]] = {}
    for v in verts:
        a = float(np.round(rng.uniform(0, 1), 3))
        action[(v,)] = a
        gens.append(Generator(id=f"v{v}", action=a))
    edges = []
    for i in range(n_vertices):
        for j in range(i + 1, n_vertices):
            if rng.random() < p_edge:
                base = max(action[(i,)], action[(j,)])
                a = float(np.round(base + rng.uniform(0.01, 0.5), 3))
                action[(i, j)] = a
                edges.append((i, j))
                gens.append(Generator(id=f"e{i}_{j}", action=a))
                boundary[f"e{i}_{j}"] = [f"v{i}", f"v{j}"]
    edge_set = set(edges)
    for i in range(n_vertices):
        for j in range(i + 1, n_vertices):
            for k in range(j + 1, n_vertices):
                if (
                    (i, j) in edge_set
                    and (j, k) in edge_set
                    and (i, k) in edge_set
                    and rng.random() < p_tri
                ):
                    base = max(action[(i, j)], action[(j, k)], action[(i, k)])
                    a = float(np.round(base + rng.uniform(0.01, 0.5), 3))
                    gens.append(Generator(id=f"t{i}_{j}_{k}", action=a))
                    boundary[f"t{i}_{j}_{k}"] = [
                        f"e{i}_{j}",
                        f"e{j}_{k}",
                        f"e{i}_{k}",
                    ]
    return build_complex(gens, boundary)


def random_complex(rng: np.random.Generator, max_gens: int = 12) -> FilteredComplex:
    """Mix of the two families, sized to stay at or below ``max_gens``."""
    if rng.random() < 0.5:
        return random_two_layer_complex(rng, max_gens=max_gens)
    # 4 vertices caps the simplex at 4 + 6 + 4 = 14 faces; thin it out
    cx = random_simplicial_complex(
        rng, n_vertices=int(rng.integers(2, 5)), p_edge=0.55, p_tri=0.5
    )
    if cx.n_generators > max_gens:
        return random_two_layer_complex(rng, max_gens=max_gens)
    return cx


def perturbed_actions_complex(
    cx: FilteredComplex, rng: np.random.Generator, delta: float
) -> FilteredComplex:
    """Same boundary matrix, every action shifted by at most ``delta``."""
    gens = [
        Generator(g.id, g.action + float(rng.uniform(-delta, delta)), g.degree, g.label)
        for g in cx.generators
    ]
    return build_complex(gens, {c: sorted(p) for c, p in cx.boundary.items()})
