import json

import numpy as np
import pytest

from barlab.errors import (
    AcyclicComplex,
    BoundarySquareNonzero,
    DegenerateInput,
    DuplicateId,
    FiltrationViolation,
    NonpositiveAlpha,
    NonpositiveEpsilon,
)
from barlab.persistence import (
    Barcode,
    Generator,
    b_eps,
    b_eps_finite,
    barcode,
    barcodes_match,
    boundary_depth,
    build_complex,
    complex_from_json,
    complex_to_json,
    dual_complex,
    load_complex,
    min_finite_length,
    save_complex,
    spectral_edges,
    total_bar_length,
    write_barcode_csv,
)

from helpers import (
    perturbed_actions_complex,
    random_complex,
    random_two_layer_complex,
)
from oracles import oracle_barcode


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_duplicate_id_rejected():
    with pytest.raises(DuplicateId):
        build_complex([("a", 0.0), ("a", 1.0)], {})


def test_filtration_violation_rejected():
    with pytest.raises(FiltrationViolation):
        build_complex([("a", 1.0), ("b", 0.5)], {"b": ["a"]})


def test_equal_action_boundary_rejected():
    with pytest.raises(FiltrationViolation):
        build_complex([("a", 1.0), ("b", 1.0)], {"b": ["a"]})


def test_boundary_square_must_vanish():
    with pytest.raises(BoundarySquareNonzero):
        build_complex(
            [("a", 0.0), ("b", 1.0), ("c", 2.0)],
            {"b": ["a"], "c": ["a", "b"]},
        )


def test_square_zero_triangle_accepted():
    # two parallel paths cancel over F2
    cx = build_complex(
        [("a", 0.0), ("b", 1.0), ("b2", 1.5), ("c", 2.0)],
        {"b": ["a"], "b2": ["a"], "c": ["b", "b2"]},
    )
    assert cx.n_generators == 4


# ---------------------------------------------------------------------------
# barcode basics
# ---------------------------------------------------------------------------

def test_single_pair_bar():
    cx = build_complex([("a", 0.0), ("b", 1.0)], {"b": ["a"]})
    bc = barcode(cx)
    assert bc.finite == ((0.0, 1.0, 1),)
    assert bc.infinite == ()


def test_unpaired_generator_gives_infinite_bar():
    cx = build_complex([("a", 0.0), ("b", 1.0), ("c", 0.3)], {"b": ["a"]})
    bc = barcode(cx)
    assert bc.finite == ((0.0, 1.0, 1),)
    assert bc.infinite == ((0.3, 1),)


def test_empty_complex():
    bc = barcode(build_complex([], {}))
    assert bc.finite == () and bc.infinite == ()


def test_bar_count_identity_random():
    rng = np.random.default_rng(7)
    for _ in range(120):
        cx = random_complex(rng)
        bc = barcode(cx)
        assert cx.n_generators == 2 * bc.n_finite + bc.n_infinite


def test_barcode_matches_rank_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        cx = random_complex(rng)
        bc = barcode(cx)
        fin_oracle, inf_oracle = oracle_barcode(cx)
        fin_pkg = {(b, d): m for b, d, m in bc.finite}
        inf_pkg = {b: m for b, m in bc.infinite}
        assert fin_pkg == dict(fin_oracle)
        assert inf_pkg == dict(inf_oracle)


def test_barcode_deterministic_under_generator_shuffle():
    rng = np.random.default_rng(3)
    cx = random_complex(rng)
    bc = barcode(cx)
    perm = list(cx.generators)
    rng.shuffle(perm)
    cx2 = build_complex(perm, {c: sorted(p) for c, p in cx.boundary.items()})
    assert barcode(cx2).as_multiset() == bc.as_multiset()


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def _two_bar_barcode():
    return Barcode.from_pairs(
        finite=[(0.0, 0.5), (0.0, 0.05)], infinite=[0.0, 0.0]
    )


def test_b_eps_counts():
    bc = _two_bar_barcode()
    assert b_eps(bc, 0.1) == 3
    assert b_eps(bc, 0.5) == 2  # strict comparison drops the 0.5 bar
    assert b_eps_finite(bc, 0.1) == 1


def test_b_eps_rejects_nonpositive():
    with pytest.raises(NonpositiveEpsilon):
        b_eps(_two_bar_barcode(), 0.0)
    with pytest.raises(NonpositiveEpsilon):
        b_eps_finite(_two_bar_barcode(), -1.0)


def test_b_eps_monotone_in_eps():
    rng = np.random.default_rng(5)
    for _ in range(40):
        bc = barcode(random_complex(rng))
        values = [b_eps(bc, e) for e in (0.01, 0.1, 0.5, 1.0, 3.0)]
        assert values == sorted(values, reverse=True)


def test_boundary_depth():
    assert boundary_depth(_two_bar_barcode()) == 0.5
    assert boundary_depth(Barcode.from_pairs(infinite=[1.0, 2.0])) == 0.0


def test_min_finite_length():
    assert min_finite_length(_two_bar_barcode()) == pytest.approx(0.05)
    assert min_finite_length(Barcode.from_pairs(infinite=[0.0])) is None


def test_total_bar_length():
    bc = _two_bar_barcode()
    assert total_bar_length(bc, 1.0) == pytest.approx(0.55)
    assert total_bar_length(bc, 2.0) == pytest.approx(0.2525)
    with pytest.raises(NonpositiveAlpha):
        total_bar_length(bc, 0.0)


def test_total_bar_length_ignores_infinite():
    a = Barcode.from_pairs(finite=[(0.0, 1.0)])
    b = Barcode.from_pairs(finite=[(0.0, 1.0)], infinite=[0.0, 5.0])
    assert total_bar_length(a, 1.5) == total_bar_length(b, 1.5)


def test_huge_multiplicities_stay_exact():
    bc = Barcode(finite=(((0.0, 1.0, 2**100)),), infinite=((0.0, 3),))
    assert b_eps(bc, 0.5) == 2**100 + 3
    assert b_eps(bc, 1.0) == 3
    assert total_bar_length(bc, 1.0) == pytest.approx(float(2**100))


def test_zero_length_bars_rejected():
    with pytest.raises(DegenerateInput):
        Barcode.from_pairs(finite=[(1.0, 1.0)])


# ---------------------------------------------------------------------------
# spectral edges
# ---------------------------------------------------------------------------

def test_spectral_edges_single_generator():
    cx = build_complex([("a", 0.7)], {})
    sp = spectral_edges(cx)
    assert sp.c_plus == 0.7
    assert sp.c_minus == -0.7
    assert sp.gamma_proxy == pytest.approx(0.0)


def test_spectral_edges_zero_differential():
    cx = build_complex([("a", 0.0), ("b", 1.0)], {})
    sp = spectral_edges(cx)
    assert sp.c_plus == 1.0
    assert sp.c_minus == 0.0
    assert sp.gamma_proxy == pytest.approx(1.0)


def test_spectral_edges_acyclic_raises():
    cx = build_complex([("a", 0.0), ("b", 1.0)], {"b": ["a"]})
    with pytest.raises(AcyclicComplex):
        spectral_edges(cx)


def test_gamma_proxy_bounded_by_action_span():
    rng = np.random.default_rng(23)
    checked = 0
    while checked < 50:
        cx = random_complex(rng)
        if cx.n_generators == 0:
            continue
        try:
            sp = spectral_edges(cx)
        except AcyclicComplex:
            continue
        assert sp.gamma_proxy <= cx.action_span() + 1e-12
        checked += 1


def test_dual_of_dual_restores_barcode():
    rng = np.random.default_rng(29)
    cx = random_complex(rng)
    assert barcode(dual_complex(dual_complex(cx))).as_multiset() == (
        barcode(cx).as_multiset()
    )


# ---------------------------------------------------------------------------
# stability under action perturbation
# ---------------------------------------------------------------------------

def test_stability_two_sided():
    rng = np.random.default_rng(41)
    for _ in range(60):
        base = random_two_layer_complex(rng, min_pair_gap=0.25)
        delta = float(rng.uniform(0.01, 0.1))
        other = perturbed_actions_complex(base, rng, delta)
        shift = max(
            abs(g1.action - g2.action)
            for g1, g2 in zip(base.generators, other.generators)
        )
        bc_a = barcode(base)
        bc_b = barcode(other)
        for eps in (0.05, 0.1, 0.2):
            assert b_eps(bc_a, eps + 2 * shift) <= b_eps(bc_b, eps)
            assert b_eps(bc_b, eps + 2 * shift) <= b_eps(bc_a, eps)


# ---------------------------------------------------------------------------
# matching certificate + serialization
# ---------------------------------------------------------------------------

def test_barcodes_match_certificate():
    a = Barcode.from_pairs(finite=[(0.0, 1.0)], infinite=[0.5])
    b = Barcode.from_pairs(finite=[(0.01, 0.99)], infinite=[0.49])
    assert barcodes_match(a, b, tol=0.02)["matched"]
    assert not barcodes_match(a, b, tol=0.001)["matched"]
    c = Barcode.from_pairs(finite=[(0.0, 1.0), (0.0, 1.0)], infinite=[0.5])
    assert barcodes_match(a, c, tol=1.0)["count_mismatch"]


def test_complex_json_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    cx = random_complex(rng)
    path = tmp_path / "complex.json"
    save_complex(cx, path)
    loaded = load_complex(path)
    assert barcode(loaded).as_multiset() == barcode(cx).as_multiset()
    data = json.loads(path.read_text())
    assert data["version"] == 1


def test_complex_json_rejects_bad_version():
    with pytest.raises(DegenerateInput):
        complex_from_json({"version": 99, "generators": [], "boundary": {}})


def test_complex_json_validates_on_load():
    data = complex_to_json(
        build_complex([("a", 0.0), ("b", 1.0)], {"b": ["a"]})
    )
    data["generators"][0]["action"] = 5.0  # now violates the filtration
    with pytest.raises(FiltrationViolation):
        complex_from_json(data)


def test_barcode_csv_layout(tmp_path):
    bc = Barcode.from_pairs(finite=[(0.0, 0.5)], infinite=[0.25])
    path = tmp_path / "bars.csv"
    write_barcode_csv(bc, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "kind,birth[action],death[action],length[action]"
    assert lines[1] == "finite,0,0.5,0.5"
    assert lines[2] == "infinite,0.25,,"


def test_barcode_csv_multiplicity_column(tmp_path):
    bc = Barcode(finite=((0.0, 1.0, 2**80),), infinite=())
    path = tmp_path / "bars.csv"
    write_barcode_csv(bc, path, with_multiplicity=True)
    lines = path.read_text().strip().splitlines()
    assert lines[0].endswith("multiplicity[count]")
    assert lines[1].split(",")[-1] == str(2**80)
