import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_atoms, enumerated_lift_law, pmf_formula, random_params
from trapdoor.distributions import Hard, Key, TrapdoorParams, pmf, tv_decomposed
from trapdoor.errors import ContractError, DatasetFormatError, StructuralError
from trapdoor.reductions import (
    HypothesisNet,
    ProductDataset,
    apply_lift,
    extract_parameters,
    format_product_dataset,
    lift_product_samples,
    lift_randomness,
    lift_row,
    parse_product_dataset,
    project_to_class,
    read_product_dataset,
    sample_product,
    write_product_dataset,
)


# --------------------------------------------------------------------------
# lift
# --------------------------------------------------------------------------


def test_lift_with_w_one_is_identity_onto_keys():
    x = sample_product((0.2, 0.6, 0.9), 40, seed=3)
    y = lift_product_samples(x, 1.0, seed=4)
    assert [s.bits for s in y] == [tuple(int(b) for b in r) for r in x.rows]


def test_lift_all_ones_row_with_w_zero():
    x = ProductDataset(3, [[1, 1, 1]] * 30)
    for s in lift_product_samples(x, 0.0, seed=5):
        assert isinstance(s, Hard) and s.j in (1, 2, 3)


def test_lift_row_rule():
    assert lift_row((1, 0, 1), True, 2) == Key((1, 0, 1))
    assert lift_row((1, 0, 1), False, 1) == Hard(1)
    assert lift_row((1, 0, 1), False, 2) == Hard(-2)


def test_lift_law_exact_d3():
    p, w = (0.2, 0.5, 0.9), 0.3
    law = enumerated_lift_law(p, w)
    target = TrapdoorParams(w, 3, p)
    expected = np.array([pmf(target, a) for a in all_atoms(3)])
    assert np.max(np.abs(law - expected)) <= 1e-12


@pytest.mark.parametrize("w", [0.0, 0.1, 0.5, 1.0])
def test_lift_law_exact_sweep(w, rng):
    for d in range(2, 7):
        p = rng.random(d)
        law = enumerated_lift_law(p, w)
        expected = [pmf_formula(w, p, a) for a in all_atoms(d)]
        assert np.max(np.abs(law - expected)) <= 1e-12


def test_lift_randomness_is_per_row():
    short = lift_randomness(10, 5, 0.4, seed=17)
    long = lift_randomness(50, 5, 0.4, seed=17)
    np.testing.assert_array_equal(long.keep[:10], short.keep)
    np.testing.assert_array_equal(long.coord[:10], short.coord)


def test_lift_randomness_frequencies():
    r = lift_randomness(200_000, 4, 0.25, seed=1)
    assert abs(r.keep.mean() - 0.25) < 0.005
    counts = np.bincount(r.coord, minlength=5)[1:] / r.coord.size
    np.testing.assert_allclose(counts, 0.25, atol=0.005)
    assert r.coord.min() == 1 and r.coord.max() == 4


def test_lift_empirical_law_matches_pmf():
    from trapdoor.distributions import empirical_tv

    p = (0.2, 0.5, 0.9)
    y = lift_product_samples(sample_product(p, 10**6, seed=2), 0.3, seed=3)
    assert empirical_tv(y, TrapdoorParams(0.3, 3, p)) <= 0.01


def test_lift_rejects_bad_weight():
    with pytest.raises(ContractError):
        lift_product_samples(ProductDataset(2, [[0, 1]]), 1.5, seed=0)


def test_lift_preserves_length_and_order():
    x = sample_product((0.5,) * 4, 25, seed=8)
    r = lift_randomness(25, 4, 0.5, seed=9)
    y = apply_lift(x, r)
    assert len(y) == 25
    for i in range(25):
        assert y[i] == lift_row(x.rows[i], bool(r.keep[i]), int(r.coord[i]))


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(1, 50),
    d=st.integers(2, 6),
    w=st.floats(0, 1),
    seed=st.integers(0, 2**32 - 1),
    data=st.data(),
)
def test_neighbor_preservation(n, d, w, seed, data):
    rng = np.random.default_rng(seed)
    x = ProductDataset(d, rng.integers(0, 2, size=(n, d)))
    r = lift_randomness(n, d, w, seed)
    y = apply_lift(x, r)
    i = data.draw(st.integers(0, n - 1))
    new_row = data.draw(st.lists(st.integers(0, 1), min_size=d, max_size=d))
    y2 = apply_lift(x.replace_row(i, new_row), r)
    changed = [k for k in range(n) if y[k] != y2[k]]
    assert changed in ([], [i])


# --------------------------------------------------------------------------
# product dataset format
# --------------------------------------------------------------------------


def test_product_dataset_roundtrip(tmp_path):
    x = sample_product((0.1, 0.9, 0.5), 20, seed=1)
    text = format_product_dataset(x)
    assert text.splitlines()[0] == "product-dataset v1 d=3"
    assert parse_product_dataset(text) == x
    write_product_dataset(x, tmp_path / "x.txt")
    assert read_product_dataset(tmp_path / "x.txt") == x


@pytest.mark.parametrize(
    "text, line",
    [
        ("trapdoor-dataset v1 d=2\n", 1),
        ("product-dataset v1 d=2\n0 1\n1\n", 3),
        ("product-dataset v1 d=2\n0 3\n", 2),
    ],
)
def test_product_dataset_parse_errors(text, line):
    with pytest.raises(DatasetFormatError) as info:
        parse_product_dataset(text)
    assert info.value.line == line


def test_product_dataset_validation():
    with pytest.raises(StructuralError):
        ProductDataset(1, [[1]])
    with pytest.raises(StructuralError):
        ProductDataset(2, [[0, 2]])


# --------------------------------------------------------------------------
# extraction and projection
# --------------------------------------------------------------------------


def test_extract_parameters_is_accessor():
    np.testing.assert_array_equal(extract_parameters(TrapdoorParams(0.1, 2, (0.3, 0.7))), [0.3, 0.7])


def test_tv_to_l1_transfer(rng):
    # ||p_hat - p||_1 <= d * alpha / (1 - alpha / 2) <= 2 d alpha whenever the
    # TV at class weight alpha / 2 is at most alpha
    checked = 0
    for _ in range(300):
        d = int(rng.integers(2, 9))
        alpha = float(rng.uniform(0.05, 1.0))
        p = rng.random(d)
        p_hat = np.clip(p + rng.normal(0, 0.1, d), 0, 1)
        a, b = TrapdoorParams.of(alpha / 2, p_hat), TrapdoorParams.of(alpha / 2, p)
        if tv_decomposed(a, b) <= alpha:
            checked += 1
            l1 = np.abs(p_hat - p).sum()
            assert l1 <= d * alpha / (1 - alpha / 2) + 1e-12
            assert l1 <= 2 * d * alpha + 1e-12
    assert checked > 100


def test_net_validation():
    with pytest.raises(ContractError):
        HypothesisNet(())
    with pytest.raises(ContractError):
        HypothesisNet((TrapdoorParams(0.5, 2, (0, 0)), TrapdoorParams(0.4, 2, (0, 0))))


def test_projection_member_maps_to_itself():
    net = HypothesisNet.from_vectors(0.5, [(0, 0), (0.5, 0.5), (1, 1)])
    for e in net.elements:
        assert project_to_class(e, net) == e


def test_projection_picks_closer_corner():
    net = HypothesisNet.from_vectors(0.5, [(0, 0), (1, 1)])
    candidate = TrapdoorParams(0.5, 2, (0.1, 0.1))
    # component split by hand: 0.5 * 0.19 + 0.25 * 0.2 = 0.145 versus 0.5 * 0.99 + 0.25 * 1.8 = 0.945
    assert tv_decomposed(candidate, net.elements[0]) == pytest.approx(0.145, abs=1e-15)
    assert tv_decomposed(candidate, net.elements[1]) == pytest.approx(0.945, abs=1e-15)
    assert project_to_class(candidate, net) == net.elements[0]


def test_projection_ties_go_to_lowest_index():
    net = HypothesisNet.from_vectors(0.5, [(0, 0.5), (1, 0.5)])
    candidate = TrapdoorParams(0.5, 2, (0.5, 0.5))
    assert project_to_class(candidate, net) == net.elements[0]
    swapped = HypothesisNet(net.elements[::-1])
    assert project_to_class(candidate, swapped) == swapped.elements[0]


def test_projection_contract():
    net = HypothesisNet.from_vectors(0.5, [(0, 0)])
    with pytest.raises(ContractError):
        project_to_class(TrapdoorParams(0.4, 2, (0, 0)), net)
    with pytest.raises(ContractError):
        project_to_class(TrapdoorParams(0.5, 3, (0, 0, 0)), net)


def test_projection_factor_two(rng):
    for _ in range(50):
        d = int(rng.integers(2, 7))
        w = float(rng.uniform(0.05, 0.5))
        truth = random_params(rng, d, w)
        net = HypothesisNet((truth,) + tuple(random_params(rng, d, w) for _ in range(10)))
        candidate = TrapdoorParams.of(w, np.clip(truth.p_array + rng.normal(0, 0.2, d), 0, 1))
        alpha = tv_decomposed(candidate, truth)
        projected = project_to_class(candidate, net)
        assert tv_decomposed(projected, truth) <= 2 * alpha + 1e-12
        assert project_to_class(candidate, net) == projected


# --------------------------------------------------------------------------
# norm inequalities used by the l2 -> l1 transfer
# --------------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=100))
def test_norm_inequalities(values):
    x = np.array(values)
    l1, l2, linf = np.abs(x).sum(), math.sqrt(float(x @ x)), np.abs(x).max()
    assert l2**2 <= linf * l1 + 1e-12
    assert l1 <= math.sqrt(x.size) * l2 + 1e-12
