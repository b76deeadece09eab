import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s1classes.errors import ParameterError, SizeError
from s1classes.geometry import BOUNDARY, Domain, semi_metric
from s1classes.matching import (
    Configuration,
    SignedMultiset,
    boundary_augment,
    check_lipschitz,
    cost_matrix,
    kantorovich_dual,
    kantorovich_dual_lp,
    matching_bruteforce,
    min_cost_matching,
    minimal_connection,
    sigma_exact,
)


def random_config(rng, dom, max_pts=4, spread=0.8):
    k = int(rng.integers(1, max_pts + 1))
    (x0, x1), (y0, y1) = dom.bbox
    pts = []
    while len(pts) < k:
        p = (float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
        if dom.contains(p) and dom.boundary_distance(p) > (1 - spread) * 0.1:
            pts.append(p)
    degs = [int(rng.choice([-2, -1, 1, 2])) for _ in pts]
    return Configuration(tuple(pts), tuple(degs))


def test_configuration_validation():
    with pytest.raises(ParameterError):
        Configuration(((0, 0),), (0,))
    with pytest.raises(ParameterError):
        Configuration(((0, 0), (0, 0)), (1, 1))
    with pytest.raises(ParameterError):
        Configuration(((0, 0),), (1, 2))
    with pytest.raises(ParameterError):
        Configuration(((0, 0),), (1.5,))
    with pytest.raises(ParameterError):
        Configuration.from_json({"points": [[0, 0]], "degrees": "x"})


def test_configuration_json_merge():
    c = Configuration(((0.1, 0.2), (0.3, 0.0)), (1, -2))
    assert Configuration.from_json(json.loads(json.dumps(c.to_json()))) == c
    assert c.total_degree == -1
    m = c.merge(Configuration(((0.1, 0.2),), (-1,)))
    assert m == Configuration(((0.3, 0.0),), (-2,))
    assert c.conjugate().degrees == (-1, 2)


def test_boundary_augment_examples():
    a, b = (0.1, 0.0), (0.4, 0.0)
    ms = boundary_augment(Configuration(((0.0, 0.0),), (1,)))
    assert ms.positives == ((0.0, 0.0),) and ms.negatives == (BOUNDARY,)
    ms = boundary_augment(Configuration((a, b), (1, -1)))
    assert ms.positives == (a,) and ms.negatives == (b,)
    ms = boundary_augment(Configuration((a,), (2,)))
    assert ms.positives == (a, a) and ms.negatives == (BOUNDARY, BOUNDARY)
    assert boundary_augment(Configuration()).m == 0


def test_signed_multiset_invariants():
    with pytest.raises(ParameterError):
        SignedMultiset(((0.0, 0.0),), ())
    with pytest.raises(ParameterError):
        SignedMultiset(((0.0, 0.0),), ((0.0, 0.0),))


def test_matching_examples(disc):
    o = (0.0, 0.0)
    assert min_cost_matching(SignedMultiset((o,), (BOUNDARY,)), disc).cost == pytest.approx(1.0)
    assert min_cost_matching(SignedMultiset((o,), ((0.5, 0.0),)), disc).cost == pytest.approx(0.5)
    assert min_cost_matching(SignedMultiset(((0.9, 0.0),), ((-0.9, 0.0),)), disc).cost == pytest.approx(0.2)
    assert min_cost_matching(SignedMultiset((), ()), disc).cost == 0.0


def test_sigma_exact_examples(disc, square):
    assert sigma_exact(Configuration(((0.0, 0.0),), (1,)), disc) == pytest.approx(2 * math.pi, abs=1e-15)
    assert sigma_exact(Configuration(((0.0, 0.0), (0.5, 0.0)), (1, -1)), disc) == pytest.approx(math.pi, abs=1e-15)
    assert sigma_exact(Configuration(((0.9, 0.0), (-0.9, 0.0)), (1, -1)), disc) == pytest.approx(0.4 * math.pi)
    assert sigma_exact(Configuration(), disc) == 0.0
    assert sigma_exact(Configuration(), square) == 0.0


def test_lexicographic_tie_break(disc):
    # two positives at the same place, two negatives equidistant: every pairing costs the same
    p = (0.0, 0.0)
    ms = SignedMultiset((p, p), ((0.3, 0.0), (-0.3, 0.0)))
    assert min_cost_matching(ms, disc).sigma == (0, 1)
    assert matching_bruteforce(ms, disc).sigma == (0, 1)


def test_bruteforce_limits(disc):
    ms = SignedMultiset(tuple((0.05 * i, 0.0) for i in range(9)), (BOUNDARY,) * 9)
    with pytest.raises(SizeError):
        matching_bruteforce(ms, disc)
    assert matching_bruteforce(SignedMultiset((), ()), disc).cost == 0.0


def test_dual_examples(disc):
    o = (0.0, 0.0)
    pot = kantorovich_dual(SignedMultiset((o,), (BOUNDARY,)), disc)
    assert pot.value == pytest.approx(1.0)
    assert pot.at(o) - pot.at(BOUNDARY) == pytest.approx(1.0)
    pot = kantorovich_dual(SignedMultiset(((0.9, 0.0),), ((-0.9, 0.0),)), disc)
    assert pot.value == pytest.approx(0.2)
    with pytest.raises(ParameterError):
        kantorovich_dual(SignedMultiset((), ()), disc)


def test_dual_json(disc):
    pot = kantorovich_dual(boundary_augment(Configuration(((0.2, 0.1), (0.5, 0.0)), (2, -1))), disc)
    d = pot.to_json()
    assert "boundary" in d["locations"] and len(d["potentials"]) == len(d["locations"])


@pytest.mark.parametrize("seed", range(20))
def test_dual_lp_agrees(seed, disc, square):
    rng = np.random.default_rng(seed)
    dom = disc if seed % 2 else square
    ms = boundary_augment(random_config(rng, dom))
    if ms.m == 0:
        return
    a = kantorovich_dual(ms, dom)
    b = kantorovich_dual_lp(ms, dom)
    assert a.value == pytest.approx(b.value, abs=1e-8)
    assert check_lipschitz(a, dom) <= 1e-12


def test_canceling_pair_bound(disc, rng):
    for _ in range(30):
        c = random_config(rng, disc, 3)
        p, q = (float(rng.uniform(-0.5, 0.5)), 0.61), (-0.2, float(rng.uniform(-0.6, -0.1)))
        if p in c.points or q in c.points:
            continue
        c2 = c.merge(Configuration((p, q), (1, -1)))
        assert abs(minimal_connection(c2, disc) - minimal_connection(c, disc)) <= semi_metric(disc, p, q) + 1e-12


def test_cost_matrix_uses_semi_metric(disc):
    ms = SignedMultiset(((0.0, 0.0), (0.5, 0.5)), (BOUNDARY, (0.1, 0.0)))
    C = cost_matrix(ms, disc)
    for i, j in itertools.product(range(2), range(2)):
        assert C[i, j] == semi_metric(disc, ms.positives[i], ms.negatives[j])


_pts = st.lists(st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6)), min_size=1, max_size=4, unique=True)


@settings(max_examples=60, deadline=None)
@given(_pts, st.lists(st.sampled_from([-2, -1, 1, 2]), min_size=4, max_size=4), st.floats(0.3, 4.0))
def test_matching_homogeneity(pts, degs, lam):
    c = Configuration(tuple(pts), tuple(degs[: len(pts)]))
    c2 = Configuration(tuple((lam * x, lam * y) for x, y in pts), c.degrees)
    L1 = minimal_connection(c, Domain.disc())
    L2 = minimal_connection(c2, Domain.disc(radius=lam))
    assert L2 == pytest.approx(lam * L1, rel=1e-12, abs=1e-12)
