import math

import numpy as np
import pytest

from condwalk import potential as P

# closed-form lattice values: a(1,0) = 1, a(1,1) = 4/pi, and harmonicity at
# (1,0) forces a(2,0) = 4 - 8/pi; all three re-derived by the series oracle
A10 = 1.0
A11 = 4.0 / math.pi
A20 = 4.0 - 8.0 / math.pi


def test_origin_exactly_zero(table):
    assert P.potential_a((0, 0), table) == 0.0


def test_golden_values(table):
    assert abs(table.a(1, 0) - A10) < 1e-9
    assert abs(table.a(1, 1) - A11) < 1e-9
    assert abs(table.a(2, 0) - A20) < 1e-9


def test_series_oracle_independent():
    # the series oracle reproduces the closed forms without any linear solve
    assert abs(P.potential_series((1, 0)) - A10) < 1e-9
    assert abs(P.potential_series((1, 1)) - A11) < 1e-9
    assert abs(P.potential_series((2, 0)) - A20) < 1e-9


def test_series_vs_table_cross_check(table):
    for site in [(3, 2), (5, 0), (4, 4), (7, 1)]:
        assert abs(P.potential_series(site) - table.a(*site)) < 1e-8


def test_symmetry(table):
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, y = rng.integers(-150, 151, size=2)
        base = table.a(int(x), int(y))
        for sx in (1, -1):
            for sy in (1, -1):
                assert abs(table.a(int(sx * x), int(sy * y)) - base) < 1e-12
                assert abs(table.a(int(sy * y), int(sx * x)) - base) < 1e-12


def test_harmonicity(table):
    assert table.harmonicity_defect() < 1e-9


def test_asymptotic_residual_scaled(table):
    # |(pi/2) a(x) - ln|x| - c0| * |x|^2 stays bounded in the mid range
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        x = int(rng.integers(-250, 251))
        y = int(rng.integers(-250, 251))
        r2 = x * x + y * y
        if not (50 * 50 <= r2 <= 250 * 250):
            continue
        res = abs(math.pi / 2 * table.a(x, y) - 0.5 * math.log(r2) - P.C0)
        worst = max(worst, res * r2)
    assert worst < 10.0


def test_oracle_radius_validation():
    with pytest.raises(ValueError):
        P.potential_oracle(4)


def test_equilibrium_two_point_closed_form(table):
    for site in [(1, 0), (2, 1), (0, 3)]:
        hm, cap = P.equilibrium_measure([(0, 0), site], table)
        assert np.allclose(hm, 0.5)
        assert abs(cap - table.a(*site) / 2.0) < 1e-8


def test_avoid_set_capacity_two_point(avoid_two):
    # boundary-limit estimator against the a(x)/2 closed form
    assert abs(avoid_two.capacity - 0.5) < 1e-3


def test_avoid_set_qa_golden(avoid_two):
    # equilibrium representation gives q((0,1)) = (a(0,1) + a(-1,1))/2 - 1/2
    assert abs(avoid_two.q(0, 1) - 2.0 / math.pi) < 1e-4
    assert avoid_two.q(0, 0) == 0.0
    assert avoid_two.q(1, 0) == 0.0


def test_avoid_set_nonnegative_and_harmonic(avoid_two):
    v = avoid_two.values
    assert v.min() >= 0.0
    R = avoid_two.radius
    xs = np.arange(-R + 1, R)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    interior = (X * X + Y * Y <= (R - 1) ** 2)
    for (ax, ay) in avoid_two.sites:
        interior &= ~((np.abs(X - ax) + np.abs(Y - ay)) <= 1)
    mean = 0.25 * (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2])
    defect = np.abs(v[1:-1, 1:-1] - mean)
    assert defect[interior].max() < 1e-8


def test_avoid_set_vs_equilibrium_representation(table, avoid_two):
    hm, cap = P.equilibrium_measure(avoid_two.sites, table)
    for site in [(0, 1), (2, 0), (-3, 4), (10, 10)]:
        q_eq = sum(
            w * table.a(site[0] - z[0], site[1] - z[1])
            for w, z in zip(hm, avoid_two.sites)
        ) - cap
        assert abs(avoid_two.q(*site) - q_eq) < 2e-4


def test_avoid_origin_only_reduces_to_potential(table):
    av = P.build_avoid_set([(0, 0)], 260, table)
    assert av.capacity == 0.0
    # q_{0} is the potential kernel itself, pointwise
    assert np.array_equal(av.values, np.maximum(table.values, 0.0))


def test_avoid_set_requires_origin(table):
    with pytest.raises(ValueError):
        P.build_avoid_set([(1, 0)], 64, table)
    with pytest.raises(ValueError):
        P.build_avoid_set([(0, 0), (100, 0)], 64, table)


def test_hitting_distribution_point_mass(table):
    d = P.exact_hitting_distribution((3, 0), [(3, 0), (5, 5)], 20, weights=None)
    assert d == {(3, 0): 1.0}


def test_hitting_distribution_srw_total_mass(table):
    from condwalk.excursions import shell_sites

    targets = [tuple(t) for t in np.concatenate([shell_sites(2), shell_sites(4)])]
    d = P.exact_hitting_distribution((1, 0), targets, 40, weights=None)
    assert abs(sum(d.values()) - 1.0) < 1e-10


def test_hitting_identity_conditioned_vs_srw(table):
    # hat-walk hitting law equals (a(y)/a(x)) * srw hitting law, pointwise
    from condwalk.excursions import shell_sites

    targets = [tuple(t) for t in np.concatenate([shell_sites(2), shell_sites(4)])]
    start = (3, 1)
    d_hat = P.exact_hitting_distribution(start, targets, 40, weights=table)
    d_srw = P.exact_hitting_distribution(start, targets, 40, weights=None)
    ax = table.a(*start)
    assert abs(sum(d_hat.values()) - 1.0) < 1e-10
    for y, p in d_hat.items():
        assert abs(p - table.a(*y) / ax * d_srw[y]) < 1e-10


def test_serialization_roundtrip(avoid_two):
    js = avoid_two.to_json()
    assert js["sites"] == [[0, 0], [1, 0]]
    assert js["radius"] == 260
    rebuilt = P.build_avoid_set([tuple(s) for s in js["sites"]], js["radius"],
                                avoid_two.table)
    assert abs(rebuilt.capacity - js["capacity"]) < 1e-12
