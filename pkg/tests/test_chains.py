import math

import numpy as np
import pytest

from condwalk import chains as C
from condwalk import potential as P


def test_step_distribution_hat_basics(table):
    spec = C.ChainSpec("hat", table=table)
    d = C.step_distribution((1, 0), spec)
    assert d[(0, 0)] == 0.0
    assert abs(d[(2, 0)] - (4 - 8 / math.pi) / 4) < 1e-9
    assert abs(sum(d.values()) - 1.0) < 1e-12


def test_step_distribution_sums_to_one(table):
    spec = C.ChainSpec("hat", table=table)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x, y = (int(v) for v in rng.integers(-200, 201, 2))
        if (x, y) == (0, 0):
            continue
        assert abs(sum(C.step_distribution((x, y), spec).values()) - 1.0) < 1e-12


def test_step_distribution_rejects_forbidden(table, avoid_two):
    with pytest.raises(ValueError):
        C.step_distribution((0, 0), C.ChainSpec("hat", table=table))
    with pytest.raises(ValueError):
        C.step_distribution((1, 0), C.ChainSpec("hat_a", avoid_set=avoid_two))


def test_sample_path_zero_steps(table):
    spec = C.ChainSpec("hat", table=table)
    tr = C.sample_path(spec, (1, 0), ("steps", 0), seed=1)
    assert len(tr) == 1 and tuple(tr.sites[0]) == (1, 0)


def test_sample_path_never_origin(table):
    spec = C.ChainSpec("hat", table=table)
    tr = C.sample_path(spec, (1, 0), ("steps", 20000), seed=2)
    assert int((tr.sites ** 2).sum(axis=1).min()) >= 1


def test_sample_path_deterministic(table):
    spec = C.ChainSpec("hat", table=table)
    a = C.sample_path(spec, (1, 0), ("steps", 5000), seed=9, replica=3)
    b = C.sample_path(spec, (1, 0), ("steps", 5000), seed=9, replica=3)
    c = C.sample_path(spec, (1, 0), ("steps", 5000), seed=9, replica=4)
    assert np.array_equal(a.sites, b.sites)
    assert not np.array_equal(a.sites, c.sites)


def test_sample_path_stop_rules(table):
    spec = C.ChainSpec("hat", table=table)
    tr = C.sample_path(spec, (1, 0), ("radius", 30.0), seed=5)
    r = tr.radii()
    assert r[-1] > 30.0 and (r[:-1] <= 30.0).all()
    tr2 = C.sample_path(spec, (5, 0), ("hits", [(0, 7), (7, 0), (-7, 0), (0, -7)]),
                        seed=6)
    assert tuple(tr2.sites[-1]) in {(0, 7), (7, 0), (-7, 0), (0, -7)}


def test_sample_path_cap_error(table):
    spec = C.ChainSpec("hat", table=table)
    with pytest.raises(RuntimeError):
        C.sample_path(spec, (1, 0), ("radius", 1e8), seed=1, hard_cap=10_000)


def test_exit_time_mc_vs_linear_oracle(table):
    # walk conditioned off the origin, first exit of the disk of radius 64
    spec = C.ChainSpec("hat", table=table)
    expected = C.exit_time_expectation(spec, (1, 0), 64)
    reps = 100_000
    lengths = np.empty(reps)
    from condwalk.rng import stream
    from condwalk.chains import _walk_record
    values, R, cap_shift = spec.kernel_args()
    gen = stream(77, "walk", 0)
    buf = np.empty((200_000, 2), dtype=np.int64)
    for r in range(reps):
        n, done, _, _ = _walk_record(gen, values, R, cap_shift, False, 1, 0,
                                     1, 64.0 ** 2, np.zeros(0, np.int64),
                                     np.zeros(0, np.int64), buf, buf.shape[0])
        lengths[r] = n
    se = lengths.std(ddof=1) / math.sqrt(reps)
    assert abs(lengths.mean() - expected) < 3 * se


def test_escape_probability_origin_only(table):
    av0 = P.build_avoid_set([(0, 0)], 260, table)
    for site in [(1, 0), (5, 3), (-2, 7)]:
        assert C.escape_probability(site, av0) == 1.0


def test_escape_probability_formula(avoid_two):
    p = C.escape_probability((0, 1), avoid_two)
    assert abs(p - 2.0 / math.pi) < 2e-4
    assert 0.0 < p <= 1.0


def test_escape_probability_rejects_sites_in_A(avoid_two):
    with pytest.raises(ValueError):
        C.escape_probability((1, 0), avoid_two)


def test_escape_probability_mc_matches(avoid_two):
    p_exact = C.escape_probability((0, 1), avoid_two)
    mc = C.escape_probability_mc((0, 1), avoid_two, 200.0, 20_000, seed=13)
    assert abs(mc["estimate"] - p_exact) < 3 * mc["stderr"]


def test_hat_a_path_avoids_A(avoid_two):
    spec = C.ChainSpec("hat_a", avoid_set=avoid_two)
    tr = C.sample_path(spec, (0, 1), ("steps", 20000), seed=8)
    sites = {tuple(s) for s in tr.sites}
    assert (0, 0) not in sites and (1, 0) not in sites


@pytest.mark.parametrize("length", [1, 4, 8])
def test_conditioning_identity_lengths(avoid_two, length):
    rep = C.conditioned_equals_hSA_check(avoid_two, (0, 1), length)
    assert rep["max_discrepancy"] < 1e-10
    assert rep["paths"] > 0


def test_conditioning_identity_three_point_set(table):
    av = P.build_avoid_set([(0, 0), (1, 0), (0, 1)], 260, table)
    rep = C.conditioned_equals_hSA_check(av, (2, 2), 6)
    assert rep["max_discrepancy"] < 1e-10
