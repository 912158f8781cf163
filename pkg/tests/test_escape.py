import math

import numpy as np
import pytest

from condwalk import chains as CH
from condwalk import escape as ES
from condwalk import potential as P
from condwalk.rng import stream


def test_future_minima_of_constant_radii():
    radii = np.full(32, 7.0)
    M = ES.future_minima_of_radii(radii)
    assert np.array_equal(M, radii)


def test_future_minima_monotone_and_dominated(table):
    spec = CH.ChainSpec("hat", table=table)
    fm = ES.future_minima_stream(spec, (1, 0), 120.0, seed=60)
    assert np.all(np.diff(fm.M) >= 0)
    assert np.all(fm.M <= fm.radius + 1e-12)
    assert fm.radius_stopped


def test_future_minima_certification_formula(table):
    spec = CH.ChainSpec("hat", table=table)
    fm = ES.future_minima_stream(spec, (1, 0), 120.0, seed=61)
    expect = np.log(fm.M / P.RHO0) / math.log(120.0 / P.RHO0)
    assert np.allclose(fm.certification_error, expect)
    assert fm.certified.dtype == bool


def test_future_minima_requires_radius_stop(table):
    spec = CH.ChainSpec("hat", table=table)
    with pytest.raises(RuntimeError):
        ES.future_minima_stream(spec, (1, 0), 1e9, seed=62, max_steps=10_000)


def test_level_chain_reduced_model_minimum_law():
    # min level reached from h=5 before absorption at 40: exact law from the
    # scale function 1/x vs the empirical distribution
    from numba import njit

    @njit(cache=True)
    def min_levels(gen, h, top, reps, counts):
        for _ in range(reps):
            m = h
            lo = h
            while m < top:
                if 2.0 * m * gen.random() < m - 1:
                    m -= 1
                else:
                    m += 1
                if m < lo:
                    lo = m
            counts[lo] += 1

    h, top = 5, 40
    reps = 100_000
    counts = np.zeros(h + 1)
    min_levels(stream(63, "level", 0), h, top, reps, counts)
    emp = counts / reps

    def p_hit_before(j):  # P[reach level j before top, from h]; scale 1/x
        return (1.0 / h - 1.0 / top) / (1.0 / j - 1.0 / top)

    # P[min == j] = P[reach j] - P[reach j-1]
    pmf = np.zeros(h + 1)
    for j in range(1, h + 1):
        pj = p_hit_before(j) if j < h else 1.0
        pj1 = p_hit_before(j - 1) if j - 1 >= 1 else 0.0
        pmf[j] = pj - pj1
    tv = 0.5 * np.abs(emp[1:] - pmf[1:]).sum()
    assert tv < 0.02


def test_integral_test_dichotomy_direction(table):
    spec = CH.ChainSpec("hat", table=table)
    ens = ES.ensemble_minima(spec, 10 ** 6, 24, seed=64)
    div = ES.integral_test_experiment(ES.g_constant(0.45), 0, 0, 0, ensemble=ens)
    conv = ES.integral_test_experiment(ES.g_exp_half(), 0, 0, 0, ensemble=ens)
    assert div["upper_half_fraction"] >= 0.5
    assert (conv["position_upper_half_fraction"]
            < div["position_upper_half_fraction"])
    assert (np.median(conv["events_per_replica"])
            < np.median(div["events_per_replica"]))
    assert "finite-horizon" in div["caveat"]


def test_integral_test_zero_function(table):
    spec = CH.ChainSpec("hat", table=table)
    ens = ES.ensemble_minima(spec, 10 ** 5, 6, seed=65)
    rep = ES.integral_test_experiment(ES.g_zero(), 0, 0, 0, ensemble=ens)
    thr = ES.g_zero().threshold(ens.grid)
    assert np.all(thr == 1.0)
    # events require a future return to the unit circle
    assert np.array_equal(
        np.asarray(rep["events_per_replica"]), (ens.M <= 1.0).sum(axis=1))


def test_lil_requires_long_horizon(table):
    spec = CH.ChainSpec("hat", table=table)
    with pytest.raises(ValueError):
        ES.lil_running_max(10 ** 6, 2, seed=66, spec=spec)


def test_lil_running_max_monotone(table):
    spec = CH.ChainSpec("hat", table=table)
    ens = ES.ensemble_minima(spec, 3 * 10 ** 7, 3, seed=67)
    rep = ES.lil_running_max(3 * 10 ** 7, 3, seed=67, ensemble=ens)
    assert rep["replicas"] == 3
    assert all(f > 0 for f in rep["running_max_final"])
    assert rep["stability_last_ratio"] >= 1.0


def test_hatSA_origin_only_identical(table):
    # with A = {0} the weight table equals the potential table bitwise, so
    # the same seed yields identical trajectories and identical reports
    av0 = P.build_avoid_set([(0, 0)], 260, table)
    spec_hat = CH.ChainSpec("hat", table=table)
    spec_a = CH.ChainSpec("hat_a", avoid_set=av0)
    e1 = ES.ensemble_minima(spec_hat, 10 ** 5, 4, seed=68)
    e2 = ES.ensemble_minima(spec_a, 10 ** 5, 4, seed=68)
    assert np.array_equal(e1.M, e2.M)
    assert np.array_equal(e1.radius, e2.radius)


def test_hatSA_two_point_agrees_within_noise(table, avoid_two):
    rep_a = ES.hatSA_escape_stats(avoid_two, 10 ** 5, 16, seed=69)
    av0 = P.build_avoid_set([(0, 0)], 260, table)
    rep_0 = ES.hatSA_escape_stats(av0, 10 ** 5, 16, seed=69)
    assert abs(rep_a["upper_half_fraction"] - rep_0["upper_half_fraction"]) <= 0.35
    assert rep_a["avoid_set"]["capacity"] > 0


def test_hatSA_never_visits_A(avoid_two):
    spec = CH.ChainSpec("hat_a", avoid_set=avoid_two)
    tr = CH.sample_path(spec, (0, 1), ("steps", 30_000), seed=70)
    visited = {tuple(s) for s in tr.sites}
    assert not (visited & set(avoid_two.sites))


def test_diffusion_lil_runs():
    rep = ES.lil_running_max_diffusion(4e7, 10, seed=71)
    assert rep["replicas"] == 10
    assert all(f > 0 for f in rep["running_max_final"])


def test_certified_minima_stable_under_larger_stop(table):
    # the certification error is bounded below by ln(1/rho0)/ln(R/rho0) on
    # the lattice (the minimum never drops below 1), so the 1e-3 level never
    # flags anything at a runnable radius: that claim is vacuous and the
    # flag must stay all-false.  The formula itself is calibrated at an
    # achievable level: entries with error <= eps change, under a tenfold
    # larger stopping radius, at most at about rate eps.
    spec = CH.ChainSpec("hat", table=table)
    eps = 0.30
    checked = 0
    changed = 0
    for r in range(60):
        a = ES.future_minima_stream(spec, (1, 0), 100.0, seed=72, replica=r,
                                    certify_tol=1e-3)
        assert not a.certified.any()
        b = ES.future_minima_stream(spec, (1, 0), 1000.0, seed=72, replica=r)
        k = min(len(a.n), len(b.n))
        sel = a.certification_error[:k] <= eps
        checked += int(sel.sum())
        changed += int((np.abs(a.M[:k][sel] - b.M[:k][sel]) > 1e-9).sum())
    assert checked > 50
    # binomial slack on top of the eps bound
    assert changed <= eps * checked + 4 * np.sqrt(eps * checked)
