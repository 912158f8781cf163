import math

import numpy as np
import pytest
from scipy import stats

from condwalk import diffusion as D
from condwalk.potential import RHO0


def spec_std():
    return D.DiffusionSpec(rho=1.0, dt=1e-3, per_coordinate_variance=1.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        D.DiffusionSpec(rho=-1.0)
    with pytest.raises(ValueError):
        D.DiffusionSpec(rho=1.0, dt=0.01)  # above 1e-3 * rho^2
    with pytest.raises(ValueError):
        D.DiffusionSpec(rho=1.0, dt=1e-4, per_coordinate_variance=0.3)


def test_level_radii():
    assert abs(D.level_radius(3) - 3.9871) < 1e-3
    assert abs(RHO0 - 0.1985) < 1e-4


def test_bm_zero_steps():
    ts, pts = D.sample_bm_path((2.0, 1.0), spec_std(), ("time", 0.0), seed=1)
    assert len(ts) == 1 and tuple(pts[0]) == (2.0, 1.0)


def test_bm_mean_square_displacement():
    r = D.bm_mean_square(spec_std(), 1.0, 200_000, seed=2)
    assert abs(r["mean_r2"] - 2.0) < 3 * r["stderr"]


def test_bm_exit_time_optional_stopping():
    r = D.bm_exit_time_stats(spec_std(), 5.0, 20_000, seed=3)
    assert abs(r["mean"] - r["expected"]) < 3 * r["stderr"]
    assert r["expected"] == 12.5


def test_hatw_start_inside_rejected():
    spec = D.DiffusionSpec()
    with pytest.raises(ValueError):
        D.sample_hatW_direct((0.1, 0.0), spec, 1.0, seed=1)


def test_hatw_never_enters_disk():
    spec = D.DiffusionSpec()
    ts, pts, clamps = D.sample_hatW_direct((1.0, 0.0), spec, 500.0, seed=4)
    radii = np.hypot(pts[:, 0], pts[:, 1])
    assert radii.min() >= spec.rho
    # overshoot clamps must be a vanishing fraction of steps
    assert clamps <= max(1, len(ts) // 1_000_000)


def test_hatw_transient():
    spec = D.DiffusionSpec()
    grew = 0
    for r in range(50):
        ts, pts, _ = D.sample_hatW_direct((1.0, 0.0), spec, 10_000.0, seed=5,
                                          replica=r)
        if np.hypot(*pts[-1]) > 1.0:
            grew += 1
    assert grew >= 49


def test_hatw_level_exit_probabilities():
    spec = D.DiffusionSpec()
    st = D.hatw_level_exit_stats(spec, 5, 20_000, seed=6, step_fraction=0.02)
    assert abs(st["down_freq"] - 0.4) < 1.5e-2
    st1 = D.hatw_level_exit_stats(spec, 1, 2_000, seed=7, step_fraction=0.05)
    assert st1["down_freq"] == 0.0


def test_hatw_exit_angles_uniform():
    spec = D.DiffusionSpec()
    ang = D.hatw_exit_angles(spec, 4, 10_000, seed=8)
    p = stats.kstest(ang / (2 * math.pi), "uniform").pvalue
    assert p > 0.001


def test_scaling_invariance():
    # doubling rho: same level-exit law, durations scale by (rho'/rho)^2
    base = D.DiffusionSpec()
    big = D.DiffusionSpec(rho=2 * RHO0, dt=1e-3 * (2 * RHO0) ** 2)
    a = D.hatw_level_exit_stats(base, 4, 20_000, seed=9, step_fraction=0.02)
    b = D.hatw_level_exit_stats(big, 4, 20_000, seed=10, step_fraction=0.02)
    assert abs(a["down_freq"] - b["down_freq"]) < 2e-2
    ratio = b["mean_duration"] / a["mean_duration"]
    assert abs(ratio - 4.0) < 0.25


def test_bm_tail_bound_shape():
    # P[max |W| > kappa sqrt(t)] should decay like exp(-c kappa^2)
    rng = np.random.default_rng(11)
    t, nsteps, reps = 1.0, 256, 4000
    steps = rng.normal(0, math.sqrt(t / nsteps), size=(reps, nsteps, 2))
    paths = np.cumsum(steps, axis=1)
    maxima = np.hypot(paths[:, :, 0], paths[:, :, 1]).max(axis=1)
    kappas = np.linspace(1.0, 2.4, 8)
    surv = np.array([(maxima > k * math.sqrt(t)).mean() for k in kappas])
    keep = surv > 0
    slope, intercept, r, *_ = stats.linregress(kappas[keep] ** 2,
                                               np.log(surv[keep]))
    assert slope < 0
    assert r ** 2 > 0.95


def test_level_chain_step_exact():
    assert D.level_chain_step(1, 0.99) == 2
    assert D.level_chain_step(1, 0.01) == 2
    assert D.level_chain_step(5, 0.39) == 4
    assert D.level_chain_step(5, 0.41) == 6
    with pytest.raises(ValueError):
        D.level_chain_step(0, 0.5)


def test_green_formula_values():
    assert D.green_1csrw(10, 5) == 5.0
    assert D.green_1csrw(7, 7) == 14.0
    assert D.green_1csrw(1, 1) == 2.0
    assert abs(D.green_1csrw_exact(1, 1, 200) - 2.0) < 0.02
    # truncation at L biases the visit count by a factor ~ (1 - 2m/L)
    assert abs(D.green_1csrw_exact(10, 5, 4000) - 5.0) < 0.02


def test_green_empirical():
    g = D.level_chain_green_mc(10, 5, 10_000, seed=12)
    assert abs(g["mean_visits"] - 5.0) < max(3 * g["stderr"], 0.1)


def test_level_chain_path_law():
    # one-step frequencies from level 5 match (m-1)/2m, (m+1)/2m
    from condwalk.rng import stream

    gen = stream(13, "level", 99)
    downs = 0
    n = 40_000
    for _ in range(n):
        if D.level_chain_step(5, gen.random()) == 4:
            downs += 1
    assert abs(downs / n - 0.4) < 3 * math.sqrt(0.24 / n)


def test_bessel_scale_function_oracle():
    # closed form: ln is the Bessel(2) scale function
    assert D.bessel_hitting_probability(10.0, 5.0, 20.0) == pytest.approx(
        math.log(2.0) / math.log(4.0))
    assert D.bessel_hitting_probability(10.0, -3.0, 20.0) == 0.0
    # monotone in the inner barrier
    vals = [D.bessel_hitting_probability(10.0, lo, 20.0) for lo in (2, 4, 6, 8)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_bessel_experiment_matches_oracle():
    b = D.bessel_hitting_experiment(12, 5.0, 0.5, 20_000, seed=14,
                                    step_fraction=0.05)
    se = max(b["p_inner_stderr"], 1e-5)
    assert abs(b["p_inner"] - b["p_inner_scale_function"]) < 3 * se


def test_bessel_experiment_degenerate_barrier():
    b = D.bessel_hitting_experiment(6, 5.0, 0.5, 2_000, seed=15)
    assert b["inner_barrier"] < 0
    assert b["p_inner"] == 0.0
    assert b["p_inner_scale_function"] == 0.0


def test_lil_statistic_scaling_invariant():
    # rescaling the forbidden radius leaves the normalized running max alone
    from condwalk import escape as ES
    from condwalk.potential import RHO0

    base = ES.lil_running_max_diffusion(4e7, 30, seed=16)
    spec2 = D.DiffusionSpec(rho=2 * RHO0, dt=1e-3 * (2 * RHO0) ** 2)
    big = ES.lil_running_max_diffusion(4e7, 30, seed=17, spec=spec2,
                                       start_radius=8 * RHO0)
    gap = abs(base["median_final"] - big["median_final"])
    assert gap <= 0.35 * max(base["median_final"], big["median_final"])
