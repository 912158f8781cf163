"""Planar Brownian motion conditioned off a disk, and its radial relatives.

The conditioned diffusion is the Doob transform of planar Brownian motion by
ln(|x|/rho): its radius is a Bessel(2) process with the extra repelling drift
1/(r ln(r/rho)), its angle diffuses like that of plain Brownian motion.  The
sequence of crossings of the concentric circles of radii rho0*e^m is the
one-dimensional conditioned walk on the positive integers ("level chain"),
with transition probabilities (m-1)/2m down and (m+1)/2m up.

Two variance conventions are supported: per-coordinate variance 1 (standard
plane BM) and 1/2 (matching the per-step diffusivity of the lattice walk, the
convention used by the coupled constructions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .potential import RHO0
from .rng import stream

#: clamp radius for discretization overshoot past the forbidden disk
GUARD = 1.0 + 1e-9


def level_radius(m) -> float | np.ndarray:
    """r_m = rho0 * e^m, the radius of level circle m."""
    return RHO0 * np.exp(np.asarray(m, dtype=np.float64))


@dataclass
class DiffusionSpec:
    """Parameters of the conditioned diffusion sampler.

    ``dt`` is the base time step of the fixed-step scheme and must satisfy
    dt <= 1e-3 * rho^2; the excursion/level samplers refine adaptively near
    the forbidden disk and the stopping circles, so their base step is the
    local one and this bound only anchors the fixed-step mode.
    """

    rho: float = RHO0
    dt: float = 1e-3 * RHO0 ** 2
    per_coordinate_variance: float = 0.5

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not (0 < self.dt <= 1e-3 * self.rho ** 2):
            raise ValueError("dt must lie in (0, 1e-3 * rho^2]")
        if self.per_coordinate_variance not in (0.5, 1.0):
            raise ValueError("per-coordinate variance must be 1 (standalone) or 0.5 (coupling)")


# ---------------------------------------------------------------------------
# plain Brownian motion
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _bm_endpoint_r2(gen, var, dt, t_total, nrep):
    """Sum of |W_t|^2 over replicas of the Euler path (no storage)."""
    nsteps = int(round(t_total / dt))
    sd = math.sqrt(var * dt)
    acc = 0.0
    acc2 = 0.0
    for rep in range(nrep):
        x = 0.0
        y = 0.0
        for i in range(nsteps):
            x += sd * gen.standard_normal()
            y += sd * gen.standard_normal()
        r2 = x * x + y * y
        acc += r2
        acc2 += r2 * r2
    return acc, acc2


@njit(cache=True, nogil=True)
def _bm_exit_times(gen, var, dt, radius, nrep, out):
    """First exit times of the centred disk, with bridge-corrected crossing."""
    r2 = radius * radius
    sd = math.sqrt(var * dt)
    for rep in range(nrep):
        x = 0.0
        y = 0.0
        t = 0.0
        while True:
            nx = x + sd * gen.standard_normal()
            ny = y + sd * gen.standard_normal()
            t += dt
            if nx * nx + ny * ny >= r2:
                out[rep] = t
                break
            # radial bridge crossing test between the two interior points
            d0 = radius - math.sqrt(x * x + y * y)
            d1 = radius - math.sqrt(nx * nx + ny * ny)
            p = math.exp(-2.0 * d0 * d1 / (var * dt))
            if gen.random() < p:
                out[rep] = t
                break
            x = nx
            y = ny


def sample_bm_path(start, spec: DiffusionSpec, stop_rule, seed: int,
                   replica: int = 0, max_steps: int = 100_000_000):
    """Euler path of plane Brownian motion; returns (times, points).

    stop_rule: ("time", T) or ("radius", r).  Deterministic given seed.
    """
    gen = stream(seed, "bm", replica)
    kind, arg = stop_rule
    sd = math.sqrt(spec.per_coordinate_variance * spec.dt)
    x, y = float(start[0]), float(start[1])
    ts = [0.0]
    pts = [(x, y)]
    t = 0.0
    n = 0
    if kind == "time":
        nsteps = int(round(arg / spec.dt))
        if nsteps > max_steps:
            raise RuntimeError("stop rule exceeds the step cap")
        z = gen.standard_normal(size=2 * nsteps) * sd
        for i in range(nsteps):
            x += z[2 * i]
            y += z[2 * i + 1]
            t += spec.dt
            ts.append(t)
            pts.append((x, y))
    elif kind == "radius":
        r2 = float(arg) ** 2
        while x * x + y * y < r2:
            x += sd * gen.standard_normal()
            y += sd * gen.standard_normal()
            t += spec.dt
            ts.append(t)
            pts.append((x, y))
            n += 1
            if n > max_steps:
                raise RuntimeError("stop rule not triggered within the step cap")
    else:
        raise ValueError(f"unknown stop rule {kind!r}")
    return np.asarray(ts), np.asarray(pts)


def bm_mean_square(spec: DiffusionSpec, t: float, replicas: int, seed: int) -> dict:
    gen = stream(seed, "bm", 1)
    acc, acc2 = _bm_endpoint_r2(gen, spec.per_coordinate_variance, spec.dt, t, replicas)
    mean = acc / replicas
    var = max(acc2 / replicas - mean * mean, 0.0)
    return {"mean_r2": mean, "stderr": math.sqrt(var / replicas)}


def bm_exit_time_stats(spec: DiffusionSpec, radius: float, replicas: int, seed: int) -> dict:
    gen = stream(seed, "bm", 2)
    out = np.empty(replicas)
    _bm_exit_times(gen, spec.per_coordinate_variance, spec.dt, radius, replicas, out)
    return {
        "mean": float(out.mean()),
        "stderr": float(out.std(ddof=1) / math.sqrt(replicas)),
        # for variance v per coordinate, |W|^2 - 2 v t is a martingale
        "expected": radius ** 2 / (2.0 * spec.per_coordinate_variance),
    }


# ---------------------------------------------------------------------------
# conditioned diffusion
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _hatw_radial_excursion(gen, var, rho, r_lo, r_hi, r0, delta, max_steps):
    """Radius-only excursion of the conditioned diffusion from r0.

    Runs until the radius crosses r_lo or r_hi.  The step is proportional to
    the distance to the nearest barrier, so crossings are resolved jointly by
    the Euler move and the Brownian-bridge crossing test; the step fraction
    delta controls the residual bias.  Returns (side, duration, clamp_count,
    theta_var) where side is -1/+1 and theta_var accumulates the angular
    variance integral var*dt/r^2.
    """
    r = r0
    t = 0.0
    clamps = 0
    thv = 0.0
    for i in range(max_steps):
        gap = r - rho
        d_lo = r - r_lo
        d_hi = r_hi - r
        loc = min(gap, d_hi) if d_lo <= 0.0 else min(gap, min(d_lo, d_hi))
        # step sd = sqrt(delta) * loc; delta ~ 0.25 keeps crossings resolvable
        dt = delta * loc * loc / var
        if dt <= 1e-300:
            dt = 1e-300
        drift = var * (0.5 / r + 1.0 / (r * math.log(r / rho)))
        rn = r + drift * dt + math.sqrt(var * dt) * gen.standard_normal()
        t += dt
        thv += var * dt / (r * r)
        if rn <= rho * GUARD:
            rn = rho * GUARD
            clamps += 1
        if rn <= r_lo:
            return -1, t, clamps, thv
        if rn >= r_hi:
            return 1, t, clamps, thv
        # bridge crossing tests against both barriers (endpoints interior)
        if r_lo > rho:
            p_lo = math.exp(-2.0 * (r - r_lo) * (rn - r_lo) / (var * dt))
            if gen.random() < p_lo:
                return -1, t, clamps, thv
        p_hi = math.exp(-2.0 * (r_hi - r) * (r_hi - rn) / (var * dt))
        if gen.random() < p_hi:
            return 1, t, clamps, thv
        r = rn
    return 0, t, clamps, thv


@njit(cache=True, nogil=True)
def _hatw_path(gen, var, rho, r0, th0, horizon, delta, buf_t, buf_r, buf_th):
    """Adaptive-step path of the conditioned diffusion in polar coordinates."""
    r = r0
    th = th0
    t = 0.0
    n = 0
    clamps = 0
    cap = buf_t.shape[0]
    while t < horizon and n < cap:
        gap = r - rho
        dt = delta * min(gap * gap, r * r) / var
        if t + dt > horizon:
            dt = horizon - t
        if dt <= 1e-300:
            dt = 1e-300
        drift = var * (0.5 / r + 1.0 / (r * math.log(r / rho)))
        r = r + drift * dt + math.sqrt(var * dt) * gen.standard_normal()
        if r <= rho * GUARD:
            r = rho * GUARD
            clamps += 1
        th = th + math.sqrt(var * dt) / r * gen.standard_normal()
        t += dt
        buf_t[n] = t
        buf_r[n] = r
        buf_th[n] = th
        n += 1
    return n, clamps


def sample_hatW_direct(start, spec: DiffusionSpec, horizon: float, seed: int,
                       replica: int = 0, step_fraction: float = 0.02,
                       max_points: int = 10_000_000):
    """Direct sampler of the conditioned diffusion from a point outside the disk.

    Integrates the radial Doob-drift SDE with steps refined near the disk
    (never entering it; overshoots are clamped and counted) and the angular
    SDE alongside.  Returns (times, points, clamp_count) at adaptive times.
    """
    x, y = float(start[0]), float(start[1])
    r0 = math.hypot(x, y)
    if r0 <= spec.rho:
        raise ValueError("start inside the forbidden disk")
    gen = stream(seed, "hatw", replica)
    buf_t = np.empty(max_points)
    buf_r = np.empty(max_points)
    buf_th = np.empty(max_points)
    n, clamps = _hatw_path(
        gen, spec.per_coordinate_variance, spec.rho, r0, math.atan2(y, x),
        horizon, step_fraction, buf_t, buf_r, buf_th,
    )
    if n >= max_points:
        raise RuntimeError("point budget exhausted before the horizon")
    ts = np.concatenate([[0.0], buf_t[:n]])
    rr = np.concatenate([[r0], buf_r[:n]])
    th = np.concatenate([[math.atan2(y, x)], buf_th[:n]])
    pts = np.stack([rr * np.cos(th), rr * np.sin(th)], axis=1)
    return ts, pts, clamps


def hatw_level_exit_stats(spec: DiffusionSpec, m: int, excursions: int, seed: int,
                          step_fraction: float = 0.1) -> dict:
    """Empirical level-exit law of the conditioned diffusion at level m.

    Samples radial excursions from r_m until r_{m-1} or r_{m+1} and reports
    the inward frequency (exact value (m-1)/2m), mean duration, the clamp
    count, and the accumulated angular variance per excursion.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    gen = stream(seed, "hatw", 0, m)
    r_lo = spec.rho * math.exp(m - 1.0)
    r_hi = spec.rho * math.exp(m + 1.0)
    r0 = spec.rho * math.exp(float(m))
    down = 0
    dur = 0.0
    clamps = 0
    for k in range(excursions):
        side, t, c, _ = _hatw_radial_excursion(
            gen, spec.per_coordinate_variance, spec.rho, r_lo, r_hi, r0,
            step_fraction, 100_000_000,
        )
        if side < 0:
            down += 1
        dur += t
        clamps += c
    return {
        "m": m,
        "excursions": excursions,
        "down_freq": down / excursions,
        "down_exact": (m - 1) / (2.0 * m),
        "mean_duration": dur / excursions,
        "clamps": clamps,
    }


@njit(cache=True, nogil=True)
def _hatw_excursion_polar(gen, var, rho, r_lo, r_hi, r0, th0, delta, max_steps):
    """Radius-and-angle excursion; returns (side, duration, exit angle)."""
    r = r0
    th = th0
    t = 0.0
    for i in range(max_steps):
        gap = r - rho
        d_lo = r - r_lo
        d_hi = r_hi - r
        loc = min(gap, d_hi) if d_lo <= 0.0 else min(gap, min(d_lo, d_hi))
        dt = delta * loc * loc / var
        if dt <= 1e-300:
            dt = 1e-300
        drift = var * (0.5 / r + 1.0 / (r * math.log(r / rho)))
        rn = r + drift * dt + math.sqrt(var * dt) * gen.standard_normal()
        th = th + math.sqrt(var * dt) / r * gen.standard_normal()
        t += dt
        if rn <= rho * GUARD:
            rn = rho * GUARD
        if rn <= r_lo:
            return -1, t, th
        if rn >= r_hi:
            return 1, t, th
        if r_lo > rho:
            if gen.random() < math.exp(-2.0 * (r - r_lo) * (rn - r_lo) / (var * dt)):
                return -1, t, th
        if gen.random() < math.exp(-2.0 * (r_hi - r) * (r_hi - rn) / (var * dt)):
            return 1, t, th
        r = rn
    return 0, t, th


def hatw_exit_angles(spec: DiffusionSpec, m: int, excursions: int, seed: int,
                     step_fraction: float = 0.05) -> np.ndarray:
    """Exit angles (mod 2 pi) of level-m excursions started at uniform angles.

    By rotational invariance these are exactly uniform; the sampler's angular
    discretization is what the test verifies.
    """
    gen = stream(seed, "hatw", 1, m)
    r_lo = spec.rho * math.exp(m - 1.0)
    r_hi = spec.rho * math.exp(m + 1.0)
    r0 = spec.rho * math.exp(float(m))
    out = np.empty(excursions)
    for k in range(excursions):
        th0 = 2.0 * math.pi * gen.random()
        _, _, th = _hatw_excursion_polar(gen, spec.per_coordinate_variance,
                                         spec.rho, r_lo, r_hi, r0, th0,
                                         step_fraction, 100_000_000)
        out[k] = th % (2.0 * math.pi)
    return out


# ---------------------------------------------------------------------------
# the level chain (1d conditioned walk)
# ---------------------------------------------------------------------------

def level_chain_step(m: int, u: float) -> int:
    """One step of the level chain: m-1 with probability (m-1)/2m, else m+1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return m - 1 if u < (m - 1) / (2.0 * m) else m + 1


def green_1csrw(h: int, m: int) -> float:
    """Expected number of visits to level m from level h: 2m * min(m/h, 1)."""
    if h < 1 or m < 1:
        raise ValueError("levels must be >= 1")
    return 2.0 * m * min(m / h, 1.0)


def green_1csrw_exact(h: int, m: int, levels: int = 200) -> float:
    """Expected visits before absorption at `levels`+1, by linear algebra."""
    import scipy.sparse as sp

    L = int(levels)
    ms = np.arange(1, L + 1, dtype=np.float64)
    down = (ms - 1) / (2 * ms)
    up = (ms + 1) / (2 * ms)
    rows, cols, vals = [], [], []
    for i in range(L):
        if i > 0 and down[i] > 0:
            rows.append(i)
            cols.append(i - 1)
            vals.append(down[i])
        if i < L - 1:
            rows.append(i)
            cols.append(i + 1)
            vals.append(up[i])
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(L, L)).tocsr()
    # expected visits: row h-1 of (I - Q)^-1, column m-1
    e = np.zeros(L)
    e[h - 1] = 1.0
    z = sp.linalg.spsolve((sp.eye(L) - Q).T.tocsc(), e)
    return float(z[m - 1])


@njit(cache=True, nogil=True)
def _level_chain_visits(gen, h, target, absorb, nrep):
    """Empirical visit counts to `target` from h before reaching `absorb`."""
    total = 0
    total_sq = 0
    for rep in range(nrep):
        m = h
        visits = 0
        if m == target:
            visits += 1
        while m < absorb:
            # u < (m-1)/(2m)  <=>  2m*u < m-1, avoiding the division
            if 2.0 * m * gen.random() < m - 1:
                m -= 1
            else:
                m += 1
            if m == target:
                visits += 1
        total += visits
        total_sq += visits * visits
    return total, total_sq


def level_chain_green_mc(h: int, m: int, replicas: int, seed: int,
                         absorb: int = 1000) -> dict:
    gen = stream(seed, "level", h, m)
    total, total_sq = _level_chain_visits(gen, h, m, absorb, replicas)
    mean = total / replicas
    var = max(total_sq / replicas - mean * mean, 0.0)
    return {"mean_visits": mean, "stderr": math.sqrt(var / replicas),
            "formula": green_1csrw(h, m)}


@njit(cache=True, nogil=True)
def _level_chain_path(gen, h, nsteps, out):
    m = h
    for i in range(nsteps):
        if 2.0 * m * gen.random() < m - 1:
            m -= 1
        else:
            m += 1
        out[i] = m


def level_chain_path(h: int, nsteps: int, seed: int, replica: int = 0) -> np.ndarray:
    gen = stream(seed, "level", replica)
    out = np.empty(nsteps, dtype=np.int64)
    _level_chain_path(gen, h, nsteps, out)
    return np.concatenate([[h], out])


# ---------------------------------------------------------------------------
# Bessel(2) hitting experiment
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _bessel_two_barrier(gen, x0, lo, hi, t_cap, delta, max_steps):
    """Bessel(2) run until lo, hi, or the time cap; returns (outcome, time).

    outcome: -1 hit lo first, +1 hit hi first, 0 time cap reached.
    """
    r = x0
    t = 0.0
    for i in range(max_steps):
        d_lo = r - lo if lo > 0 else r
        d_hi = hi - r
        loc = min(d_lo, d_hi)
        dt = delta * loc * loc
        if dt <= 1e-300:
            dt = 1e-300
        if t + dt > t_cap:
            dt = t_cap - t
            if dt <= 0:
                return 0, t
        rn = r + 0.5 / r * dt + math.sqrt(dt) * gen.standard_normal()
        t += dt
        if rn <= 0.0:
            # the point 0 is polar; an Euler overshoot this coarse only
            # happens when lo <= 0 and the step was huge, treat as inner hit
            return (-1 if lo > 0 else 0), t
        if lo > 0 and rn <= lo:
            return -1, t
        if rn >= hi:
            return 1, t
        if lo > 0:
            p_lo = math.exp(-2.0 * (r - lo) * (rn - lo) / dt)
            if gen.random() < p_lo:
                return -1, t
        p_hi = math.exp(-2.0 * (hi - r) * (hi - rn) / dt)
        if gen.random() < p_hi:
            return 1, t
        if t >= t_cap:
            return 0, t
        r = rn
    return 0, t


def bessel_hitting_probability(x0: float, lo: float, hi: float) -> float:
    """P[Bessel(2) from x0 hits lo before hi]; ln r is its scale function.

    A non-positive inner barrier is never hit (the point 0 is polar), so the
    probability is 0 in that case.
    """
    if lo <= 0.0:
        return 0.0
    return math.log(hi / x0) / math.log(hi / lo)


def bessel_hitting_experiment(m: int, D: float, delta: float, replicas: int,
                              seed: int, step_fraction: float = 0.1) -> dict:
    """Two-barrier statistics of the Bessel(2) radius near an outer level.

    The process starts at r_{m+1} - D m - 1; the barriers are
    lo = r_{m+1} - m^(4+delta) (possibly non-positive, hence unreachable) and
    hi = r_{m+1} + D m; the time cap is m^(8+3*delta).  Reports the inner-hit
    frequency against the scale-function value (expected order m^-(3+delta))
    and the both-slower-than-cap frequency (expected order exp(-c m^delta)).
    """
    if m < 3:
        raise ValueError("m must be >= 3")
    r = level_radius(m + 1)
    x0 = r - D * m - 1.0
    lo = r - m ** (4.0 + delta)
    hi = r + D * m
    if x0 <= 0:
        raise ValueError("degenerate start; increase m or decrease D")
    t_cap = m ** (8.0 + 3.0 * delta)
    gen = stream(seed, "bessel", m)
    inner = 0
    slow = 0
    for rep in range(replicas):
        outcome, t = _bessel_two_barrier(gen, x0, lo, hi, t_cap, step_fraction, 100_000_000)
        if outcome == -1:
            inner += 1
        elif outcome == 0:
            slow += 1
    p_inner = inner / replicas
    return {
        "m": m,
        "D": D,
        "delta": delta,
        "replicas": replicas,
        "inner_barrier": lo,
        "p_inner": p_inner,
        "p_inner_stderr": math.sqrt(max(p_inner * (1 - p_inner), 1e-12) / replicas),
        "p_inner_scale_function": bessel_hitting_probability(x0, lo, hi),
        "p_inner_predicted_order": m ** (-(3.0 + delta)),
        "p_slow": slow / replicas,
        "p_slow_predicted_order": math.exp(-m ** delta),
    }
