"""Rate-of-escape statistics: future minima, threshold tests, running maxima.

The future minima process M_n = inf over m >= n of the distance to the
origin is the escape-rate observable.  Desk-scale experiments cannot decide
tail events; every report therefore carries the finite-horizon caveat and
the acceptance rests on direction and stability rather than limits:

* threshold crossings of exp(ln n * g(ln ln n)) happen persistently when
  the integral of g diverges (e.g. g = 0.45) and dry up when it converges
  (e.g. g(u) = exp(-u/2), threshold exp(sqrt(ln n)));
* the running maximum of M_n / sqrt(n ln ln ln n) stabilizes to the same
  scale for the lattice walk and the matched-clock conditioned diffusion.

Memory per replica is O(log horizon): the walk streams through a dyadic
grid recording per-segment minima; suffix minima are folded backwards at
the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .chains import ChainSpec
from .diffusion import DiffusionSpec
from .potential import RHO0
from .rng import stream

FINITE_HORIZON_CAVEAT = (
    "finite-horizon experiment: infinitely-often and limsup statements are "
    "approximated by events in the upper half of the log-horizon; direction "
    "and stability, not limits, are measured"
)


def dyadic_grid(horizon: int, per_octave: int = 2, start: int = 16) -> np.ndarray:
    """Geometric grid from `start` to `horizon` with 2^(1/per_octave) steps."""
    ratio = 2.0 ** (1.0 / per_octave)
    vals = []
    x = float(start)
    while x < horizon:
        vals.append(int(round(x)))
        x *= ratio
    vals.append(int(horizon))
    return np.unique(np.asarray(vals, dtype=np.int64))


# ---------------------------------------------------------------------------
# lattice-side streaming kernel
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _walk_segments(gen, values, R, cap_shift, x0, y0, grid, horizon, r2stop,
                   seg_min2, grid_r2):
    """Run the table-weighted walk recording per-segment minimum |pos|^2.

    Segment i covers steps [grid[i], grid[i+1]); the final segment is closed
    at the stop step.  Stops at `horizon` steps or when |pos|^2 > r2stop
    (if r2stop > 0).  Returns (last step, 1 if radius-stopped else 0).
    """
    Rin2 = (R - 1) * (R - 1)
    x = x0
    y = y0
    n2 = x * x + y * y
    gi = 0
    cur = n2
    n = 0
    while n < horizon:
        if n2 <= Rin2:
            cx = x + R
            cy = y + R
            u = gen.random() * 4.0 * values[cx, cy]
            w = values[cx + 1, cy]
            if u < w:
                x += 1
            else:
                u -= w
                w = values[cx - 1, cy]
                if u < w:
                    x -= 1
                else:
                    u -= w
                    if u < values[cx, cy + 1]:
                        y += 1
                    else:
                        y -= 1
        else:
            if -R <= x + 1 <= R and abs(y) <= R and (x + 1) * (x + 1) + y * y <= R * R:
                w0 = values[x + 1 + R, y + R]
            else:
                w0 = 0.6366197723675814 * (0.5 * np.log((x + 1.0) ** 2 + float(y) * y) + 1.6169364357414508) - cap_shift
            if -R <= x - 1 <= R and abs(y) <= R and (x - 1) * (x - 1) + y * y <= R * R:
                w1 = values[x - 1 + R, y + R]
            else:
                w1 = 0.6366197723675814 * (0.5 * np.log((x - 1.0) ** 2 + float(y) * y) + 1.6169364357414508) - cap_shift
            if abs(x) <= R and -R <= y + 1 <= R and x * x + (y + 1) * (y + 1) <= R * R:
                w2 = values[x + R, y + 1 + R]
            else:
                w2 = 0.6366197723675814 * (0.5 * np.log(float(x) * x + (y + 1.0) ** 2) + 1.6169364357414508) - cap_shift
            if abs(x) <= R and -R <= y - 1 <= R and x * x + (y - 1) * (y - 1) <= R * R:
                w3 = values[x + R, y - 1 + R]
            else:
                w3 = 0.6366197723675814 * (0.5 * np.log(float(x) * x + (y - 1.0) ** 2) + 1.6169364357414508) - cap_shift
            u = gen.random() * (w0 + w1 + w2 + w3)
            if u < w0:
                x += 1
            elif u < w0 + w1:
                x -= 1
            elif u < w0 + w1 + w2:
                y += 1
            else:
                y -= 1
        n += 1
        n2 = x * x + y * y
        while gi + 1 < grid.shape[0] and n >= grid[gi + 1]:
            seg_min2[gi] = cur
            grid_r2[gi + 1] = n2
            gi += 1
            cur = n2
        if n2 < cur:
            cur = n2
        if r2stop > 0 and n2 > r2stop:
            break
    seg_min2[gi] = cur
    return n, 1 if (r2stop > 0 and n2 > r2stop) else 0


def _suffix_min_radii(seg_min2: np.ndarray) -> np.ndarray:
    m2 = np.minimum.accumulate(seg_min2[::-1])[::-1]
    return np.sqrt(m2.astype(np.float64))


@dataclass
class FutureMinima:
    """Future minima sampled on a geometric step grid."""

    n: np.ndarray            # grid steps
    M: np.ndarray            # future minimum of |position| from each grid step
    radius: np.ndarray       # |position| at each grid step
    certification_error: np.ndarray
    certified: np.ndarray
    stopped_at: int
    radius_stopped: bool


def future_minima_stream(spec: ChainSpec, start, r_stop: float, seed: int,
                         replica: int = 0, per_octave: int = 2,
                         max_steps: int = 1 << 62,
                         certify_tol: float = 1e-3) -> FutureMinima:
    """Stream the conditioned walk to the stopping radius; suffix minima.

    The certification error of a reported minimum at radius r is the chance
    of a later dip below r from the stopping circle, ln(r/rho0)/ln(R/rho0)
    under the conditioned walk's scale function; entries with error below
    `certify_tol` are flagged certified.
    """
    values, R, cap_shift = spec.kernel_args()
    gen = stream(seed, "escape", replica)
    # generous horizon guard; exit times past 64 R^2 have negligible mass
    horizon = min(max_steps, int(64 * r_stop * r_stop) + 1024)
    grid = dyadic_grid(horizon, per_octave=per_octave, start=1)
    seg_min2 = np.full(len(grid), np.iinfo(np.int64).max, dtype=np.int64)
    grid_r2 = np.zeros(len(grid), dtype=np.int64)
    x0, y0 = int(start[0]), int(start[1])
    grid_r2[0] = x0 * x0 + y0 * y0
    last, rstopped = _walk_segments(gen, values, R, cap_shift, x0, y0,
                                    grid, horizon, float(r_stop) ** 2,
                                    seg_min2, grid_r2)
    if not rstopped:
        raise RuntimeError("trajectory did not reach the stopping radius")
    keep = grid <= last
    grid = grid[keep]
    seg_min2 = seg_min2[keep]
    grid_r2 = grid_r2[keep]
    M = _suffix_min_radii(seg_min2)
    err = np.log(np.maximum(M, RHO0 * 1.0001) / RHO0) / math.log(r_stop / RHO0)
    return FutureMinima(
        n=grid, M=M, radius=np.sqrt(grid_r2.astype(np.float64)),
        certification_error=err, certified=err <= certify_tol,
        stopped_at=int(last), radius_stopped=bool(rstopped),
    )


def future_minima_of_radii(radii: np.ndarray) -> np.ndarray:
    """Suffix minima of a radius sequence (generic helper for trajectories)."""
    return np.minimum.accumulate(radii[::-1])[::-1]


# ---------------------------------------------------------------------------
# threshold experiments
# ---------------------------------------------------------------------------

@dataclass
class TestFunction:
    """Non-increasing g with known convergence of its tail integral."""

    name: str
    g: Callable[[float], float]
    integral_finite: bool

    def threshold(self, n: np.ndarray) -> np.ndarray:
        ln_n = np.log(n)
        return np.exp(ln_n * np.vectorize(self.g)(np.log(ln_n)))


def g_constant(delta: float) -> TestFunction:
    return TestFunction(name=f"g={delta:g}", g=lambda u: delta, integral_finite=False)


def g_exp_half() -> TestFunction:
    # threshold becomes exp(sqrt(ln n)); the tail integral converges
    return TestFunction(name="g=exp(-u/2)", g=lambda u: math.exp(-u / 2.0),
                        integral_finite=True)


def g_zero() -> TestFunction:
    return TestFunction(name="g=0", g=lambda u: 0.0, integral_finite=True)


def _stream_minima_fixed_horizon(spec: ChainSpec, start, horizon: int, seed: int,
                                 replica: int, per_octave: int = 2):
    values, R, cap_shift = spec.kernel_args()
    gen = stream(seed, "escape", replica)
    grid = dyadic_grid(horizon, per_octave=per_octave, start=16)
    seg_min2 = np.full(len(grid), np.iinfo(np.int64).max, dtype=np.int64)
    grid_r2 = np.zeros(len(grid), dtype=np.int64)
    x0, y0 = int(start[0]), int(start[1])
    grid_r2[0] = x0 * x0 + y0 * y0
    _walk_segments(gen, values, R, cap_shift, x0, y0, grid, horizon, -1.0,
                   seg_min2, grid_r2)
    return grid, _suffix_min_radii(seg_min2), np.sqrt(grid_r2.astype(np.float64))


@dataclass
class MinimaEnsemble:
    """Shared raw material for threshold experiments: one stream pass."""

    grid: np.ndarray      # evaluation steps
    M: np.ndarray         # (replicas, grid) future minima
    radius: np.ndarray    # (replicas, grid) |position| at the grid steps
    horizon: int
    seed: int


def ensemble_minima(spec: ChainSpec, horizon: int, replicas: int, seed: int,
                    start=(1, 0), per_octave: int = 2,
                    replica_offset: int = 0) -> MinimaEnsemble:
    """Stream `replicas` trajectories once; all experiments evaluate on this."""
    Ms = []
    Rs = []
    grid = None
    for r in range(replicas):
        g, M, rad = _stream_minima_fixed_horizon(spec, start, horizon, seed,
                                                 replica_offset + r, per_octave)
        grid = g
        Ms.append(M)
        Rs.append(rad)
    return MinimaEnsemble(grid=grid, M=np.vstack(Ms), radius=np.vstack(Rs),
                          horizon=horizon, seed=seed)


def integral_test_experiment(tf: TestFunction, horizon: int, replicas: int,
                             seed: int, spec: ChainSpec | None = None,
                             start=(1, 0), per_octave: int = 2,
                             ensemble: MinimaEnsemble | None = None) -> dict:
    """Count crossings of exp(ln n * g(ln ln n)) on the dyadic grid.

    Two event families are tallied: the future minimum M_n below the
    threshold (the oscillation object) and the position itself below the
    threshold (the object of the eventual lower bound; for a convergent
    integral the position crossings dry up at desk scale long before the
    future-minimum ones, which stay frequent because a single distant dip
    is cheap for a log-transient walk).  Events are reported over the whole
    grid and over the upper half of the log-horizon.
    """
    if ensemble is None:
        if spec is None:
            spec = ChainSpec("hat")
        ensemble = ensemble_minima(spec, horizon, replicas, seed, start, per_octave)
    grid = ensemble.grid
    thr = tf.threshold(grid)
    n_half = math.isqrt(ensemble.horizon)
    upper = grid >= n_half
    ev_min = ensemble.M <= thr[None, :]
    ev_pos = ensemble.radius <= thr[None, :]
    return {
        "test_function": tf.name,
        "integral_finite": tf.integral_finite,
        "horizon": ensemble.horizon,
        "replicas": ensemble.M.shape[0],
        "events_per_replica": ev_min.sum(axis=1).tolist(),
        "upper_half_fraction": float((ev_min[:, upper].any(axis=1)).mean()),
        "position_events_per_replica": ev_pos.sum(axis=1).tolist(),
        "position_upper_half_fraction": float((ev_pos[:, upper].any(axis=1)).mean()),
        "caveat": FINITE_HORIZON_CAVEAT,
    }


def lil_running_max(horizon: int, replicas: int, seed: int,
                    spec: ChainSpec | None = None, start=(1, 0),
                    n_min: int = 10_000_000, per_octave: int = 2,
                    ensemble: MinimaEnsemble | None = None) -> dict:
    """Running max of M_n / sqrt(n ln ln ln n) per replica, past n_min.

    Also reports the fraction of replicas whose ratio M_n/(sqrt(n)/ln^0.45 n)
    exceeds one somewhere in the upper half-horizon (lower-bound proxy) and
    the stability quotient between the last two dyadic windows.
    """
    if horizon < 2 * n_min:
        raise ValueError("horizon too small for the triple-log statistic")
    if ensemble is None:
        if spec is None:
            spec = ChainSpec("hat")
        ensemble = ensemble_minima(spec, horizon, replicas, seed, start, per_octave)
    grid = ensemble.grid
    n_half = math.isqrt(ensemble.horizon)
    sel = grid >= n_min
    g = grid[sel].astype(np.float64)
    denom = np.sqrt(g * np.log(np.log(np.log(g))))
    stat = ensemble.M[:, sel] / denom[None, :]
    run = np.maximum.accumulate(stat, axis=1)
    finals = run[:, -1]
    stab = run[:, -1] / run[:, -2] if run.shape[1] >= 2 else np.ones(len(finals))
    up = grid >= n_half
    gu = grid[up].astype(np.float64)
    ratio = ensemble.M[:, up] / (np.sqrt(gu) / np.log(gu) ** 0.45)[None, :]
    return {
        "horizon": ensemble.horizon,
        "replicas": ensemble.M.shape[0],
        "running_max_final": finals.tolist(),
        "median_final": float(np.median(finals)),
        "stability_last_ratio": float(np.median(stab)),
        "lower_bound_fraction": float((ratio > 1.0).any(axis=1).mean()),
        "caveat": FINITE_HORIZON_CAVEAT,
    }


def hatSA_escape_stats(avoid, horizon: int, replicas: int, seed: int,
                       tf: TestFunction | None = None, start=(0, 1),
                       per_octave: int = 2) -> dict:
    """The same escape statistics for the walk conditioned off a finite set.

    With A = {0} the chain's weight table coincides bitwise with the
    potential table, so identical seeds give identical trajectories and
    reports.
    """
    if tf is None:
        tf = g_constant(0.45)
    spec = ChainSpec("hat_a", avoid_set=avoid)
    ens = ensemble_minima(spec, horizon, replicas, seed, start, per_octave)
    report = integral_test_experiment(tf, horizon, replicas, seed, ensemble=ens)
    report["avoid_set"] = avoid.to_json()
    if horizon >= 2 * 10_000_000:
        report["lil"] = lil_running_max(horizon, replicas, seed, ensemble=ens)
    return report


# ---------------------------------------------------------------------------
# continuous side (matched clocks) for the cross-process comparison
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _hatw_lil_segments(gen, var, rho, r0, grid_t, delta, seg_min):
    """Adaptive conditioned-diffusion radius with bridge interval minima."""
    r = r0
    t = 0.0
    gi = 0
    cur = r0
    horizon = grid_t[grid_t.shape[0] - 1]
    while t < horizon:
        gap = r - rho
        dt = delta * min(gap * gap, r * r) / var
        if t + dt > horizon:
            dt = horizon - t
        if dt <= 1e-300:
            dt = 1e-300
        drift = var * (0.5 / r + 1.0 / (r * math.log(r / rho)))
        rn = r + drift * dt + math.sqrt(var * dt) * gen.standard_normal()
        if rn <= rho * 1.000000001:
            rn = rho * 1.000000001
        # sampled minimum of the Brownian bridge over the interval
        uu = gen.random()
        disc = (r - rn) * (r - rn) - 2.0 * var * dt * math.log(uu)
        m_int = 0.5 * (r + rn - math.sqrt(disc))
        if m_int < rho:
            m_int = rho
        t += dt
        while gi + 1 < grid_t.shape[0] and t >= grid_t[gi + 1]:
            seg_min[gi] = cur
            gi += 1
            cur = rn
        if m_int < cur:
            cur = m_int
        r = rn
    if cur < seg_min[gi]:
        seg_min[gi] = cur
    return gi


def lil_running_max_diffusion(horizon: float, replicas: int, seed: int,
                              spec: DiffusionSpec | None = None,
                              start_radius: float | None = None,
                              t_min: float = 10_000_000.0,
                              per_octave: int = 2,
                              step_fraction: float = 0.01) -> dict:
    """Continuous-side running max of M(t)/sqrt(t ln ln ln t), matched clocks."""
    if spec is None:
        spec = DiffusionSpec()
    if start_radius is None:
        start_radius = 4.0 * spec.rho
    grid = dyadic_grid(int(horizon), per_octave=per_octave, start=16).astype(np.float64)
    finals = []
    for r in range(replicas):
        gen = stream(seed, "escape", 1_000_000 + r)
        seg_min = np.full(len(grid), np.inf)
        _hatw_lil_segments(gen, spec.per_coordinate_variance, spec.rho,
                           float(start_radius), grid, step_fraction, seg_min)
        M = np.minimum.accumulate(seg_min[::-1])[::-1]
        sel = grid >= t_min
        g = grid[sel]
        stat = M[sel] / np.sqrt(g * np.log(np.log(np.log(g))))
        finals.append(float(np.maximum.accumulate(stat)[-1]))
    return {
        "horizon": horizon,
        "replicas": replicas,
        "running_max_final": finals,
        "median_final": float(np.median(finals)),
        "caveat": FINITE_HORIZON_CAVEAT,
    }
