"""Level geometry and acceptance-rejection excursion constructions.

Concentric circles C_m of radius rho0*e^m split the plane into annuli; on
the lattice the matching "shells" are Gamma_0 = {0}, Gamma_1 = {|x| = 1},
Gamma_2 = {1 < |x| <= 2} and Gamma_m = {r_m - 1 < |x| <= r_m} for m >= 3
(the shells do not tile the lattice; sites between shells are interior and a
walk is only stopped when it enters a shell, which unit steps cannot jump
over).

Both conditioned processes are assembled from *unconditioned* excursions by
rejection:

* continuous side: a Brownian excursion from C_m to C_{m-1} u C_{m+1} is
  kept always if it exits outward, and with probability 1 - 2/(m+1) if it
  exits inward;
* lattice side: a walk excursion from Gamma_m stopped on the adjacent shells
  is kept with probability pi(m, endpoint) = a(endpoint)/max a over the two
  shells.

The accepted excursions reproduce the conditioned processes exactly; the
level sequence is the one-dimensional conditioned walk in both cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .potential import RHO0, PotentialTable, Site, default_table, potential_asymptotic
from .rng import stream

MAX_TRIES = 10_000


def level_radius(m) -> float | np.ndarray:
    return RHO0 * np.exp(np.asarray(m, dtype=np.float64))


def shell_norm2_bounds(m: int) -> tuple[int, int]:
    """Integer window (lo, hi] such that x is in Gamma_m iff lo < |x|^2 <= hi."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return (-1, 0)
    if m == 1:
        return (0, 1)
    if m == 2:
        return (1, 4)
    r = float(level_radius(m))
    return (math.floor((r - 1.0) ** 2), math.floor(r * r))


def gamma_membership(site: Site) -> int | None:
    """Shell index of a lattice site, or None for interior (between-shell) sites."""
    x, y = site
    n2 = x * x + y * y
    if n2 == 0:
        return 0
    if n2 == 1:
        return 1
    if n2 <= 4:
        return 2
    # r_m - 1 < |x| <= r_m  =>  m in [ln(|x|/rho0), ln((|x|+1)/rho0))
    r = math.sqrt(n2)
    m = math.ceil(math.log(r / RHO0))
    lo, hi = shell_norm2_bounds(m)
    if lo < n2 <= hi:
        return m
    return None


def shell_sites(m: int) -> np.ndarray:
    """All lattice sites of Gamma_m as an (n, 2) array."""
    lo, hi = shell_norm2_bounds(m)
    if m == 0:
        return np.zeros((1, 2), dtype=np.int64)
    rmax = math.isqrt(hi)
    xs = []
    for x in range(-rmax, rmax + 1):
        rem_hi = hi - x * x
        if rem_hi < 0:
            continue
        ymax = math.isqrt(rem_hi)
        rem_lo = lo - x * x
        ymin = math.isqrt(rem_lo) + 1 if rem_lo >= 0 else 0
        for y in range(ymin, ymax + 1):
            xs.append((x, y))
            if y > 0:
                xs.append((x, -y))
    out = np.asarray(xs, dtype=np.int64)
    return out


class LevelGeometry:
    """Shell/circle geometry plus cached acceptance weights per level."""

    def __init__(self, table: PotentialTable | None = None):
        self.table = table if table is not None else default_table()
        self._amax: dict[int, float] = {}
        self._arg: dict[int, tuple[int, int]] = {}

    def max_potential_on_shells(self, m: int) -> float:
        """max of a over Gamma_{m-1} u Gamma_{m+1} (cached)."""
        if m not in self._amax:
            best = -1.0
            arg = (0, 0)
            for k in (m - 1, m + 1):
                if k == 0:
                    continue  # a vanishes at the origin
                s = shell_sites(k)
                vals = self.table.a_many(s[:, 0], s[:, 1])
                i = int(np.argmax(vals))
                if vals[i] > best:
                    best = float(vals[i])
                    arg = (int(s[i, 0]), int(s[i, 1]))
            self._amax[m] = best
            self._arg[m] = arg
        return self._amax[m]

    def pi_weight(self, m: int, y: Site) -> float:
        """Acceptance weight a(y) / max a over the two adjacent shells."""
        k = gamma_membership(y)
        if k not in (m - 1, m + 1):
            raise ValueError(f"{y} lies on neither adjacent shell of level {m}")
        if k == 0:
            return 0.0
        return self.table.a(y[0], y[1]) / self.max_potential_on_shells(m)


@dataclass
class ExcursionRecord:
    index: int
    level_from: int
    level_to: int
    duration: float  # steps on the lattice side, time on the continuous side
    start: tuple
    end: tuple
    tries: int


# ---------------------------------------------------------------------------
# raw-excursion kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _srw_shell_excursion(gen, x0, y0, hi_in2, lo_out2, max_steps):
    """Walk from (x0, y0) until |x|^2 <= hi_in2 or |x|^2 > lo_out2.

    Returns (side, steps, x, y); side -1 inner, +1 outer, 0 cap hit.
    """
    x = x0
    y = y0
    for n in range(1, max_steps + 1):
        u = gen.random()
        if u < 0.25:
            x += 1
        elif u < 0.5:
            x -= 1
        elif u < 0.75:
            y += 1
        else:
            y -= 1
        n2 = x * x + y * y
        if n2 <= hi_in2:
            return -1, n, x, y
        if n2 > lo_out2:
            return 1, n, x, y
    return 0, max_steps, x, y


@njit(cache=True, nogil=True)
def _srw_shell_excursion_path(gen, x0, y0, hi_in2, lo_out2, out):
    x = x0
    y = y0
    cap = out.shape[0]
    for n in range(cap):
        u = gen.random()
        if u < 0.25:
            x += 1
        elif u < 0.5:
            x -= 1
        elif u < 0.75:
            y += 1
        else:
            y -= 1
        out[n, 0] = x
        out[n, 1] = y
        n2 = x * x + y * y
        if n2 <= hi_in2:
            return -1, n + 1, x, y
        if n2 > lo_out2:
            return 1, n + 1, x, y
    return 0, cap, x, y


@njit(cache=True, nogil=True)
def _bm_annulus_excursion(gen, var, x0, y0, r_in, r_out, delta, max_steps):
    """Plane BM from (x0, y0) until |x| crosses r_in or r_out.

    Distance-proportional Euler steps with radial bridge crossing tests.
    Returns (side, time, x, y, steps).
    """
    x = x0
    y = y0
    t = 0.0
    r = math.sqrt(x * x + y * y)
    for n in range(1, max_steps + 1):
        d_in = r - r_in
        d_out = r_out - r
        loc = d_in if d_in < d_out else d_out
        dt = delta * loc * loc / var
        if dt <= 1e-300:
            dt = 1e-300
        sd = math.sqrt(var * dt)
        nx = x + sd * gen.standard_normal()
        ny = y + sd * gen.standard_normal()
        t += dt
        rn = math.sqrt(nx * nx + ny * ny)
        if rn <= r_in:
            return -1, t, nx, ny, n
        if rn >= r_out:
            return 1, t, nx, ny, n
        p_in = math.exp(-2.0 * (r - r_in) * (rn - r_in) / (var * dt))
        if gen.random() < p_in:
            # place the exit at the inner circle along the current direction
            s = r_in / rn
            return -1, t, nx * s, ny * s, n
        p_out = math.exp(-2.0 * (r_out - r) * (r_out - rn) / (var * dt))
        if gen.random() < p_out:
            s = r_out / rn
            return 1, t, nx * s, ny * s, n
        x = nx
        y = ny
        r = rn
    return 0, t, x, y, max_steps


# ---------------------------------------------------------------------------
# acceptance-rejection builders
# ---------------------------------------------------------------------------

def build_hatW_excursion(point, m: int, spec, seed: int, k: int = 0,
                         step_fraction: float = 0.02,
                         max_tries: int = MAX_TRIES) -> ExcursionRecord:
    """One excursion of the conditioned diffusion from a point on C_m.

    Candidates are raw Brownian excursions; outward exits are always kept,
    inward exits are kept when U <= 1 - 2/(m+1).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    gen = stream(seed, "excursion_w", k)
    r_in = float(level_radius(m - 1))
    r_out = float(level_radius(m + 1))
    x0, y0 = float(point[0]), float(point[1])
    accept_in = 1.0 - 2.0 / (m + 1)
    for ell in range(1, max_tries + 1):
        u = gen.random()
        side, t, x, y, _ = _bm_annulus_excursion(
            gen, spec.per_coordinate_variance, x0, y0, r_in, r_out,
            step_fraction, 1_000_000_000,
        )
        if side == 0:
            raise RuntimeError("excursion step budget exhausted")
        if side == 1 or u <= accept_in:
            return ExcursionRecord(
                index=k, level_from=m, level_to=m + side, duration=t,
                start=(x0, y0), end=(x, y), tries=ell,
            )
    raise RuntimeError(f"no candidate accepted in {max_tries} tries")


def build_hatS_excursion(site: Site, m: int, geometry: LevelGeometry, seed: int,
                         k: int = 0, max_tries: int = MAX_TRIES,
                         want_path: bool = False):
    """One excursion of the conditioned walk from a site of Gamma_m.

    Candidates are plain walk excursions stopped on the adjacent shells,
    kept when U <= pi(m, endpoint); the accepted endpoint law is then the
    conditioned hitting law a(y)/a(x) P[SRW hits at y].
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if gamma_membership(site) != m:
        raise ValueError(f"{site} not in shell {m}")
    gen = stream(seed, "excursion_s", k)
    hi_in2 = shell_norm2_bounds(m - 1)[1]
    lo_out2 = shell_norm2_bounds(m + 1)[0]
    amax = geometry.max_potential_on_shells(m)
    x0, y0 = int(site[0]), int(site[1])
    path_buf = None
    for ell in range(1, max_tries + 1):
        u = gen.random()
        if want_path:
            if path_buf is None:
                path_buf = np.empty((1 << 20, 2), dtype=np.int64)
            side, n, x, y = _srw_shell_excursion_path(gen, x0, y0, hi_in2, lo_out2, path_buf)
        else:
            side, n, x, y = _srw_shell_excursion(gen, x0, y0, hi_in2, lo_out2, 1 << 31)
        if side == 0:
            raise RuntimeError("excursion step budget exhausted")
        a_end = 0.0 if (x == 0 and y == 0) else geometry.table.a(x, y)
        if u <= a_end / amax:
            rec = ExcursionRecord(
                index=k, level_from=m, level_to=m + side, duration=float(n),
                start=(x0, y0), end=(x, y), tries=ell,
            )
            if want_path:
                return rec, path_buf[:n].copy()
            return rec
    raise RuntimeError(f"no candidate accepted in {max_tries} tries")


# ---------------------------------------------------------------------------
# batch endpoint statistics (law checks and level-frequency tests)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _hatS_endpoint_batch(gen, x0, y0, hi_in2, lo_out2, amax, table, R, n_samples,
                         end_x, end_y, tries_out, dur_out):
    """Accepted endpoints of repeated conditioned-walk excursions from (x0, y0)."""
    for i in range(n_samples):
        tries = 0
        while True:
            tries += 1
            u = gen.random()
            side, n, x, y = _srw_shell_excursion(gen, x0, y0, hi_in2, lo_out2, 1 << 31)
            if x == 0 and y == 0:
                a_end = 0.0
            elif -R <= x <= R and -R <= y <= R:
                a_end = table[x + R, y + R]
            else:
                a_end = 0.6366197723675814 * (
                    0.5 * np.log(float(x) * x + float(y) * y) + 1.6169364357414508
                )
            if u <= a_end / amax:
                end_x[i] = x
                end_y[i] = y
                tries_out[i] = tries
                dur_out[i] = n
                break


def hatS_endpoint_sample(site: Site, m: int, geometry: LevelGeometry,
                         n_samples: int, seed: int):
    """Vector of accepted excursion endpoints (and tries, durations) at level m."""
    hi_in2 = shell_norm2_bounds(m - 1)[1]
    lo_out2 = shell_norm2_bounds(m + 1)[0]
    amax = geometry.max_potential_on_shells(m)
    gen = stream(seed, "excursion_s", m)
    end_x = np.empty(n_samples, dtype=np.int64)
    end_y = np.empty(n_samples, dtype=np.int64)
    tries = np.empty(n_samples, dtype=np.int64)
    dur = np.empty(n_samples, dtype=np.int64)
    t = geometry.table
    _hatS_endpoint_batch(gen, site[0], site[1], hi_in2, lo_out2, amax,
                         t.values, t.exact_radius, n_samples, end_x, end_y, tries, dur)
    return end_x, end_y, tries, dur


@njit(cache=True, nogil=True)
def _hatW_excursion_batch(gen, var, x0, y0, r_in, r_out, accept_in, delta,
                          n_samples, sides, tries_out, dur_out):
    for i in range(n_samples):
        tries = 0
        while True:
            tries += 1
            u = gen.random()
            side, t, x, y, _ = _bm_annulus_excursion(
                gen, var, x0, y0, r_in, r_out, delta, 1_000_000_000)
            if side == 1 or u <= accept_in:
                sides[i] = side
                tries_out[i] = tries
                dur_out[i] = t
                break


def hatW_excursion_sample(m: int, spec, n_samples: int, seed: int,
                          step_fraction: float = 0.02):
    """Accepted-exit sides, tries and durations for excursions from C_m."""
    gen = stream(seed, "excursion_w", m)
    r_in = float(level_radius(m - 1))
    r_out = float(level_radius(m + 1))
    r0 = float(level_radius(m))
    sides = np.empty(n_samples, dtype=np.int64)
    tries = np.empty(n_samples, dtype=np.int64)
    dur = np.empty(n_samples, dtype=np.float64)
    _hatW_excursion_batch(gen, spec.per_coordinate_variance, r0, 0.0, r_in, r_out,
                          1.0 - 2.0 / (m + 1), step_fraction, n_samples,
                          sides, tries, dur)
    return sides, tries, dur


@njit(cache=True, nogil=True)
def _hatW_level_chain(gen, var, rho, h, n_excursions, delta, levels):
    """Chained accepted excursions of the conditioned diffusion; level record."""
    m = h
    x = rho * math.exp(h)
    y = 0.0
    for i in range(n_excursions):
        r_in = rho * math.exp(m - 1.0)
        r_out = rho * math.exp(m + 1.0)
        accept_in = 1.0 - 2.0 / (m + 1)
        while True:
            u = gen.random()
            side, t, nx, ny, _ = _bm_annulus_excursion(
                gen, var, x, y, r_in, r_out, delta, 1_000_000_000)
            if side == 1 or u <= accept_in:
                m += side
                x = nx
                y = ny
                break
        levels[i] = m


def hatW_level_chain(h: int, spec, n_excursions: int, seed: int,
                     step_fraction: float = 0.02) -> np.ndarray:
    """Level sequence of the acceptance-rejection construction from level h."""
    gen = stream(seed, "excursion_w", 0, h)
    levels = np.empty(n_excursions, dtype=np.int64)
    _hatW_level_chain(gen, spec.per_coordinate_variance, spec.rho, h,
                      n_excursions, step_fraction, levels)
    return np.concatenate([[h], levels])


def excursion_records_to_csv(records: list[ExcursionRecord], path: str) -> None:
    with open(path, "w", newline="") as f:
        f.write("k,m_from,m_to,duration,tries\n")
        for r in records:
            f.write(f"{r.index},{r.level_from},{r.level_to},{r.duration:.17g},{r.tries}\n")
