"""Lattice walks conditioned to avoid the origin or a finite set.

The conditioned walk is the Doob transform of the simple random walk by the
potential kernel: transition weight a(y)/(4 a(x)) to each neighbour y.  With
a finite avoided set A the weight function is q_A instead.  Both chains are
sampled by table-driven kernels; everything is reproducible from a master
seed and replica index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numba import njit

from .potential import (
    C0,
    TWO_OVER_PI,
    AvoidSet,
    PotentialTable,
    Site,
    default_table,
    potential_a,
)
from .rng import stream

Variant = Literal["srw", "hat", "hat_a"]

HARD_STEP_CAP = 1_000_000_000


@dataclass
class ChainSpec:
    """Which walk to run: plain, conditioned off 0, or conditioned off A."""

    variant: Variant = "hat"
    avoid_set: AvoidSet | None = None
    table: PotentialTable | None = None

    def __post_init__(self):
        if self.variant == "hat_a" and self.avoid_set is None:
            raise ValueError("hat_a requires an avoid_set")

    def resolve_table(self) -> PotentialTable:
        if self.table is None:
            self.table = default_table()
        return self.table

    def weight(self, x: int, y: int) -> float:
        if self.variant == "srw":
            return 1.0
        if self.variant == "hat":
            return potential_a((x, y), self.resolve_table())
        return self.avoid_set.q(x, y)

    def forbidden(self) -> set[Site]:
        if self.variant == "srw":
            return set()
        if self.variant == "hat":
            return {(0, 0)}
        return set(self.avoid_set.sites)

    def kernel_args(self):
        """(values, R, cap_shift) for the step kernels."""
        if self.variant == "srw":
            values = np.ones((3, 3), dtype=np.float64)
            return values, 1, 0.0
        if self.variant == "hat":
            t = self.resolve_table()
            return t.values, t.exact_radius, 0.0
        a = self.avoid_set
        return a.values, a.radius, a.capacity


@dataclass
class LatticeTrajectory:
    sites: np.ndarray  # (n+1, 2) int64
    seed: int
    spec: ChainSpec

    def radii(self) -> np.ndarray:
        return np.sqrt((self.sites.astype(np.float64) ** 2).sum(axis=1))

    def __len__(self):
        return self.sites.shape[0]


NEIGHBOURS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def step_distribution(site: Site, spec: ChainSpec) -> dict[Site, float]:
    """Transition probabilities from one site (zero-weight neighbours included)."""
    x, y = site
    if site in spec.forbidden():
        raise ValueError(f"site {site} is in the forbidden set")
    if spec.variant == "srw":
        return {(x + dx, y + dy): 0.25 for dx, dy in NEIGHBOURS}
    out = {}
    for dx, dy in NEIGHBOURS:
        out[(x + dx, y + dy)] = spec.weight(x + dx, y + dy)
    total = sum(out.values())
    # in the exact region the neighbour weights sum to 4 w(x) by
    # harmonicity; outside it the asymptotic closure is normalized here
    return {k: v / total for k, v in out.items()}


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _weight_at(values, R, cap_shift, x, y):
    if -R <= x <= R and -R <= y <= R:
        return values[x + R, y + R]
    r2 = float(x) * x + float(y) * y
    return 0.6366197723675814 * (0.5 * np.log(r2) + 1.6169364357414508) - cap_shift


@njit(cache=True, nogil=True)
def _step(gen, values, R, cap_shift, x, y, Rin2):
    """One conditioned-walk step; returns new (x, y)."""
    if x * x + y * y <= Rin2:
        # all four neighbours are table-exact; their sum is 4*w by harmonicity
        cx = x + R
        cy = y + R
        u = gen.random() * 4.0 * values[cx, cy]
        w = values[cx + 1, cy]
        if u < w:
            return x + 1, y
        u -= w
        w = values[cx - 1, cy]
        if u < w:
            return x - 1, y
        u -= w
        if u < values[cx, cy + 1]:
            return x, y + 1
        return x, y - 1
    w0 = _weight_at(values, R, cap_shift, x + 1, y)
    w1 = _weight_at(values, R, cap_shift, x - 1, y)
    w2 = _weight_at(values, R, cap_shift, x, y + 1)
    w3 = _weight_at(values, R, cap_shift, x, y - 1)
    u = gen.random() * (w0 + w1 + w2 + w3)
    if u < w0:
        return x + 1, y
    if u < w0 + w1:
        return x - 1, y
    if u < w0 + w1 + w2:
        return x, y + 1
    return x, y - 1


@njit(cache=True, nogil=True)
def _srw_step(gen, x, y):
    u = gen.random()
    if u < 0.25:
        return x + 1, y
    if u < 0.5:
        return x - 1, y
    if u < 0.75:
        return x, y + 1
    return x, y - 1


@njit(cache=True, nogil=True)
def _walk_record(gen, values, R, cap_shift, is_srw, x, y, mode, param,
                 stop_x, stop_y, out, max_here):
    """Advance recording positions; returns (#recorded, done, x, y).

    mode 0: fixed number of steps (param), 1: first exit of radius^2 > param,
    2: first hit of the listed stop sites.
    """
    Rin2 = (R - 1) * (R - 1)
    n = 0
    done = False
    while n < max_here:
        if mode == 0 and param <= 0:
            done = True
            break
        if is_srw:
            x, y = _srw_step(gen, x, y)
        else:
            x, y = _step(gen, values, R, cap_shift, x, y, Rin2)
        out[n, 0] = x
        out[n, 1] = y
        n += 1
        if mode == 0:
            param -= 1
            if param <= 0:
                done = True
                break
        elif mode == 1:
            if float(x) * x + float(y) * y > param:
                done = True
                break
        else:
            for j in range(stop_x.shape[0]):
                if x == stop_x[j] and y == stop_y[j]:
                    done = True
                    break
            if done:
                break
    return n, done, x, y


#: two-step destination offsets, fixed order for the row tables
_TWO_STEP_DELTAS = np.array(
    [(2, 0), (-2, 0), (0, 2), (0, -2), (1, 1), (1, -1), (-1, 1), (-1, -1), (0, 0)],
    dtype=np.int64,
)


def _two_step_rows(avoid: AvoidSet) -> np.ndarray:
    """Cumulative two-step transition rows for the origin-avoiding walk.

    Row (x, y) holds the cumulative probabilities of the nine two-step
    destinations followed by the probability of entering A within the two
    steps (first-entry absorption).  Exact marginalization of the one-step
    chain; rows are float32 for cache residency.
    """
    t = avoid.table
    R = t.exact_radius
    W = 2 * R + 1
    a = t.values
    inA = np.zeros((W, W), dtype=bool)
    for (sx, sy) in avoid.sites:
        inA[sx + R, sy + R] = True
    # one-step probabilities from every interior site to its 4 neighbours
    deltas1 = ((1, 0), (-1, 0), (0, 1), (0, -1))

    def shifted(arr, dx, dy, fill=0.0):
        out = np.full((W, W), fill, dtype=np.float64)
        sx = slice(max(0, dx), W + min(0, dx))
        tx = slice(max(0, -dx), W + min(0, -dx))
        sy = slice(max(0, dy), W + min(0, dy))
        ty = slice(max(0, -dy), W + min(0, -dy))
        out[tx, ty] = arr[sx, sy]
        return out

    dest = np.zeros((W, W, 10), dtype=np.float64)
    d_index = {tuple(d): i for i, d in enumerate(map(tuple, _TWO_STEP_DELTAS))}
    a_safe = np.where(a > 0, a, 1.0)
    for dx1, dy1 in deltas1:
        az = shifted(a, dx1, dy1)
        zA = shifted(inA.astype(np.float64), dx1, dy1)
        p1 = az / (4.0 * a_safe)
        # first step enters A: absorbed
        dest[:, :, 9] += p1 * zA
        cont = p1 * (1.0 - zA)
        az_safe = np.where(az > 0, az, 1.0)
        for dx2, dy2 in deltas1:
            ay = shifted(a, dx1 + dx2, dy1 + dy2)
            yA = shifted(inA.astype(np.float64), dx1 + dx2, dy1 + dy2)
            p2 = ay / (4.0 * az_safe)
            k = d_index[(dx1 + dx2, dy1 + dy2)]
            dest[:, :, k] += cont * p2 * (1.0 - yA)
            dest[:, :, 9] += cont * p2 * yA
    rows = np.cumsum(dest, axis=2)
    total = rows[:, :, 9:10]
    rows /= np.where(total > 0, total, 1.0)
    return rows.astype(np.float32)


@njit(cache=True, nogil=True)
def _escape_mc_two_step(gen, rows, deltas, values, R, qvalues, qR, qcap,
                        x0, y0, ax, ay, r2stop, band2, nrep):
    """Escape MC with two-step jumps away from the stopping band."""
    a1x = a1y = a2x = a2y = a3x = a3y = a4x = a4y = np.int64(1 << 60)
    na = ax.shape[0]
    if na > 0:
        a1x, a1y = ax[0], ay[0]
    if na > 1:
        a2x, a2y = ax[1], ay[1]
    if na > 2:
        a3x, a3y = ax[2], ay[2]
    if na > 3:
        a4x, a4y = ax[3], ay[3]
    total = 0.0
    total_sq = 0.0
    hits = 0
    steps = 0
    LANES = 4
    xs = np.empty(LANES, dtype=np.int64)
    ys = np.empty(LANES, dtype=np.int64)
    live = np.zeros(LANES, dtype=np.int64)
    issued = 0
    done = 0
    while done < nrep:
        for l in range(LANES):
            if live[l] == 0:
                if issued < nrep:
                    xs[l] = x0
                    ys[l] = y0
                    live[l] = 1
                    issued += 1
                continue
            x = xs[l]
            y = ys[l]
            if x * x + y * y < band2:
                u = gen.random()
                row = rows[x + R, y + R]
                k = 0
                while u >= row[k]:
                    k += 1
                steps += 2
                if k == 9:
                    hits += 1
                    done += 1
                    live[l] = 0
                    continue
                x += deltas[k, 0]
                y += deltas[k, 1]
                xs[l] = x
                ys[l] = y
                continue
            # near the stopping radius: exact single steps
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
            steps += 1
            if ((x == a1x and y == a1y) or (x == a2x and y == a2y)
                    or (x == a3x and y == a3y) or (x == a4x and y == a4y)):
                hits += 1
                done += 1
                live[l] = 0
                continue
            if x * x + y * y > r2stop:
                qv = _weight_at(qvalues, qR, qcap, x, y)
                av = _weight_at(values, R, 0.0, x, y)
                score = qv / av
                total += score
                total_sq += score * score
                done += 1
                live[l] = 0
                continue
            xs[l] = x
            ys[l] = y
    return total, total_sq, hits, steps


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def sample_path(spec: ChainSpec, start: Site, stop_rule, seed: int,
                replica: int = 0, hard_cap: int = HARD_STEP_CAP) -> LatticeTrajectory:
    """Sample one trajectory.

    ``stop_rule`` is ("steps", n), ("radius", r) or ("hits", [sites...]).
    Deterministic given (seed, replica).
    """
    start = tuple(start)
    if start in spec.forbidden():
        raise ValueError("start is in the forbidden set")
    kind, arg = stop_rule
    values, R, cap_shift = spec.kernel_args()
    gen = stream(seed, "walk", replica)
    stop_x = np.zeros(0, dtype=np.int64)
    stop_y = np.zeros(0, dtype=np.int64)
    if kind == "steps":
        mode, param = 0, float(arg)
        expect = int(arg) + 1
    elif kind == "radius":
        mode, param = 1, float(arg) ** 2
        expect = int(4 * arg * arg) + 64
    elif kind == "hits":
        mode, param = 2, 0.0
        sites = np.asarray(arg, dtype=np.int64).reshape(-1, 2)
        stop_x = sites[:, 0].copy()
        stop_y = sites[:, 1].copy()
        expect = 4096
    else:
        raise ValueError(f"unknown stop rule {kind!r}")

    chunks = [np.asarray([start], dtype=np.int64)]
    x, y = start
    total = 0
    while True:
        buf = np.empty((min(expect, hard_cap - total + 1), 2), dtype=np.int64)
        n, done, x, y = _walk_record(
            gen, values, R, cap_shift, spec.variant == "srw",
            x, y, mode, param, stop_x, stop_y, buf, buf.shape[0],
        )
        if mode == 0:
            param -= n
        chunks.append(buf[:n])
        total += n
        if done:
            break
        if total >= hard_cap:
            raise RuntimeError(f"stop rule not triggered within {hard_cap} steps")
        expect = min(expect * 2, 1 << 24)
    return LatticeTrajectory(sites=np.concatenate(chunks), seed=seed, spec=spec)


def escape_probability(site: Site, avoid: AvoidSet) -> float:
    """P[the origin-avoiding walk never hits A] = q_A / a at the start."""
    x, y = site
    if avoid.contains(x, y):
        raise ValueError("site is in A")
    a = potential_a((x, y), avoid.table)
    return avoid.q(x, y) / a


def escape_probability_mc(site: Site, avoid: AvoidSet, radius: float,
                          replicas: int, seed: int) -> dict:
    """Monte Carlo counterpart of :func:`escape_probability`.

    Runs the origin-avoiding walk to the given radius; replicas that reach it
    without hitting A score the exact escape probability from their exit
    site (exit-reweighting), which makes the estimator unbiased rather than
    biased by O(1/ln radius) as the naive indicator would be.
    """
    x0, y0 = site
    table = avoid.table
    if table.exact_radius < radius + 2:
        raise ValueError("table radius must exceed the stopping radius by 2")
    nontrivial = [s for s in avoid.sites if s != (0, 0)]
    if len(nontrivial) > 4:
        raise ValueError("escape MC supports at most 4 sites beside the origin")
    sites = np.asarray(nontrivial, dtype=np.int64).reshape(-1, 2)
    gen = stream(seed, "walk", 0)
    rows = getattr(avoid, "_two_step_rows", None)
    if rows is None:
        rows = _two_step_rows(avoid)
        avoid._two_step_rows = rows
    band2 = (float(radius) - 2.5) ** 2
    total, total_sq, hits, steps = _escape_mc_two_step(
        gen, rows, _TWO_STEP_DELTAS, table.values, table.exact_radius,
        avoid.values, avoid.radius, avoid.capacity,
        x0, y0, sites[:, 0].copy(), sites[:, 1].copy(),
        float(radius) ** 2, band2, replicas,
    )
    p = total / replicas
    var = max(total_sq / replicas - p * p, 1e-12)
    se = math.sqrt(var / replicas)
    return {"estimate": p, "stderr": se, "hits": int(hits), "steps": int(steps)}


def exit_time_expectation(spec: ChainSpec, start: Site, radius: int) -> float:
    """E[first exit time of the disk] by absorbing-chain linear algebra."""
    import scipy.sparse as sp

    from .potential import _disk_index

    start = tuple(start)
    R = int(radius)
    W = 2 * R + 1
    exclude = spec.forbidden()
    Xi, Yi, idx, n = _disk_index(R, exclude)
    if spec.variant == "srw":
        w_at = np.ones(n)

        def w(nx, ny):
            return np.ones(len(nx))
    elif spec.variant == "hat":
        t = spec.resolve_table()
        w_at = t.a_many(Xi, Yi)
        w = t.a_many
    else:
        w_at = spec.avoid_set.q_many(Xi, Yi)
        w = spec.avoid_set.q_many
    rows, cols, vals = [], [], []
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nx = Xi + dx
        ny = Yi + dy
        keep = nx * nx + ny * ny <= R * R
        for (fx, fy) in exclude:
            keep &= ~((nx == fx) & (ny == fy))
        p = w(nx[keep], ny[keep]) / (4.0 * w_at[keep])
        lin = (nx[keep] + R) * W + (ny[keep] + R)
        rows.append(np.nonzero(keep)[0])
        cols.append(idx[lin])
        vals.append(p)
    Q = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    t = sp.linalg.spsolve((sp.eye(n) - Q).tocsc(), np.ones(n))
    return float(t[idx[(start[0] + R) * W + (start[1] + R)]])


def conditioned_equals_hSA_check(avoid: AvoidSet, start: Site, length: int) -> dict:
    """Exhaustively verify that conditioning the origin-avoiding walk on never
    hitting A reproduces the A-avoiding walk, path by path.

    For every nearest-neighbour path gamma of the given length that avoids A,
    compares  P[walk follows gamma | never hits A]  computed via the escape
    probabilities with the path probability of the A-avoiding chain.  Both
    sides are exact rational functions of the same tables, so agreement is to
    rounding error.  Returns the max discrepancy and path count.
    """
    if length > 8:
        raise ValueError("path enumeration limited to length 8")
    table = avoid.table
    start = tuple(start)
    if avoid.contains(*start):
        raise ValueError("start inside A")

    a_start = potential_a(start, table)
    q_start = avoid.q(*start)
    worst = 0.0
    count = 0

    def rec(site, a_prob, q_prob, k):
        nonlocal worst, count
        if k == length:
            x, y = site
            a_end = potential_a(site, table)
            q_end = avoid.q(x, y)
            lhs = a_prob * (q_end / a_end) / (q_start / a_start)
            rhs = q_prob
            worst = max(worst, abs(lhs - rhs))
            count += 1
            return
        x, y = site
        ax = potential_a(site, table)
        qx = avoid.q(x, y)
        for dx, dy in NEIGHBOURS:
            nxt = (x + dx, y + dy)
            if avoid.contains(*nxt):
                continue  # both sides vanish on paths touching A
            rec(
                nxt,
                a_prob * potential_a(nxt, table) / (4.0 * ax),
                q_prob * avoid.q(*nxt) / (4.0 * qx),
                k + 1,
            )

    rec(start, 1.0, 1.0, 0)
    return {"max_discrepancy": worst, "paths": count}
