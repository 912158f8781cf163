"""Dyadic coupling of the simple random walk with Brownian motion.

The pair (S, W) is built top-down: the endpoints are quantile-coupled
(centred binomial against normal), then dyadic midpoints are filled
recursively, coupling the conditional walk-bridge law (hypergeometric) to
the Brownian-bridge midpoint through a common uniform.  Both marginals are
exact wherever the discrete quantile is evaluated exactly; the maximal
discrepancy max_k |S_k - W_k| grows like a multiple of ln n with
exponentially decaying tails (the constants are estimated empirically and
reported, never asserted).

Exact discrete quantiles are used per node up to span 2^14 in
:func:`dyadic_couple_1d` (precomputed tables below span 256, a windowed pmf
recurrence above); the block-streaming variant used by the excursion
coupling engine switches to normal quantiles with continuity correction
beyond span 256 for speed.

The 2D lift uses the diagonal rotation: two independent coupled pairs (U, V)
give S = ((U+V)/2, (U-V)/2), an exact planar walk, and W likewise, a planar
Brownian motion with per-coordinate variance 1/2 per unit time, so the pair
shares a clock with the lattice walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.stats import binom as _binom

from .rng import stream

#: spans whose conditional quantiles come from precomputed exact tables
TABLE_MAX_SPAN = 128
#: largest span treated exactly by dyadic_couple_1d (per-node recurrence)
EXACT_MAX_SPAN = 1 << 14


def _build_cdf_tables():
    """Exact hypergeometric midpoint quantile tables for spans 4..128.

    Row (span s, up-count u) holds, over k = 0..s/2, the normal z-scores
    whose Phi-image equals the hypergeometric cdf, so the quantile coupled to
    a normal draw z is the first k with z <= row[k] (no cdf evaluation in
    the hot path).  Flattened with per-span offsets.
    """
    from scipy.special import ndtri
    from scipy.stats import hypergeom

    spans = [1 << j for j in range(2, int(math.log2(TABLE_MAX_SPAN)) + 1)]
    offsets = np.zeros(len(spans) + 1, dtype=np.int64)
    rows = []
    for i, s in enumerate(spans):
        half = s // 2
        ks = np.arange(half + 1)
        for u in range(s + 1):
            cdf = hypergeom.cdf(ks, s, u, half)
            with np.errstate(divide="ignore"):
                z = ndtri(np.clip(cdf, 0.0, 1.0))
            rows.append(np.clip(z, -38.0, 38.0))
        offsets[i + 1] = offsets[i] + (s + 1) * (half + 1)
    return np.concatenate(rows), offsets


_CDF_FLAT, _CDF_OFFSETS = _build_cdf_tables()


@njit(cache=True, nogil=True)
def _table_quantile(zthr_flat, zthr_off, span_idx, half, u, z):
    base = zthr_off[span_idx] + u * (half + 1)
    lo = 0
    hi = half
    while lo < hi:
        mid = (lo + hi) >> 1
        if z <= zthr_flat[base + mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True)
def _window_quantile(U, span, u, half, pmf_buf):
    """Exact hypergeometric quantile via a mode-centred pmf recurrence."""
    lo = u - half
    if lo < 0:
        lo = 0
    hi = half if half < u else u
    if lo == hi:
        return lo
    mode = (u * (half + 1)) // (span + 2)
    if mode < lo:
        mode = lo
    if mode > hi:
        mode = hi
    # truncate to +-12 sd around the mode; the discarded mass is < 1e-30
    sd = math.sqrt(half * (u / span) * (1.0 - u / span) * (half / (span - 1.0))) + 1.0
    wlo = mode - int(12.0 * sd)
    whi = mode + int(12.0 * sd)
    if wlo < lo:
        wlo = lo
    if whi > hi:
        whi = hi
    pmf_buf[mode - wlo] = 1.0
    v = 1.0
    for k in range(mode, whi):
        v *= (u - k) * (half - k) / ((k + 1.0) * (span - u - half + k + 1.0))
        pmf_buf[k + 1 - wlo] = v
    v = 1.0
    for k in range(mode, wlo, -1):
        v *= (k * 1.0) * (span - u - half + k) / ((u - k + 1.0) * (half - k + 1.0))
        pmf_buf[k - 1 - wlo] = v
    tot = 0.0
    for i in range(whi - wlo + 1):
        tot += pmf_buf[i]
    t = U * tot
    c = 0.0
    for i in range(whi - wlo + 1):
        c += pmf_buf[i]
        if c >= t:
            return wlo + i
    return whi


@njit(cache=True, nogil=True)
def _phi(z):
    return 0.5 * math.erfc(-z * 0.7071067811865476)


@njit(cache=True, nogil=True)
def _dyadic_fill_top(S, W, n, zbuf, exact_span, zthr_flat, zthr_off, pmf_buf):
    """Fill midpoints at spans n down to 8 (the bottom two levels are done
    vectorized by the caller).  Consumes zbuf[0 : n/4 - 1] in level order."""
    zi = 0
    span = n
    while span > 4:
        half = span >> 1
        bridge_sd = math.sqrt(half * 0.5)
        sidx = -1
        if span <= TABLE_MAX_SPAN:
            sidx = 0
            t = span >> 2
            while t > 1:
                t >>= 1
                sidx += 1
        for left in range(0, n, span):
            Sl = S[left]
            Sr = S[left + span]
            u = (span + (Sr - Sl)) >> 1
            z = zbuf[zi]
            zi += 1
            W[left + half] = 0.5 * (W[left] + W[left + span]) + bridge_sd * z
            lo = u - half
            if lo < 0:
                lo = 0
            hi = half if half < u else u
            if lo == hi:
                k = lo
            elif span == 8:
                # unrolled exact inversion, support size 5
                base = zthr_off[1] + u * 5
                k = ((z > zthr_flat[base]) + (z > zthr_flat[base + 1])
                     + (z > zthr_flat[base + 2]) + (z > zthr_flat[base + 3])
                     + (z > zthr_flat[base + 4]))
            elif span == 16:
                base = zthr_off[2] + u * 9
                k = 0
                for i in range(9):
                    if z > zthr_flat[base + i]:
                        k += 1
            elif sidx >= 0:
                k = _table_quantile(zthr_flat, zthr_off, sidx, half, u, z)
            elif span <= exact_span:
                k = _window_quantile(_phi(z), span, u, half, pmf_buf)
            else:
                mean = u * 0.5
                sd = math.sqrt(half * (u / span) * (1.0 - u / span) * (half / (span - 1.0)))
                k = int(math.floor(mean + sd * z + 0.5))
                if k < lo:
                    k = lo
                if k > hi:
                    k = hi
            S[left + half] = Sl + 2 * k - half
        span = half
    return zi


_SQRT_HALF = math.sqrt(0.5)


@njit(cache=True, nogil=True)
def _fill_normals(gen, out, n):
    # numba's per-draw path outruns numpy's bulk path for this bit generator
    for i in range(n):
        out[i] = gen.standard_normal()


@njit(cache=True, nogil=True)
def _dyadic_fill(S, W, n, zbuf, exact_span, zthr_flat, zthr_off, pmf_buf):
    """Fill S[1..n-1], W[1..n-1] given both endpoints; n a power of two.

    W carries variance 1 per unit time; zbuf supplies n-1 standard normals
    (consumed top level first, then the span-4 and span-2 levels).  Midpoints
    at span <= exact_span use the exact conditional quantile; above it, a
    normal quantile with continuity correction.
    """
    if n < 2:
        return
    used = 0
    if n > 4:
        used = _dyadic_fill_top(S, W, n, zbuf, exact_span, zthr_flat,
                                zthr_off, pmf_buf)
    if n >= 4:
        # span-4 level: support size 3, exact threshold table
        base0 = zthr_off[0]
        for left in range(0, n, 4):
            z = zbuf[used]
            used += 1
            Sl = S[left]
            u = (4 + (S[left + 4] - Sl)) >> 1
            base = base0 + u * 3
            k = ((1 if z > zthr_flat[base] else 0)
                 + (1 if z > zthr_flat[base + 1] else 0)
                 + (1 if z > zthr_flat[base + 2] else 0))
            S[left + 2] = Sl + 2 * k - 2
            W[left + 2] = 0.5 * (W[left] + W[left + 4]) + z
    # span-2 level: forced midpoint unless the endpoints agree
    for left in range(0, n, 2):
        z = zbuf[used]
        used += 1
        Sl = S[left]
        d = S[left + 2] - Sl
        if d == 0:
            S[left + 1] = Sl + (1 if z > 0.0 else -1)
        else:
            S[left + 1] = Sl + (d >> 1)
        W[left + 1] = 0.5 * (W[left] + W[left + 2]) + _SQRT_HALF * z


def _endpoint_quantile(n: int, z: float) -> int:
    """Walk endpoint S_n quantile-coupled to z; exact binomial below 2^14."""
    U = 0.5 * math.erfc(-z * 0.7071067811865476)
    if n <= EXACT_MAX_SPAN:
        k = int(_binom.ppf(U, n, 0.5))
    else:
        k = int(math.floor(n * 0.5 + math.sqrt(n * 0.25) * z + 0.5))
    k = min(max(k, 0), n)
    return 2 * k - n


@dataclass
class CoupledPair1D:
    """1D walk S and Brownian motion W on integer times 0..n, coupled."""

    n: int
    S: np.ndarray
    W: np.ndarray

    def max_discrepancy(self) -> float:
        return float(np.max(np.abs(self.S - self.W)))


@dataclass
class CoupledPair2D:
    """Planar walk and planar BM (per-coordinate variance 1/2), coupled."""

    n: int
    S: np.ndarray  # (n+1, 2) int64
    W: np.ndarray  # (n+1, 2) float64

    def max_discrepancy(self) -> float:
        return float(np.max(np.hypot(self.S[:, 0] - self.W[:, 0],
                                     self.S[:, 1] - self.W[:, 1])))


def dyadic_couple_1d(n: int, seed: int, replica: int = 0,
                     exact_span: int = EXACT_MAX_SPAN) -> CoupledPair1D:
    """Couple an n-step walk with Brownian motion at integer times.

    n must be a power of two not exceeding 2^26 (memory grows linearly).
    """
    j = int(round(math.log2(n)))
    if (1 << j) != n or j > 26:
        raise ValueError("n must be a power of two, at most 2^26")
    gen = stream(seed, "kmt", replica)
    S = np.zeros(n + 1, dtype=np.int64)
    W = np.zeros(n + 1, dtype=np.float64)
    z = gen.standard_normal()
    W[n] = math.sqrt(n) * z
    S[n] = _endpoint_quantile(n, z)
    if n > 1:
        pmf_buf = np.empty(1 << 15, dtype=np.float64)
        zbuf = np.empty(n - 1)
        _fill_normals(gen, zbuf, n - 1)
        _dyadic_fill(S, W, n, zbuf, exact_span, _CDF_FLAT, _CDF_OFFSETS, pmf_buf)
    return CoupledPair1D(n=n, S=S, W=W)


def lift_to_2d(pair_u: CoupledPair1D, pair_v: CoupledPair1D) -> CoupledPair2D:
    """Diagonal rotation of two 1D couplings into a planar coupling."""
    if pair_u.n != pair_v.n:
        raise ValueError("length mismatch")
    S = np.stack([(pair_u.S + pair_v.S) >> 1, (pair_u.S - pair_v.S) >> 1], axis=1)
    W = 0.5 * np.stack([pair_u.W + pair_v.W, pair_u.W - pair_v.W], axis=1)
    return CoupledPair2D(n=pair_u.n, S=S, W=W)


def controlled_between_integers_check(pair: CoupledPair2D, bound: float, seed: int,
                                      resolution: int = 16) -> bool:
    """Whether sup over unit intervals of |S_n - W_t| stays within the bound.

    The Brownian path between integer times is refined by bridge sampling at
    the given resolution; intervals that cannot reach the bound even with a
    generous bridge excursion are skipped.
    """
    gen = stream(seed, "kmt", 1, pair.n)
    d = np.hypot(pair.S[:, 0] - pair.W[:, 0], pair.S[:, 1] - pair.W[:, 1])
    if bound == math.inf:
        return True
    base = np.maximum(d[:-1], np.hypot(pair.S[:-1, 0] - pair.W[1:, 0],
                                       pair.S[:-1, 1] - pair.W[1:, 1]))
    if np.all(base > bound):
        return False
    step = np.hypot(pair.W[1:, 0] - pair.W[:-1, 0], pair.W[1:, 1] - pair.W[:-1, 1])
    # bridge fluctuation beyond the chord rarely exceeds ~5 sd of sqrt(1/8)
    suspects = np.nonzero(base + step + 2.5 > bound)[0]
    for i in suspects:
        w = _bridge_refine(pair.W[i], pair.W[i + 1], gen, resolution)
        dd = np.hypot(pair.S[i, 0] - w[:, 0], pair.S[i, 1] - w[:, 1])
        if dd.max() > bound:
            return False
    return True


def _bridge_refine(w0, w1, gen, resolution: int) -> np.ndarray:
    """Brownian bridge samples between two integer-time points (var 1/2/coord)."""
    k = int(round(math.log2(resolution)))
    pts = np.empty((resolution + 1, 2))
    pts[0] = w0
    pts[resolution] = w1
    span = resolution
    while span > 1:
        half = span // 2
        frac = half / span
        sd = math.sqrt(0.5 * frac * (span - half) / resolution)
        for left in range(0, resolution, span):
            mid = left + half
            pts[mid] = pts[left] + frac * (pts[left + span] - pts[left])
            pts[mid, 0] += sd * gen.standard_normal()
            pts[mid, 1] += sd * gen.standard_normal()
        span = half
    return pts


# ---------------------------------------------------------------------------
# empirical growth and tail experiments
# ---------------------------------------------------------------------------

def discrepancy_experiment(exponents, replicas: int, seed: int) -> dict:
    """Median max-discrepancy per size, with an affine fit in ln n."""
    medians = []
    for j in exponents:
        n = 1 << j
        vals = [dyadic_couple_1d(n, seed, replica=r * 64 + j).max_discrepancy()
                for r in range(replicas)]
        medians.append(float(np.median(vals)))
    ln_n = np.array([math.log(1 << j) for j in exponents])
    y = np.array(medians)
    A = np.vstack([ln_n, np.ones_like(ln_n)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return {
        "exponents": list(exponents),
        "medians": medians,
        "slope": float(coef[0]),
        "intercept": float(coef[1]),
        "r_squared": r2,
    }


def tail_experiment(n: int, replicas: int, seed: int,
                    c_hat: float | None = None) -> dict:
    """Exponential-tail fit of P[max discrepancy > base + x] over x >= 0.

    The base is c_hat * ln n when c_hat is given, otherwise the empirical
    median (the same quantity measured robustly).
    """
    vals = np.array([dyadic_couple_1d(n, seed, replica=1000 + r).max_discrepancy()
                     for r in range(replicas)])
    base = c_hat * math.log(n) if c_hat is not None else float(np.median(vals))
    xs = np.linspace(0.0, np.quantile(vals - base, 0.98), 12)
    xs = xs[xs >= 0]
    surv = np.array([(vals > base + x).mean() for x in xs])
    keep = surv > 0
    lam = float("nan")
    if keep.sum() >= 3:
        A = np.vstack([xs[keep], np.ones(keep.sum())]).T
        coef, *_ = np.linalg.lstsq(A, np.log(surv[keep]), rcond=None)
        lam = float(-coef[0])
    return {"n": n, "x": xs.tolist(), "survival": surv.tolist(), "lambda_hat": lam}


def coupled_pair_to_csv(pair: CoupledPair2D, path: str) -> None:
    with open(path, "w", newline="") as f:
        f.write("k,S1,S2,W1,W2\n")
        for k in range(pair.n + 1):
            f.write("%d,%d,%d,%.17g,%.17g\n"
                    % (k, pair.S[k, 0], pair.S[k, 1], pair.W[k, 0], pair.W[k, 1]))
