"""Coupled construction of the conditioned walk and conditioned diffusion.

Each excursion step couples the two processes through one KMT pair and one
shared uniform: the Brownian candidate is the coupled BM rotated so that the
current diffusion point sits within distance 1 of the current lattice point,
and both candidates are stopped on their adjacent level boundaries.  A try is

* a success when (1) the coupled paths stay within D*m of each other up to
  the excursion horizon, including between integer times, (2) both exit
  times lie in [r_m, r_m^3], (3) the exit times differ by at most m^beta,
  and (4a) both exit the same side with the shared uniform accepting both;
* a failure when (1)-(3) hold and (4b) both exit inward with the uniform
  rejecting both;
* a catastrophe otherwise (the processes decouple).

After a catastrophe both level sequences are continued independently (by
their common one-dimensional conditioned-walk level law) so the transcript
records the divergence; the full-resolution paths stop at the catastrophe.

Pairs are generated in doubling blocks (capped at 2^22 points) so excursions
of tens of millions of steps stream through without materializing the whole
path; block-internal midpoints use exact discrete quantiles up to span 256
and continuity-corrected normal quantiles above.  The discrepancy condition
is checked up to the realized excursion horizon (not the full r_m^3 window,
which is out of reach at this scale) on the integer grid plus bridge
refinements at resolution 1/16 wherever a crossing or a bound violation is
possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .excursions import (
    LevelGeometry,
    gamma_membership,
    level_radius,
    shell_norm2_bounds,
    shell_sites,
)
from .kmt import (_CDF_FLAT, _CDF_OFFSETS, TABLE_MAX_SPAN, _dyadic_fill,
                  _endpoint_quantile, _fill_normals)
from .rng import stream

BLOCK_CAP = 1 << 22
FIRST_BLOCK = 1 << 9
TRY_CAP = 10_000
#: default constants; D tracks 4x the empirically fitted discrepancy slope
DEFAULT_D = 2.5
DEFAULT_BETA = 9.0
DEFAULT_ALPHA = 31.0


@dataclass
class CouplingParams:
    h: int = 6
    D: float = DEFAULT_D
    beta: float = DEFAULT_BETA
    alpha: float = DEFAULT_ALPHA
    epsilon: float = 0.05

    def warnings(self) -> list[str]:
        out = []
        if self.beta <= 8:
            out.append(f"beta={self.beta} <= 8: the per-level decoupling bounds "
                       "need beta > 8 to sum")
        if self.alpha <= 3 * (self.beta + 1):
            out.append(f"alpha={self.alpha} <= 3*(beta+1)={3 * (self.beta + 1):g}: "
                       "the eventual log-power bound needs alpha > 3(beta+1)")
        return out


class AlignmentError(RuntimeError):
    pass


class CouplingInvariantError(RuntimeError):
    pass


def align_rotation(x_point, xi_site) -> float:
    """Angle theta with |xi - R_theta(x)| <= 1: align the arguments.

    For xi on the lattice shell of level m and x on the circle of level m the
    radial gap is below 1, so rotating x onto xi's ray always works.
    """
    xr = math.hypot(x_point[0], x_point[1])
    xir = math.hypot(xi_site[0], xi_site[1])
    if abs(xir - xr) > 1.0:
        raise AlignmentError(f"cannot align {xi_site} with |x|={xr:.6f}")
    return math.atan2(xi_site[1], xi_site[0]) - math.atan2(x_point[1], x_point[0])


# ---------------------------------------------------------------------------
# streaming scan of one candidate pair
# ---------------------------------------------------------------------------

# state_f slots
_SF_STIME, _SF_SIGMA, _SF_DISC2, _SF_WX, _SF_WY = 0, 1, 2, 3, 4
# state_i slots
(_SI_SIDEW, _SI_SIDES, _SI_FOUNDW, _SI_FOUNDS, _SI_A1,
 _SI_NEXTSAMP, _SI_NSAMP, _SI_EXITX, _SI_EXITY) = range(9)


@njit(cache=True, nogil=True)
def _bridge16(bx, by, gen):
    """Fill bx[1..15], by[1..15] with a Brownian bridge between the endpoints.

    Per-coordinate variance 1/2 per unit time over one unit interval.
    """
    span = 16
    while span > 1:
        half = span >> 1
        sd = math.sqrt(span / 128.0)
        for left in range(0, 16, span):
            mid = left + half
            bx[mid] = 0.5 * (bx[left] + bx[left + span]) + sd * gen.standard_normal()
            by[mid] = 0.5 * (by[left] + by[left + span]) + sd * gen.standard_normal()
        span = half


@njit(cache=True, nogil=True)
def _scan_block(SU, SV, WU, WV, n0, B,
                xi_x, xi_y, x0x, x0y, cth, sth,
                hi_in2, lo_out2, r_in, r_out, dbound,
                state_f, state_i, gen, samples, ns_max):
    """Scan one block of the coupled pair for exits, discrepancy and samples.

    Works on squared radii; intervals get a bridge refinement (resolution
    1/16) when a circle crossing is reachable (within 8 of a circle, or a
    macroscopic move) or when the discrepancy bound could be violated
    between integer times.
    """
    found_w = state_i[_SI_FOUNDW] == 1
    found_s = state_i[_SI_FOUNDS] == 1
    disc2 = state_f[_SF_DISC2]
    db2 = dbound * dbound
    near2 = (dbound - 6.0) * (dbound - 6.0) if dbound > 6.0 else 0.0
    band_in2 = (r_in + 8.0) * (r_in + 8.0)
    band_out = r_out - 8.0
    band_out2 = (band_out * band_out) if band_out > 0.0 else 0.0
    r_in2 = r_in * r_in
    r_out2 = r_out * r_out
    bx = np.empty(17)
    by = np.empty(17)
    w2x_prev = 0.5 * (WU[0] + WV[0])
    w2y_prev = 0.5 * (WU[0] - WV[0])
    sx_prev = (SU[0] + SV[0]) >> 1
    sy_prev = (SU[0] - SV[0]) >> 1
    d2_prev = (sx_prev - w2x_prev) ** 2 + (sy_prev - w2y_prev) ** 2
    for j in range(1, B + 1):
        n = n0 + j
        sx = (SU[j] + SV[j]) >> 1
        sy = (SU[j] - SV[j]) >> 1
        w2x = 0.5 * (WU[j] + WV[j])
        w2y = 0.5 * (WU[j] - WV[j])
        dx = sx - w2x
        dy = sy - w2y
        d2 = dx * dx + dy * dy
        if d2 > disc2:
            disc2 = d2
        wm2 = ((WU[j] - WU[j - 1]) ** 2 + (WV[j] - WV[j - 1]) ** 2) * 0.5
        # lattice side exit
        if not found_s:
            px = xi_x + sx
            py = xi_y + sy
            pn2 = px * px + py * py
            if pn2 <= hi_in2 or pn2 > lo_out2:
                found_s = True
                state_i[_SI_SIDES] = -1 if pn2 <= hi_in2 else 1
                state_i[_SI_FOUNDS] = 1
                state_i[_SI_EXITX] = px
                state_i[_SI_EXITY] = py
                state_f[_SF_SIGMA] = n
        refine = False
        rw2 = 0.0
        if not found_w:
            pwx = x0x + cth * w2x - sth * w2y
            pwy = x0y + sth * w2x + cth * w2y
            rw2 = pwx * pwx + pwy * pwy
            if rw2 <= band_in2 or rw2 >= band_out2 or wm2 > 16.0:
                refine = True
        if state_i[_SI_A1] == 1:
            if d2 > db2:
                state_i[_SI_A1] = 0
            elif wm2 > 16.0 or d2 > near2 or d2_prev > near2:
                big = d2 if d2 > d2_prev else d2_prev
                if math.sqrt(big) + math.sqrt(wm2) + 3.0 > dbound:
                    refine = True
        if refine:
            bx[0] = w2x_prev
            by[0] = w2y_prev
            bx[16] = w2x
            by[16] = w2y
            _bridge16(bx, by, gen)
            spx = float(sx_prev)
            spy = float(sy_prev)
            check_a1 = state_i[_SI_A1] == 1
            for q in range(1, 17):
                if check_a1:
                    ddx = spx - bx[q]
                    ddy = spy - by[q]
                    if ddx * ddx + ddy * ddy > db2:
                        state_i[_SI_A1] = 0
                        check_a1 = False
                if not found_w:
                    qx = x0x + cth * bx[q] - sth * by[q]
                    qy = x0y + sth * bx[q] + cth * by[q]
                    rq2 = qx * qx + qy * qy
                    if rq2 <= r_in2 or rq2 >= r_out2:
                        state_i[_SI_SIDEW] = -1 if rq2 <= r_in2 else 1
                        state_i[_SI_FOUNDW] = 1
                        found_w = True
                        state_f[_SF_STIME] = (n - 1) + q / 16.0
                        rq = math.sqrt(rq2)
                        target = r_in if rq2 <= r_in2 else r_out
                        sc = target / rq
                        state_f[_SF_WX] = qx * sc
                        state_f[_SF_WY] = qy * sc
        elif not found_w and (rw2 <= r_in2 or rw2 >= r_out2):
            # reachable only on a band miss; resolve at the integer point
            state_i[_SI_SIDEW] = -1 if rw2 <= r_in2 else 1
            state_i[_SI_FOUNDW] = 1
            found_w = True
            state_f[_SF_STIME] = float(n)
            rq = math.sqrt(rw2)
            target = r_in if rw2 <= r_in2 else r_out
            pwx = x0x + cth * w2x - sth * w2y
            pwy = x0y + sth * w2x + cth * w2y
            sc = target / rq
            state_f[_SF_WX] = pwx * sc
            state_f[_SF_WY] = pwy * sc
        # aligned radius samples at dyadic in-excursion offsets
        if state_i[_SI_NSAMP] < ns_max and n == state_i[_SI_NEXTSAMP]:
            if not (found_w and found_s):
                px = xi_x + sx
                py = xi_y + sy
                pwx = x0x + cth * w2x - sth * w2y
                pwy = x0y + sth * w2x + cth * w2y
                k = state_i[_SI_NSAMP]
                samples[k, 0] = n
                samples[k, 1] = math.sqrt(float(px * px + py * py))
                samples[k, 2] = math.hypot(pwx, pwy)
                state_i[_SI_NSAMP] = k + 1
            state_i[_SI_NEXTSAMP] = state_i[_SI_NEXTSAMP] * 2
        if found_w and found_s:
            state_f[_SF_DISC2] = disc2
            return 1
        w2x_prev = w2x
        w2y_prev = w2y
        sx_prev = sx
        sy_prev = sy
        d2_prev = d2
    state_f[_SF_DISC2] = disc2
    return 0


class _PairStream:
    """Doubling-block generator of one 2D KMT-coupled pair.

    The first block can be sized near the expected stopping scale so that a
    typical excursion needs only a couple of blocks.
    """

    def __init__(self, gen, exact_span: int = 2 * TABLE_MAX_SPAN,
                 first_block: int = FIRST_BLOCK):
        self.gen = gen
        self.exact_span = exact_span
        self.first = max(FIRST_BLOCK, min(int(first_block), BLOCK_CAP))
        # round to a power of two
        self.first = 1 << (self.first - 1).bit_length()
        self.n = 0
        self._last = (0, 0, 0.0, 0.0)
        self._pmf = np.empty(1 << 15, dtype=np.float64)
        self._zbuf = np.empty(self.first)

    def next_block(self):
        B = self.first if self.n == 0 else min(self.n, BLOCK_CAP)
        SU = np.empty(B + 1, dtype=np.int64)
        SV = np.empty(B + 1, dtype=np.int64)
        WU = np.empty(B + 1, dtype=np.float64)
        WV = np.empty(B + 1, dtype=np.float64)
        SU[0], SV[0], WU[0], WV[0] = self._last
        for S, W in ((SU, WU), (SV, WV)):
            z = self.gen.standard_normal()
            W[B] = W[0] + math.sqrt(B) * z
            S[B] = S[0] + _endpoint_quantile(B, z)
            if self._zbuf.shape[0] < B - 1:
                self._zbuf = np.empty(B - 1)
            _fill_normals(self.gen, self._zbuf, B - 1)
            _dyadic_fill(S, W, B, self._zbuf, self.exact_span,
                         _CDF_FLAT, _CDF_OFFSETS, self._pmf)
        self.n += B
        self._last = (int(SU[B]), int(SV[B]), float(WU[B]), float(WV[B]))
        return SU, SV, WU, WV


@dataclass
class TryResult:
    outcome: str
    side_w: int
    side_s: int
    s_time: float
    sigma: float
    disc_sup: float
    a1: bool
    a2: bool
    a3: bool
    exit_site: tuple | None
    exit_point: tuple | None
    pi_end: float
    u: float
    samples: np.ndarray


def classify_try(side_w: int, side_s: int, a1: bool, a2: bool, a3: bool,
                 u: float, pi_end: float, m: int) -> str:
    """The success/failure/catastrophe rules applied to one measured try."""
    keep_in = 1.0 - 2.0 / (m + 1)
    if a1 and a2 and a3 and side_w != 0 and side_s != 0:
        if side_w == 1 and side_s == 1 and u <= pi_end:
            return "success"
        if side_w == -1 and side_s == -1 and u <= min(pi_end, keep_in):
            return "success"
        if side_w == -1 and side_s == -1 and u >= max(pi_end, keep_in):
            return "failure"
    return "catastrophe"


def run_try(gen, m: int, xi, x_pt, params: CouplingParams,
            geometry: LevelGeometry, sample_slots: int = 28) -> TryResult:
    """Generate, measure and classify one coupled candidate excursion pair."""
    theta = align_rotation(x_pt, xi)
    r_m = float(level_radius(m))
    r_in = float(level_radius(m - 1))
    r_out = float(level_radius(m + 1))
    hi_in2 = shell_norm2_bounds(m - 1)[1]
    lo_out2 = shell_norm2_bounds(m + 1)[0]
    dbound = params.D * m
    horizon_a2 = r_m ** 3
    cap = int(min(horizon_a2, 48.0 * r_m * r_m)) + FIRST_BLOCK
    cth = math.cos(-theta)
    sth = math.sin(-theta)

    u = float(gen.random())
    # expected exit scale is a small multiple of r_m^2; start there to avoid
    # generating a long doubling ramp of small blocks
    pair = _PairStream(gen, first_block=int(1.5 * r_m * r_m))
    state_f = np.zeros(5)
    state_i = np.zeros(9, dtype=np.int64)
    state_i[_SI_A1] = 1
    state_i[_SI_NEXTSAMP] = 1
    samples = np.zeros((sample_slots, 3))
    n_done = 0
    while True:
        SU, SV, WU, WV = pair.next_block()
        B = SU.shape[0] - 1
        done = _scan_block(SU, SV, WU, WV, n_done, B,
                           int(xi[0]), int(xi[1]), float(x_pt[0]), float(x_pt[1]),
                           cth, sth, hi_in2, lo_out2, r_in, r_out, dbound,
                           state_f, state_i, gen, samples, sample_slots)
        n_done += B
        if done or n_done >= cap:
            break

    found_w = state_i[_SI_FOUNDW] == 1
    found_s = state_i[_SI_FOUNDS] == 1
    s_time = float(state_f[_SF_STIME])
    sigma = float(state_f[_SF_SIGMA])
    disc = math.sqrt(float(state_f[_SF_DISC2]))
    a1 = bool(state_i[_SI_A1] == 1)
    a2 = bool(found_w and found_s
              and r_m <= s_time <= horizon_a2 and r_m <= sigma <= horizon_a2)
    a3 = bool(found_w and found_s and abs(s_time - sigma) <= float(m) ** params.beta)
    exit_site = None
    pi_end = 0.0
    if found_s:
        exit_site = (int(state_i[_SI_EXITX]), int(state_i[_SI_EXITY]))
        if exit_site != (0, 0):
            pi_end = (geometry.table.a(*exit_site)
                      / geometry.max_potential_on_shells(m))
    exit_point = (float(state_f[_SF_WX]), float(state_f[_SF_WY])) if found_w else None
    outcome = classify_try(int(state_i[_SI_SIDEW]), int(state_i[_SI_SIDES]),
                           a1, a2, a3, u, pi_end, m)
    return TryResult(
        outcome=outcome,
        side_w=int(state_i[_SI_SIDEW]), side_s=int(state_i[_SI_SIDES]),
        s_time=s_time, sigma=sigma, disc_sup=disc, a1=a1, a2=a2, a3=a3,
        exit_site=exit_site, exit_point=exit_point, pi_end=pi_end, u=u,
        samples=samples[: int(state_i[_SI_NSAMP])].copy(),
    )


# ---------------------------------------------------------------------------
# full runs and transcripts
# ---------------------------------------------------------------------------

@dataclass
class CouplingTranscript:
    h: int
    params: CouplingParams
    m: list[int] = field(default_factory=list)       # m_0 = h, then per step
    mu: list[int] = field(default_factory=list)
    t: list[float] = field(default_factory=list)     # t_0 = 0
    tau: list[float] = field(default_factory=list)
    s: list[float] = field(default_factory=list)     # per-step durations
    sigma: list[float] = field(default_factory=list)
    tries: list[int] = field(default_factory=list)   # tries consumed per step
    disc: list[float] = field(default_factory=list)
    catastrophe_step: int | None = None
    catastrophe_level: int | None = None
    stop_reason: str = ""
    level_try_counts: dict = field(default_factory=dict)
    level_catastrophes: dict = field(default_factory=dict)
    ratio_samples: list = field(default_factory=list)  # (t_abs, |S pos|, |W pos|)
    formal_m: list[int] = field(default_factory=list)
    formal_mu: list[int] = field(default_factory=list)

    def steps(self) -> int:
        return len(self.s)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            f.write("k,m_k,mu_k,t_k,tau_k,status,tries\n")
            f.write(f"0,{self.m[0]},{self.mu[0]},0,0,start,0\n")
            for k in range(1, len(self.m)):
                status = "success"
                if self.catastrophe_step is not None and k == len(self.m) - 1 \
                        and self.stop_reason == "catastrophe":
                    status = "catastrophe"
                f.write(f"{k},{self.m[k]},{self.mu[k]},{self.t[k]:.17g},"
                        f"{self.tau[k]:.17g},{status},{self.tries[k - 1]}\n")


def shell_site_near_angle(m: int, angle: float) -> tuple:
    s = shell_sites(m)
    r = float(level_radius(m))
    d2 = (s[:, 0] - r * math.cos(angle)) ** 2 + (s[:, 1] - r * math.sin(angle)) ** 2
    i = int(np.argmin(d2))
    return (int(s[i, 0]), int(s[i, 1]))


def run_coupling(params: CouplingParams, stop_level: int, seed: int,
                 run_index: int = 0, k_max: int = 100_000,
                 geometry: LevelGeometry | None = None,
                 start_xi=None, start_x=None,
                 formal_tail: int = 64) -> CouplingTranscript:
    """Run the coupled construction from level h until stop_level, a
    catastrophe, or k_max excursions.

    Default starts put both processes on level h at angle 0; the transcript
    then satisfies t_0 = tau_0 = 0 exactly.
    """
    if geometry is None:
        geometry = LevelGeometry()
    h = params.h
    if start_xi is None:
        start_xi = shell_site_near_angle(h, 0.0)
    if start_x is None:
        start_x = (float(level_radius(h)), 0.0)
    if gamma_membership(start_xi) != h:
        raise ValueError(f"start site {start_xi} not on shell {h}")

    tr = CouplingTranscript(h=h, params=params)
    tr.m.append(h)
    tr.mu.append(h)
    tr.t.append(0.0)
    tr.tau.append(0.0)

    xi = start_xi
    x_pt = start_x
    m = h
    t_now = 0.0
    tau_now = 0.0

    for k in range(1, k_max + 1):
        tries = 0
        result = None
        for ell in range(1, TRY_CAP + 1):
            gen = stream(seed, "couple", run_index, k, ell)
            tries += 1
            tr.level_try_counts[m] = tr.level_try_counts.get(m, 0) + 1
            result = run_try(gen, m, xi, x_pt, params, geometry)
            if result.outcome != "failure":
                break
        if result.outcome == "catastrophe":
            tr.level_catastrophes[m] = tr.level_catastrophes.get(m, 0) + 1
            tr.catastrophe_step = k
            tr.catastrophe_level = m
            tr.stop_reason = "catastrophe"
            # formal independent continuation of both level sequences
            gm = stream(seed, "couple", run_index, k, 0, 1)
            gmu = stream(seed, "couple", run_index, k, 0, 2)
            fm, fmu = [m], [m]
            for _ in range(formal_tail):
                mm = fm[-1]
                fm.append(mm - 1 if 2.0 * mm * gm.random() < mm - 1 else mm + 1)
                mm = fmu[-1]
                fmu.append(mm - 1 if 2.0 * mm * gmu.random() < mm - 1 else mm + 1)
            tr.formal_m = fm
            tr.formal_mu = fmu
            return tr
        # success: append the excursion
        for row in result.samples:
            tr.ratio_samples.append((t_now + row[0], row[1], row[2]))
        m = m + result.side_s
        xi = result.exit_site
        x_pt = result.exit_point
        t_now += result.s_time
        tau_now += result.sigma
        tr.m.append(m)
        tr.mu.append(m)
        tr.t.append(t_now)
        tr.tau.append(tau_now)
        tr.s.append(result.s_time)
        tr.sigma.append(result.sigma)
        tr.tries.append(tries)
        tr.disc.append(result.disc_sup)
        if m >= stop_level:
            tr.stop_reason = "level"
            return tr
    tr.stop_reason = "k_max"
    return tr


def transcript_bound_check(tr: CouplingTranscript, k_min_growth: int = 100) -> dict:
    """Verify the hard transcript invariants; report the statistical one.

    Hard (guaranteed by the success rules): |s_k - sigma_k| <= m_{k-1}^beta,
    |t_k - tau_k| <= (k+h)^(beta+1), s_k >= r_{m_{k-1}}, t_k >= r_{m_k},
    m_k = mu_k before any catastrophe.  Statistical: m_k >= k^(1/3); the
    report counts violations at k >= k_min_growth.
    """
    beta = tr.params.beta
    h = tr.h
    report = {"steps": tr.steps(), "hard_ok": True, "violations": []}
    for k in range(1, len(tr.m)):
        if tr.m[k] != tr.mu[k]:
            report["hard_ok"] = False
            report["violations"].append((k, "level sequences differ"))
    for k in range(1, tr.steps() + 1):
        m_prev = tr.m[k - 1]
        if abs(tr.s[k - 1] - tr.sigma[k - 1]) > float(m_prev) ** beta:
            report["hard_ok"] = False
            report["violations"].append((k, "per-step duration gap"))
        if tr.s[k - 1] < float(level_radius(m_prev)) - 1e-9:
            report["hard_ok"] = False
            report["violations"].append((k, "duration below r_m"))
        if abs(tr.t[k] - tr.tau[k]) > float(k + h) ** (beta + 1):
            report["hard_ok"] = False
            report["violations"].append((k, "cumulative clock gap"))
        if tr.t[k] < float(level_radius(tr.m[k])) - 1e-9:
            report["hard_ok"] = False
            report["violations"].append((k, "t_k below r_{m_k}"))
    grow_viol = 0
    grow_tot = 0
    first_fail = None
    for k in range(1, len(tr.m)):
        if tr.m[k] < k ** (1.0 / 3.0):
            if first_fail is None:
                first_fail = k
            if k >= k_min_growth:
                grow_viol += 1
        if k >= k_min_growth:
            grow_tot += 1
    report["growth_first_fail"] = first_fail
    report["growth_violations"] = grow_viol
    report["growth_checked"] = grow_tot
    if not report["hard_ok"]:
        raise CouplingInvariantError(str(report["violations"][:5]))
    return report


def catastrophe_survey(params_h: list[int], runs: int, seed: int,
                       stop_offset: int = 2, stop_cap: int = 11,
                       geometry: LevelGeometry | None = None,
                       check_bounds: bool = True) -> dict:
    """Catastrophe frequency per starting level, with per-level try stats.

    When check_bounds is set, every catastrophe-free transcript is run
    through the hard-invariant verifier and counted.
    """
    if geometry is None:
        geometry = LevelGeometry()
    out = {"h": [], "catastrophe_rate": [], "per_level": {},
           "bound_checks": 0, "bound_failures": 0}
    level_tries: dict[int, int] = {}
    level_cats: dict[int, int] = {}
    for h in params_h:
        params = CouplingParams(h=h)
        stop = min(h + stop_offset, stop_cap)
        cats = 0
        for r in range(runs):
            tr = run_coupling(params, stop, seed, run_index=h * 100_000 + r,
                              geometry=geometry)
            if tr.stop_reason == "catastrophe":
                cats += 1
            elif check_bounds:
                out["bound_checks"] += 1
                try:
                    transcript_bound_check(tr)
                except CouplingInvariantError:
                    out["bound_failures"] += 1
            for m, c in tr.level_try_counts.items():
                level_tries[m] = level_tries.get(m, 0) + c
            for m, c in tr.level_catastrophes.items():
                level_cats[m] = level_cats.get(m, 0) + c
        out["h"].append(h)
        out["catastrophe_rate"].append(cats / runs)
    out["per_level"] = {
        m: {"tries": level_tries[m], "catastrophes": level_cats.get(m, 0),
            "p_hat": level_cats.get(m, 0) / level_tries[m]}
        for m in sorted(level_tries)
    }
    return out
