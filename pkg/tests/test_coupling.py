import math

import numpy as np
import pytest

from condwalk import coupling as C
from condwalk import excursions as E
from condwalk.rng import stream


def test_align_rotation_trivial():
    assert C.align_rotation((3.9871, 0.0), (3, 0)) == pytest.approx(0.0, abs=1e-12)


def test_align_rotation_radial_gap():
    theta = C.align_rotation((3.9871, 0.0), (0, 3))
    assert theta == pytest.approx(math.pi / 2)


def test_align_rotation_all_shell_sites():
    for m in range(3, 13):
        r = float(E.level_radius(m))
        sites = E.shell_sites(m)
        for s in sites[:: max(1, len(sites) // 40)]:
            theta = C.align_rotation((r, 0.0), (int(s[0]), int(s[1])))
            rot = (r * math.cos(theta), r * math.sin(theta))
            gap = math.hypot(s[0] - rot[0], s[1] - rot[1])
            assert gap <= 1.0


def test_align_rotation_error():
    with pytest.raises(C.AlignmentError):
        C.align_rotation((10.0, 0.0), (1, 0))


def test_classify_rules():
    # both outward, uniform accepts
    assert C.classify_try(1, 1, True, True, True, 0.3, 0.9, 5) == "success"
    # both outward, uniform rejects the lattice side: decoupled
    assert C.classify_try(1, 1, True, True, True, 0.95, 0.9, 5) == "catastrophe"
    # both inward, uniform below both thresholds
    assert C.classify_try(-1, -1, True, True, True, 0.1, 0.7, 5) == "success"
    # both inward, uniform above both thresholds: joint discard
    assert C.classify_try(-1, -1, True, True, True, 0.95, 0.7, 5) == "failure"
    # both inward, uniform between the thresholds: decoupled
    assert C.classify_try(-1, -1, True, True, True, 0.69, 0.75, 5) == "catastrophe"
    # sides disagree
    assert C.classify_try(1, -1, True, True, True, 0.1, 0.9, 5) == "catastrophe"
    # any assumption broken
    assert C.classify_try(1, 1, False, True, True, 0.1, 0.9, 5) == "catastrophe"
    assert C.classify_try(1, 1, True, False, True, 0.1, 0.9, 5) == "catastrophe"
    assert C.classify_try(1, 1, True, True, False, 0.1, 0.9, 5) == "catastrophe"


def test_run_try_measures_consistently(geometry):
    gen = stream(50, "couple", 0, 1, 1)
    xi = C.shell_site_near_angle(5, 0.0)
    res = C.run_try(gen, 5, xi, (float(E.level_radius(5)), 0.0),
                    C.CouplingParams(h=5), geometry)
    assert res.outcome in ("success", "failure", "catastrophe")
    if res.side_s != 0:
        assert E.gamma_membership(res.exit_site) in (4, 6)
    if res.side_w != 0:
        r = math.hypot(*res.exit_point)
        assert (abs(r - E.level_radius(4)) < 1e-6
                or abs(r - E.level_radius(6)) < 1e-6)
    assert res.sigma >= 1 or res.side_s == 0
    assert 0.0 <= res.u <= 1.0


def test_run_coupling_deterministic(geometry):
    a = C.run_coupling(C.CouplingParams(h=5), 7, seed=51, geometry=geometry)
    b = C.run_coupling(C.CouplingParams(h=5), 7, seed=51, geometry=geometry)
    assert a.m == b.m and a.t == b.t and a.stop_reason == b.stop_reason


def test_run_coupling_transcript_invariants(geometry):
    ok = 0
    for r in range(12):
        tr = C.run_coupling(C.CouplingParams(h=5), 7, seed=52, run_index=r,
                            geometry=geometry)
        if tr.stop_reason == "catastrophe":
            assert tr.catastrophe_level is not None
            assert len(tr.formal_m) == len(tr.formal_mu) > 1
            continue
        rep = C.transcript_bound_check(tr)
        assert rep["hard_ok"]
        ok += 1
        # level sequences identical before any catastrophe
        assert tr.m == tr.mu
        # durations in the allowed window
        for k in range(1, tr.steps() + 1):
            r_prev = float(E.level_radius(tr.m[k - 1]))
            assert tr.s[k - 1] >= r_prev
            assert tr.sigma[k - 1] >= r_prev
    assert ok >= 1


def test_empty_transcript_vacuous():
    tr = C.CouplingTranscript(h=5, params=C.CouplingParams(h=5))
    tr.m.append(5)
    tr.mu.append(5)
    tr.t.append(0.0)
    tr.tau.append(0.0)
    rep = C.transcript_bound_check(tr)
    assert rep["hard_ok"] and rep["steps"] == 0


def test_catastrophe_decreases_with_h(geometry):
    sv = C.catastrophe_survey([4, 8], 40, seed=53, geometry=geometry)
    assert sv["catastrophe_rate"][0] > sv["catastrophe_rate"][1]


def test_per_level_rates_decay(geometry):
    sv = C.catastrophe_survey([4, 6], 60, seed=54, geometry=geometry)
    per = sv["per_level"]
    lows = [per[m]["p_hat"] for m in (2, 3) if m in per]
    highs = [per[m]["p_hat"] for m in (5, 6, 7) if m in per]
    assert lows and highs
    assert min(lows) > max(highs)


def test_ratio_samples_within_factor_two(geometry):
    # catastrophe-free coupled runs keep the two radii within a factor 2
    # past the burn-in (here: past the starting level's time scale)
    good = 0
    for r in range(8):
        tr = C.run_coupling(C.CouplingParams(h=6), 8, seed=55, run_index=r,
                            geometry=geometry)
        if tr.stop_reason == "catastrophe":
            continue
        good += 1
        burn = float(E.level_radius(6)) ** 2 / 4.0
        for t_abs, r_s, r_w in tr.ratio_samples:
            if t_abs >= burn and r_w > 0:
                assert 0.5 <= r_s / r_w <= 2.0
    assert good >= 1


def test_transcript_csv(tmp_path, geometry):
    tr = C.run_coupling(C.CouplingParams(h=5), 6, seed=56, geometry=geometry)
    out = tmp_path / "tr.csv"
    tr.to_csv(str(out))
    lines = out.read_text().splitlines()
    assert lines[0] == "k,m_k,mu_k,t_k,tau_k,status,tries"
    assert lines[1].startswith("0,5,5,")


def test_coupled_lattice_marginal_matches_conditioned_law(geometry):
    # endpoint law of the lattice component over successful tries at m=4
    # against the exact conditioned hitting law
    from collections import Counter

    from condwalk import potential as P
    from condwalk.rng import stream as _stream

    m = 4
    xi = C.shell_site_near_angle(m, 0.0)
    x_pt = (float(E.level_radius(m)), 0.0)
    params = C.CouplingParams(h=m)
    wanted = 20_000
    got = Counter()
    ell = 0
    while sum(got.values()) < wanted:
        ell += 1
        res = C.run_try(_stream(57, "couple", 0, 1, ell), m, xi, x_pt,
                        params, geometry)
        if res.outcome == "success":
            got[res.exit_site] += 1
    n = sum(got.values())
    targets = [tuple(v) for v in
               np.concatenate([E.shell_sites(m - 1), E.shell_sites(m + 1)])]
    exact_raw = P.exact_hitting_distribution(xi, targets, 40,
                                             weights=geometry.table)
    # successful tries condition on the joint acceptance; the lattice
    # endpoint law is the conditioned hitting law restricted to matching
    # directions, which at this level is within ~1e-2 of the raw law
    tv = 0.5 * sum(abs(got.get(k, 0) / n - p) for k, p in exact_raw.items())
    tv += 0.5 * sum(c / n for k, c in got.items() if k not in exact_raw)
    assert tv < 0.05


def test_level_growth_cube_root():
    # the level sequence eventually clears k^(1/3); violations past k=100
    # are rare (checked on the exact level-chain law)
    from condwalk.diffusion import level_chain_path

    viol = 0
    total = 0
    for r in range(10):
        levels = level_chain_path(3, 1000, seed=58, replica=r)
        for k in range(100, len(levels)):
            total += 1
            if levels[k] < k ** (1.0 / 3.0):
                viol += 1
    assert total == 9010
    assert viol / total < 0.01
