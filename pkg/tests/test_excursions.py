import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from condwalk import diffusion as D
from condwalk import excursions as E
from condwalk import potential as P


def test_geometry_constants():
    assert abs(E.level_radius(3) - 3.9871) < 1e-3
    assert abs(P.RHO0 - 0.1985) < 1e-4


def test_gamma_membership_examples():
    assert E.gamma_membership((0, 0)) == 0
    assert E.gamma_membership((1, 0)) == 1
    assert E.gamma_membership((1, 1)) == 2
    assert E.gamma_membership((2, 0)) == 2
    assert E.gamma_membership((4, 0)) is None  # between shells 3 and 4
    assert E.gamma_membership((10, 0)) == 4


def test_shells_are_consistent():
    for m in range(9):
        sites = E.shell_sites(m)
        lo, hi = E.shell_norm2_bounds(m)
        n2 = sites[:, 0] ** 2 + sites[:, 1] ** 2
        assert (n2 > lo).all() and (n2 <= hi).all()
        for s in sites[:: max(1, len(sites) // 16)]:
            assert E.gamma_membership((int(s[0]), int(s[1]))) == m


def test_shells_cannot_be_skipped():
    # unit steps cannot jump over a shell: outer lower bound is at least the
    # inner upper bound shifted by less than one in radius
    for m in range(1, 12):
        r = float(E.level_radius(m))
        assert (E.level_radius(m + 1) - 1.0) - r > 1.0 or m < 2


def test_pi_weights(geometry):
    amax = geometry.max_potential_on_shells(2)
    assert geometry.pi_weight(2, (1, 0)) == pytest.approx(
        geometry.table.a(1, 0) / amax)
    # the maximizing site has weight exactly 1
    sites = np.concatenate([E.shell_sites(1), E.shell_sites(3)])
    vals = geometry.table.a_many(sites[:, 0], sites[:, 1])
    best = tuple(sites[np.argmax(vals)])
    assert geometry.pi_weight(2, best) == pytest.approx(1.0)
    assert all(
        geometry.pi_weight(2, tuple(s)) <= 1.0 + 1e-12 for s in sites[::3]
    )
    with pytest.raises(ValueError):
        geometry.pi_weight(2, (30, 0))


def test_hatW_inward_never_accepted_at_level_one():
    spec = D.DiffusionSpec()
    sides, tries, dur = E.hatW_excursion_sample(1, spec, 2_000, seed=20)
    assert (sides == 1).all()
    assert (dur > 0).all()


def test_hatW_level_move_law_and_tries():
    spec = D.DiffusionSpec()
    sides, tries, dur = E.hatW_excursion_sample(5, spec, 20_000, seed=21)
    down = (sides < 0).mean()
    assert abs(down - 0.4) < 1.5e-2
    # geometric tries at rejection probability (1/2)(2/(m+1)) = 1/6
    assert abs(tries.mean() - 1.2) < 0.02 * 1.2 + 3 * tries.std() / math.sqrt(len(tries))


def test_hatS_endpoint_law_total_variation(table, geometry):
    start = (3, 1)
    ex, ey, tr, du = E.hatS_endpoint_sample(start, 3, geometry, 20_000, seed=22)
    assert (du > 0).all()
    m_to = np.array([E.gamma_membership((int(a), int(b))) for a, b in zip(ex, ey)])
    assert set(m_to) <= {2, 4}
    targets = [tuple(t) for t in np.concatenate([E.shell_sites(2), E.shell_sites(4)])]
    exact = P.exact_hitting_distribution(start, targets, 40, weights=table)
    emp = Counter(zip(ex.tolist(), ey.tolist()))
    n = len(ex)
    tv = 0.5 * sum(abs(emp.get(k, 0) / n - p) for k, p in exact.items())
    tv += 0.5 * sum(c / n for k, c in emp.items() if k not in exact)
    assert tv < 0.04


def test_hatS_matches_direct_chain_identity(table, geometry):
    # accepted-excursion path law telescopes to the conditioned-walk law
    start = (10, 2)
    rec, path = E.build_hatS_excursion(start, 4, geometry, seed=23, want_path=True)
    assert rec.duration == len(path)
    assert E.gamma_membership(rec.end) in (3, 5)
    prob_chain = 1.0
    prev = start
    for site in map(tuple, path):
        prob_chain *= table.a(*site) / (4.0 * table.a(*prev))
        prev = site
    prob_identity = table.a(*rec.end) / (4.0 ** len(path) * table.a(*start))
    assert prob_chain == pytest.approx(prob_identity, rel=1e-12)


def test_hatW_level_chain_vs_1csrw():
    spec = D.DiffusionSpec()
    levels = E.hatW_level_chain(4, spec, 10_000, seed=24, step_fraction=0.05)
    # chi-square on transition counts against (m-1)/2m, (m+1)/2m
    chi2 = 0.0
    dof = 0
    for m in range(1, int(levels.max())):
        at_m = levels[:-1] == m
        n_m = int(at_m.sum())
        if n_m < 25:
            continue
        downs = int((levels[1:][at_m] == m - 1).sum())
        p = (m - 1) / (2.0 * m)
        exp_down = n_m * p
        exp_up = n_m * (1 - p)
        if exp_down > 0:
            chi2 += (downs - exp_down) ** 2 / exp_down
            dof += 1
        chi2 += ((n_m - downs) - exp_up) ** 2 / exp_up
    pval = 1 - stats.chi2.cdf(chi2, max(dof, 1))
    assert pval > 0.001


def test_excursion_record_csv(tmp_path, geometry):
    rec = E.build_hatS_excursion((3, 1), 3, geometry, seed=25)
    out = tmp_path / "exc.csv"
    E.excursion_records_to_csv([rec], str(out))
    lines = out.read_text().splitlines()
    assert lines[0] == "k,m_from,m_to,duration,tries"
    assert lines[1].startswith("0,3,")
