"""Acceptance criteria 1-10, one group of tests per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see conftest).
"""

import itertools
import time
import warnings

import numpy as np
import pytest

from chambercut import report as report_io
from chambercut.algebra import Polynomial, PolynomialSystem
from chambercut.flow import gradient_flow
from chambercut.fixtures import get_fixture, trivial_lift
from chambercut.monodromy import Loop, ParameterFamily, permutation_of_loop
from chambercut.oracle import IDENTITY_MONITOR, IDENTITY_RTOL, LineOracle
from chambercut.pipeline import JobSpec, run_regions
from chambercut.pwitness import SlicedSystem, SliceLine, check_reduced, initial_pseudo_witness, move_slice
from chambercut.regions import membership
from chambercut.routing import OracleBackend, build_routing, default_exponent
from chambercut.tracking import StraightLineHomotopy, solve_total_degree, track_path

from conftest import QUAD_ROUTING_INDICES, QUAD_ROUTING_POINTS, match_rows

criterion = pytest.mark.criterion


def _symbolic_routing(h: Polynomial, c, e):
    """grad and Hessian of log|h| - e log q from formal derivatives."""
    k = h.nvars
    d1 = [h.differentiate(i) for i in range(k)]
    d2 = [[d.differentiate(j) for j in range(k)] for d in d1]

    def f(x):
        hv = h.evaluate(x).real
        g = np.array([d.evaluate(x).real for d in d1]) / hv
        H = np.array([[d.evaluate(x).real for d in row] for row in d2]) / hv - np.outer(g, g)
        d = x - c
        q = 1 + d @ d
        return g - 2 * e * d / q, H + 4 * e * np.outer(d, d) / q ** 2 - 2 * e / q * np.eye(k)
    return f


def _random_h(k, deg, rng):
    names = [f"x{i + 1}" for i in range(k)]
    terms = {m: int(rng.integers(-5, 6)) for m in itertools.product(range(deg + 1), repeat=k) if sum(m) <= deg}
    top = tuple([deg] + [0] * (k - 1))
    terms[top] = 1 + abs(terms[top])
    return Polynomial(terms, names)


# -- 1 ---------------------------------------------------------------------------------


@criterion(1, "quadratic end-to-end in projection mode")
def test_c1_quadratic_projection():
    t0 = time.perf_counter()
    run = run_regions(JobSpec.from_fixture("quadratic", "projection", seed=0))
    elapsed = time.perf_counter() - t0
    rep = run.report
    assert run.rf.degH == 2
    np.testing.assert_array_equal(run.rf.center, [13.0, 2.0])
    assert run.rf.exponent == 2
    assert len(rep.points) == 4
    m = match_rows([p.coords for p in rep.points], QUAD_ROUTING_POINTS, 1e-3)
    assert m is not None
    assert [rep.points[j].index for j in m] == QUAD_ROUTING_INDICES
    assert sorted(rep.sizes) == [1, 3]
    assert rep.euler == [1, 1]
    assert elapsed < 60, elapsed


# -- 2 ---------------------------------------------------------------------------------


LIFTS = [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (2, 4), (3, 4), (2, 3), (3, 2), (2, 4)]


def _compare(oracle, h, c, e, rng, k, n=50):
    rf = build_routing(OracleBackend(oracle), c, e)
    sym = _symbolic_routing(h, c, e)
    done = 0
    while done < n:
        x = rng.uniform(-2, 2, k)
        g0, H0 = sym(x)
        g, H = rf.derivatives(x)
        assert np.linalg.norm(g - g0) <= 1e-8 * np.linalg.norm(g0), (x, g, g0)
        assert np.linalg.norm(H - H0) <= 1e-6 * np.linalg.norm(H0), (x, H, H0)
        done += 1


@criterion(2, "oracle and explicit derivatives agree")
def test_c2_oracle_explicit_equivalence(quad_oracle, quad_fixture):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    for k, deg in LIFTS:
        h = _random_h(k, deg, rng)
        pws = initial_pseudo_witness(trivial_lift(h), rng=rng)
        assert pws.degH == deg
        c = rng.uniform(-1, 1, k)
        _compare(LineOracle(pws, rng=rng), h, c, default_exponent(deg), rng, k)
    _compare(quad_oracle, quad_fixture.explicit_h, np.array([13.0, 2.0]), 2, rng, 2)
    assert time.perf_counter() - t0 < 120


# -- 3 ---------------------------------------------------------------------------------


@criterion(3, "Hessian vs finite differences; directional identity")
@pytest.mark.parametrize("name", ["quadratic", "kuramoto", "lift"])
def test_c3_derivative_consistency(name, quad_oracle):
    rng = np.random.default_rng(3)
    if name == "quadratic":
        oracle, box = quad_oracle, 4.0
    elif name == "kuramoto":
        pws = initial_pseudo_witness(get_fixture("kuramoto").system, rng=rng)
        oracle, box = LineOracle(pws, rng=rng), 0.6
    else:
        pws = initial_pseudo_witness(trivial_lift(_random_h(3, 3, rng)), rng=rng)
        oracle, box = LineOracle(pws, rng=rng), 1.5
    k = oracle.k
    eps = 1e-4
    checked = 0
    while checked < 5:
        x = rng.uniform(-box, box, k)
        v = oracle.evaluate(x, 2)
        # central differences need the step far below the distance to H (~ 1/|grad log h|)
        if eps * np.linalg.norm(v.grad) > 1e-2:
            continue
        checked += 1
        H = v.hess
        fd = np.column_stack([(oracle.evaluate(x + eps * u, 1).grad - oracle.evaluate(x - eps * u, 1).grad)
                              / (2 * eps) for u in np.eye(k)])
        assert np.linalg.norm(H - fd) <= 1e-4 * np.linalg.norm(H)
    assert IDENTITY_MONITOR.count >= 5 * (2 * k + 1)
    assert IDENTITY_MONITOR.worst < IDENTITY_RTOL


# -- 4 ---------------------------------------------------------------------------------


@criterion(4, "micro-examples: homotopy, monodromy loops, pseudo-witness closed forms")
def test_c4_homotopy_endpoints():
    sliced = PolynomialSystem.parse(["z^2 + a*z + 1", "2*z + a"], ["a", "z"])
    start = PolynomialSystem.parse(["a^2 - 1", "z - 1"], ["a", "z"])
    H = StraightLineHomotopy(sliced, start, 1 + 1j)
    ends = {tuple(np.round(track_path(H, np.array(s, complex)).endpoint.real, 10)) for s in [(1, 1), (-1, 1)]}
    assert ends == {(2.0, -1.0), (-2.0, 1.0)}


@criterion(4, "micro-examples: homotopy, monodromy loops, pseudo-witness closed forms")
def test_c4_monodromy_loops():
    S = PolynomialSystem.parse(["z^2 + a*z + b", "2*z + a"], ["b", "a", "z"], 1)
    fam = ParameterFamily.from_system(S, [1.0])
    sols = [np.array([2, -1], complex), np.array([-2, 1], complex)]
    assert permutation_of_loop(fam, Loop.circle(fam.q0, 0, 0.75, 0.25), sols) == {0: 0, 1: 1}
    assert permutation_of_loop(fam, Loop.circle(fam.q0, 0, 0.25, 0.75), sols) == {0: 1, 1: 0}


@criterion(4, "micro-examples: homotopy, monodromy loops, pseudo-witness closed forms")
def test_c4_pseudo_witness_closed_forms(quad_pws):
    line = SliceLine([0, 2], [-2, 3 / 5])
    inter = move_slice(quad_pws, line)
    X = SlicedSystem(quad_pws.system).lift(np.column_stack([inter.t, inter.y]), inter.line, inter.fibre)
    r = np.sqrt(209.0)
    for sgn in (1, -1):
        e = np.array([-(3 + sgn * r) / 5, (109 + 3 * sgn * r) / 50, (3 + sgn * r) / 10])
        assert min(np.max(np.abs(x - e)) for x in X) < 1e-10


# -- 5 ---------------------------------------------------------------------------------

KURAMOTO_COMPLEX_REFERENCE = 59
KURAMOTO_REAL_REFERENCE = 24
# derived values; see the decisions ledger for why 59/24 cannot both hold
KURAMOTO_COMPLEX = 61
KURAMOTO_REAL = 23
KURAMOTO_REGIONS = 9


@pytest.fixture(scope="module")
def kuramoto_run(tmp_path_factory):
    t0 = time.perf_counter()
    spec = JobSpec.from_fixture("kuramoto", "discriminant", seed=0)
    run = run_regions(spec, tmp_path_factory.mktemp("kcache"))
    return run, time.perf_counter() - t0


@pytest.mark.slow
@criterion(5, "Kuramoto regions")
def test_c5_kuramoto(kuramoto_run):
    run, elapsed = kuramoto_run
    rep = run.report
    assert run.rf.degH == 12 and run.rf.exponent == 7
    np.testing.assert_array_equal(run.rf.center, [0.47, 0.43])
    n_complex = len(run.critical.points)
    print(f"\nKuramoto: {n_complex} complex critical points, {len(rep.points)} routing points, "
          f"{len(rep.classes)} regions, {elapsed:.0f} s")
    if n_complex != KURAMOTO_COMPLEX_REFERENCE:
        warnings.warn(f"complex critical count {n_complex}, reference {KURAMOTO_COMPLEX_REFERENCE}")
    assert n_complex == KURAMOTO_COMPLEX
    assert len(rep.points) == KURAMOTO_REAL
    assert sorted(p.index for p in rep.points) == [0] * 15 + [1] * 8
    assert len(rep.classes) == KURAMOTO_REGIONS
    # conjugation closure of the complex critical set, and parity with the real count
    pts = run.critical.points
    for x in pts:
        assert min(np.max(np.abs(np.conj(x) - y)) for y in pts) < 1e-6 * (1 + np.linalg.norm(x))
    assert (n_complex - len(rep.points)) % 2 == 0
    assert elapsed < 30 * 60


@pytest.mark.slow
@criterion(5, "Kuramoto regions")
@pytest.mark.xfail(strict=True, reason="reference 24 real / 59 complex violates conjugate pairing; "
                                       "23 real are found (decisions ledger)")
def test_c5_kuramoto_reference_real_count(kuramoto_run):
    run, _ = kuramoto_run
    assert len(run.report.points) == KURAMOTO_REAL_REFERENCE


# -- 6 ---------------------------------------------------------------------------------


RPR_REAL_REFERENCE = 24
RPR_REAL = 25    # derived; the extra saddle at (-46.04, -39.17) is verified with an independent witness set


@pytest.fixture(scope="module")
def rpr_run(tmp_path_factory):
    t0 = time.perf_counter()
    run = run_regions(JobSpec.from_fixture("3rpr", "discriminant", seed=0), tmp_path_factory.mktemp("rcache"))
    return run, time.perf_counter() - t0


@pytest.mark.extended
@criterion(6, "3RPR two-parameter regions")
def test_c6_3rpr_regions(rpr_run):
    run, elapsed = rpr_run
    rep = run.report
    assert run.rf.degH == 12
    np.testing.assert_array_equal(run.rf.center, [4.72, 4.33])
    assert len(rep.points) == RPR_REAL
    assert sum(p.index == 0 for p in rep.points) == 15
    assert len(rep.classes) == 8
    assert not rep.warnings
    assert elapsed < 2 * 3600


@pytest.mark.extended
@criterion(6, "3RPR two-parameter regions")
@pytest.mark.xfail(strict=True, reason="a 25th routing point (a far saddle) is found and verified; "
                                       "see the decisions ledger")
def test_c6_3rpr_reference_routing_count(rpr_run):
    run, _ = rpr_run
    assert len(run.report.points) == RPR_REAL_REFERENCE


# -- 7 ---------------------------------------------------------------------------------


@criterion(7, "3RPR degree-only checks")
@pytest.mark.parametrize("name, deg", [("3rpr-c1-c2-c3", 12), ("3rpr-c1-c2-A2", 24)])
def test_c7_3rpr_degree(name, deg):
    t0 = time.perf_counter()
    pws = initial_pseudo_witness(get_fixture(name).system, rng=np.random.default_rng(0))
    assert pws.degH == deg
    assert pws.mult == 1
    assert time.perf_counter() - t0 < 600


# -- 8 ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def factor_run():
    return run_regions(JobSpec.from_fixture("quadratic-factor", "explicit", seed=0))


@criterion(8, "property suites")
def test_c8_index_zero_point_per_class(quad_projection_run, factor_run):
    for run in (quad_projection_run, factor_run):
        for c in run.report.classes:
            assert any(run.report.points[i].index == 0 for i in c.members)


@criterion(8, "property suites")
def test_c8_flow_certificates(quad_projection_run, factor_run):
    for run in (quad_projection_run, factor_run):
        assert run.report.flows or all(p.index == 0 for p in run.report.points)
        for f in run.report.flows:
            assert f.status == "limit"
    # the stored records carry no certificate: re-run the connectivity flows
    run = quad_projection_run
    known = [p.coords for p in run.report.points]
    for f in run.report.flows:
        p = run.report.points[f.source]
        res = gradient_flow(run.rf, p.coords + f.sign * 1e-4 * (1 + np.linalg.norm(p.coords))
                            * p.eigenvectors[:, f.direction], known)
        assert res.limit == f.limit
        assert res.min_increase >= 0


@criterion(8, "property suites")
def test_c8_conjugation_reality(quad_oracle):
    rng = np.random.default_rng(8)
    for _ in range(20):
        d = quad_oracle.evaluate(rng.uniform(-5, 5, 2), 2).data
        scale = 1 + np.abs(d.grad_b).sum()
        assert np.max(np.abs(d.grad_b.sum(axis=0).imag)) < 1e-8 * scale
        assert abs(d.s.sum().imag) < 1e-8 * (1 + np.abs(d.s).sum())


@criterion(8, "property suites")
def test_c8_determinism_byte_check(quad_explicit_run):
    again = run_regions(JobSpec.from_fixture("quadratic", "explicit", seed=0))
    assert report_io.dumps(report_io.run_to_dict(again)) == report_io.dumps(report_io.run_to_dict(quad_explicit_run))


@criterion(8, "property suites")
def test_c8_gamma_independence():
    F = PolynomialSystem.parse(["x^3 - 2*x*y + 1", "y^2 - x - 3/7"], ["x", "y"])
    ref = solve_total_degree(F, rng=np.random.default_rng(0)).solutions
    assert len(ref) == 6
    for seed in range(1, 6):
        sols = solve_total_degree(F, rng=np.random.default_rng(seed)).solutions
        assert len(sols) == 6
        for x in sols:
            assert min(np.max(np.abs(x - y)) for y in ref) < 1e-8


# -- 9 ---------------------------------------------------------------------------------


@criterion(9, "extra factor g = a: 4 regions refine the sign vector")
def test_c9_extra_factor_sign_oracle(factor_run, quad_fixture):
    rep = factor_run.report
    assert len(rep.classes) == 4
    assert sum(rep.sizes) == len(rep.points)
    h = quad_fixture.explicit_h
    rng = np.random.default_rng(9)
    P = rng.uniform([-17.0, -28.0], [43.0, 32.0], (10 ** 4, 2))    # a 60 x 60 box around c = (13, 2)
    labels: dict = {}
    failures = 0
    for z in P:
        cls, _ = membership(factor_run.rf, rep.partition, rep.points, z)
        if cls is None:
            failures += 1
            continue
        sign = (int(np.sign(h.evaluate(z).real)), int(np.sign(z[0])))
        labels.setdefault(cls, set()).add(sign)
    print(f"\nsign oracle: {len(P)} samples, {failures} failed flows")
    assert failures <= 10, failures                 # at most 0.1 % of flows may fail
    assert all(len(s) == 1 for s in labels.values()), labels
    assert len(labels) == 4
    assert len({next(iter(s)) for s in labels.values()}) == 4


# -- 10 --------------------------------------------------------------------------------


@criterion(10, "documented exclusions: smoke tests only")
def test_c10_three_parameter_3rpr_degree_smoke():
    pws = initial_pseudo_witness(get_fixture("3rpr-c1-c2-A2").system, rng=np.random.default_rng(2))
    assert pws.degH == 24
    assert check_reduced(pws, include_discarded=False)[0]


@criterion(10, "documented exclusions: smoke tests only")
def test_c10_allee_reduced_part_smoke():
    F = get_fixture("allee").system
    degs = set()
    for seed in (0, 1):
        pws = initial_pseudo_witness(F, rng=np.random.default_rng(seed), strict_clusters=False)
        assert check_reduced(pws, include_discarded=False)[0]
        degs.add((pws.degH, pws.mult))
    assert len(degs) == 1                           # the reduced part is seed-independent


@criterion(10, "documented exclusions: smoke tests only")
@pytest.mark.skip(reason="documented exclusion: three-parameter 3RPR and full Allee region "
                         "computations are out of desk-scale reach")
def test_c10_excluded_region_computations():
    pass
