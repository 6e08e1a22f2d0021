import numpy as np
import pytest

from chambercut.algebra import Polynomial, PolynomialSystem, parse_polynomial
from chambercut.errors import RoutingError
from chambercut.routing import (ExplicitBackend, build_routing, classify_real, critical_points,
                                default_exponent, distinct_values_warning, seed_start_solutions)
from chambercut.tracking import solve_total_degree

from conftest import QUAD_ROUTING_INDICES, QUAD_ROUTING_POINTS, match_rows


class _DegreeOnly:
    def __init__(self, degH, k=2):
        self.degH, self.k = degH, k


def test_default_exponents():
    assert default_exponent(2) == 2
    assert default_exponent(2, [1]) == 2
    assert default_exponent(12) == 7
    rf = build_routing(_DegreeOnly(2), None, None, [parse_polynomial("a", ["a", "b"])],
                       np.random.default_rng(0))
    assert rf.exponent == 2
    assert np.all(np.abs(rf.center) <= 1)


def test_exponent_bound_enforced():
    with pytest.raises(RoutingError):
        build_routing(_DegreeOnly(4), (0.0, 0.0), 2)
    with pytest.raises(RoutingError):
        build_routing(_DegreeOnly(2), (0.0, 0.0, 1.0), 2)


def cleared_critical_count(h: Polynomial, c, e):
    """Critical points of |h|/q^e from q grad h - 2 e h (x - c) = 0, by total degree.

    Spurious solutions with h = q = 0 (where the clearing is invalid) are dropped.
    """
    names = h.var_names
    xs = [Polynomial.variable(i, names) for i in range(len(names))]
    d = [x - float(ci) for x, ci in zip(xs, c)]
    q = 1 + sum(di * di for di in d)
    eqs = [q * h.differentiate(i) - 2 * e * h * d[i] for i in range(len(names))]
    sols = solve_total_degree(PolynomialSystem(eqs), rng=np.random.default_rng(1)).solutions
    keep = []
    for x in sols:
        hv, qv = h.evaluate(x), q.evaluate(x)
        if abs(hv) > 1e-8 * (1 + np.linalg.norm(x)) ** 2 and abs(qv) > 1e-8:
            keep.append(x)
    return keep


@pytest.fixture(scope="module")
def quad_critical(quad_explicit_rf):
    return critical_points(quad_explicit_rf, np.random.default_rng(3), loop_rng=np.random.default_rng(4))


def test_quadratic_critical_count_matches_cleared_system(quad_critical, quad_fixture):
    ref = cleared_critical_count(quad_fixture.explicit_h, (13.0, 2.0), 2)
    assert len(quad_critical.points) == len(ref)
    for x in ref:
        assert min(np.max(np.abs(x - y)) for y in quad_critical.points) < 1e-6 * (1 + np.linalg.norm(x))


def test_quadratic_routing_points(quad_critical, quad_explicit_rf):
    points, rejected = classify_real(quad_critical.points, quad_explicit_rf)
    assert not rejected
    assert len(points) == 4
    m = match_rows([p.coords for p in points], QUAD_ROUTING_POINTS, 1e-3)
    assert m is not None
    assert [points[j].index for j in m] == QUAD_ROUTING_INDICES


def test_routing_point_invariants(quad_critical, quad_explicit_rf):
    points, _ = classify_real(quad_critical.points, quad_explicit_rf)
    for p in points:
        H = quad_explicit_rf.hessian(p.coords)
        assert p.residual < 1e-10 * (1 + np.linalg.norm(H))
        if p.index == 0:
            assert np.all(np.linalg.eigvalsh(H) < 0)
    assert distinct_values_warning(points) == []


def test_index_of_log_r_equals_index_of_r(quad_critical, quad_explicit_rf, quad_fixture):
    """Hessian of r itself by central differences of r = |h| / q^e."""
    h = quad_fixture.explicit_h
    c = quad_explicit_rf.center

    def r(x):
        return abs(h.evaluate(x).real) / (1 + np.sum((x - c) ** 2)) ** 2

    points, _ = classify_real(quad_critical.points, quad_explicit_rf)
    for p in points:
        x = p.coords
        eps = 1e-3 * (1 + np.linalg.norm(x))
        E = np.eye(2) * eps
        H = np.array([[(r(x + E[i] + E[j]) - r(x + E[i] - E[j]) - r(x - E[i] + E[j]) + r(x - E[i] - E[j]))
                       / (4 * eps ** 2) for j in range(2)] for i in range(2)])
        assert int(np.sum(np.linalg.eigvalsh(H) > 0)) == p.index


def test_critical_points_oracle_matches_explicit(quad_projection_run, quad_explicit_run):
    a = quad_projection_run.critical.points
    b = quad_explicit_run.critical.points
    assert len(a) == len(b)
    for x in a:
        assert min(np.max(np.abs(x - y)) for y in b) < 1e-6 * (1 + np.linalg.norm(x))
    pa, pb = quad_projection_run.report.points, quad_explicit_run.report.points
    np.testing.assert_allclose([p.coords for p in pa], [p.coords for p in pb], atol=1e-6)
    assert [p.index for p in pa] == [p.index for p in pb]


def test_seed_start_solutions(quad_explicit_rf):
    rng = np.random.default_rng(5)
    assert seed_start_solutions(quad_explicit_rf, 0, rng) == []
    seeds = seed_start_solutions(quad_explicit_rf, 5, rng)
    assert len(seeds) == 5
    for x, q in seeds:
        np.testing.assert_array_equal(quad_explicit_rf.gradient(x.real) - q.real, 0)


def test_seed_flow_reaches_index_zero_point(quad_explicit_rf):
    seeds = seed_start_solutions(quad_explicit_rf, 0, np.random.default_rng(6), flow_count=3)
    assert seeds
    points, _ = classify_real([x for x, _ in seeds], quad_explicit_rf)
    assert points and all(p.index == 0 for p in points)


def test_extra_factor_exponent_and_count():
    h = parse_polynomial("a^2 - 4*b", ["a", "b"])
    g = parse_polynomial("a", ["a", "b"])
    rf = build_routing(ExplicitBackend(h), (13.0, 2.0), None, [g])
    assert rf.exponent == 2
    cps = critical_points(rf, np.random.default_rng(7), loop_rng=np.random.default_rng(8))
    ref = cleared_critical_count(h * g, (13.0, 2.0), 2)
    assert len(cps.points) == len(ref)
