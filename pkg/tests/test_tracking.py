import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chambercut.algebra import PolynomialSystem
from chambercut.errors import NoConvergence, NonSquareSystem, SingularJacobian
from chambercut.tracking import (PathStatus, StraightLineHomotopy, TrackerOptions, dedup_points,
                                 newton_iterate, newton_polish, solve_total_degree, track_path)

AZ = ["a", "z"]
# the quadratic discriminant system on the slice b = 1
SLICED_QUAD = PolynomialSystem.parse(["z^2 + a*z + 1", "2*z + a"], AZ)
START_QUAD = PolynomialSystem.parse(["a^2 - 1", "z - 1"], AZ)


def sorted_rows(points):
    return sorted((tuple(np.round(np.asarray(p), 8)) for p in points), key=lambda r: [(c.real, c.imag) for c in r])


@pytest.mark.parametrize("start, end", [((1, 1), (2, -1)), ((-1, 1), (-2, 1))])
def test_example_homotopy_endpoints(start, end):
    H = StraightLineHomotopy(SLICED_QUAD, START_QUAD, 1 + 1j)
    res = track_path(H, np.array(start, dtype=complex))
    assert res.status is PathStatus.SUCCESS
    assert res.t_reached == 0
    np.testing.assert_allclose(res.endpoint, end, atol=1e-10)
    assert res.residual < TrackerOptions().residual_tol


def test_constant_homotopy_is_stationary():
    F = PolynomialSystem.parse(["a^2 - 3", "z - a"], AZ)
    H = StraightLineHomotopy(F, F, 1.0)
    x0 = np.array([np.sqrt(3), np.sqrt(3)], dtype=complex)
    res = track_path(H, x0)
    assert res.success
    np.testing.assert_allclose(res.endpoint, x0, atol=1e-12)


def test_sqrt2_from_unit_root():
    F = PolynomialSystem.parse(["x^2 - 2"], ["x"])
    S = PolynomialSystem.parse(["x^2 - 1"], ["x"])
    ends = []
    for gamma in (np.exp(0.7j), np.exp(-0.7j)):
        res = track_path(StraightLineHomotopy(F, S, gamma), np.array([1.0 + 0j]))
        assert res.success
        assert abs(res.endpoint[0] ** 2 - 2) < 1e-12
        ends.append(res.endpoint[0])
    # a real start with conjugate gammas gives conjugate paths, hence the same real endpoint
    assert ends[0] == pytest.approx(np.conj(ends[1]), abs=1e-10)
    assert ends[0].real == pytest.approx(np.sqrt(2), abs=1e-10)


def test_tracking_is_deterministic():
    H = StraightLineHomotopy(SLICED_QUAD, START_QUAD, np.exp(0.3j))
    a = track_path(H, np.array([1, 1], dtype=complex))
    b = track_path(H, np.array([1, 1], dtype=complex))
    np.testing.assert_allclose(a.endpoint, b.endpoint, atol=1e-9)
    assert a.steps == b.steps


def test_divergent_path_is_classified():
    # x*y - 1 = 0, x = 0 has no finite solution; both paths go to infinity
    F = PolynomialSystem.parse(["x*y - 1", "x"], ["x", "y"])
    S = PolynomialSystem.parse(["x^2 - 1", "y - 1"], ["x", "y"])
    H = StraightLineHomotopy(F, S, np.exp(0.4j))
    out = track_path(H, np.array([1, 1], dtype=complex))
    assert out.status in (PathStatus.DIVERGED, PathStatus.SINGULAR_ENDPOINT, PathStatus.STEP_FAILURE)
    assert not out.success


def test_tracker_options_validation():
    with pytest.raises(ValueError):
        TrackerOptions(min_step=0.1, initial_step=0.01)
    with pytest.raises(ValueError):
        TrackerOptions(corrector_tol=0)


# -- total degree ---------------------------------------------------------------

def test_total_degree_univariate():
    res = solve_total_degree(PolynomialSystem.parse(["x^2 - 1"], ["x"]), rng=np.random.default_rng(1))
    assert sorted(float(x[0].real) for x in res) == pytest.approx([-1, 1], abs=1e-12)


def test_total_degree_sliced_quadratic():
    res = solve_total_degree(SLICED_QUAD, rng=np.random.default_rng(2))
    assert sorted_rows(res.solutions) == sorted_rows([(-2, 1), (2, -1)])


def test_total_degree_nonsquare():
    with pytest.raises(NonSquareSystem):
        solve_total_degree(PolynomialSystem.parse(["x + y"], ["x", "y"]))


def test_every_success_endpoint_has_small_residual():
    F = PolynomialSystem.parse(["x^3 - 2*x*y + 1", "y^2 - x - 3/7"], ["x", "y"])
    res = solve_total_degree(F, rng=np.random.default_rng(3))
    assert len(res) == 6
    for x in res:
        assert np.linalg.norm(F.evaluate(x)) < 1e-10


def test_conjugation_closed_solution_set():
    F = PolynomialSystem.parse(["x^3 - 2*x*y + 1", "y^2 - x - 3/7"], ["x", "y"])
    sols = solve_total_degree(F, rng=np.random.default_rng(4)).solutions
    for x in sols:
        assert min(np.max(np.abs(np.conj(x) - y)) for y in sols) < 1e-9


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1))
def test_gamma_independence(seed1, seed2):
    F = PolynomialSystem.parse(["x^2 + y^2 - 5", "x*y - 2 + 1/3*x"], ["x", "y"])
    a = solve_total_degree(F, rng=np.random.default_rng(seed1)).solutions
    b = solve_total_degree(F, rng=np.random.default_rng(seed2)).solutions
    assert len(a) == len(b) == 4
    for x in a:
        assert min(np.max(np.abs(x - y)) for y in b) < 1e-8


def test_kuramoto_sliced_degree():
    """The sliced discriminant system: 48 start paths, 12 distinct t-values."""
    from chambercut.fixtures import get_fixture
    from chambercut.pwitness import cluster_values, random_slice, sliced_polynomials
    F = get_fixture("kuramoto").system
    line, fibre = random_slice(2, 4, 4, np.random.default_rng(5))
    res = solve_total_degree(sliced_polynomials(F, line, fibre), rng=np.random.default_rng(6))
    assert res.counts["paths"] == 48
    t = np.array([x[0] for x in res.solutions])
    assert len(cluster_values(t)) == 12


# -- Newton ---------------------------------------------------------------------

def _sq(c):
    return lambda x: (np.array([x[0] ** 2 - c]), np.array([[2 * x[0]]]))


def test_newton_sqrt2():
    x, its = newton_iterate(_sq(2.0), np.array([1.4]))
    assert x[0] == pytest.approx(1.414213562, abs=1e-9)
    assert its <= 4


def test_newton_converged_input_untouched():
    x0 = np.array([np.sqrt(2.0)])
    x, its = newton_iterate(_sq(2.0), x0)
    assert its == 0
    np.testing.assert_array_equal(x, x0)


def test_newton_double_root_fails():
    with pytest.raises((NoConvergence, SingularJacobian)):
        newton_polish(_sq(0.0), np.array([0.1]))


def test_dedup_points():
    pts = [np.array([1.0, 2.0]), np.array([1.0 + 1e-9, 2.0]), np.array([-1.0, 0.0])]
    out = dedup_points(pts)
    assert len(out) == 2
    assert out[0][0] == -1.0
