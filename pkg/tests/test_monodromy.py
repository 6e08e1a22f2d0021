import numpy as np
import pytest

from chambercut.algebra import PolynomialSystem
from chambercut.monodromy import (Loop, MonodromyOptions, ParameterFamily, monodromy_solve,
                                  permutation_of_loop, track_loop)
from chambercut.tracking import same_point, solve_total_degree

# quadratic discriminant system with b as the moving parameter, unknowns (a, z)
QUAD_FAMILY_SYSTEM = PolynomialSystem.parse(["z^2 + a*z + b", "2*z + a"], ["b", "a", "z"], 1)
SOLS_AT_B1 = [np.array([2, -1], complex), np.array([-2, 1], complex)]


@pytest.fixture
def quad_family():
    return ParameterFamily.from_system(QUAD_FAMILY_SYSTEM, [1.0])


def test_small_circle_returns_start(quad_family):
    loop = Loop.circle(quad_family.q0, 0, 0.75, 0.25)
    np.testing.assert_allclose(track_loop(quad_family, loop, SOLS_AT_B1[0]), SOLS_AT_B1[0], atol=1e-10)


def test_large_circle_exchanges(quad_family):
    loop = Loop.circle(quad_family.q0, 0, 0.25, 0.75)
    np.testing.assert_allclose(track_loop(quad_family, loop, SOLS_AT_B1[0]), SOLS_AT_B1[1], atol=1e-10)


def test_permutations(quad_family):
    small = Loop.circle(quad_family.q0, 0, 0.75, 0.25)
    big = Loop.circle(quad_family.q0, 0, 0.25, 0.75)
    assert permutation_of_loop(quad_family, small, SOLS_AT_B1) == {0: 0, 1: 1}
    assert permutation_of_loop(quad_family, big, SOLS_AT_B1) == {0: 1, 1: 0}
    # the reverse loop realizes the inverse permutation; composing gives the identity
    back = permutation_of_loop(quad_family, big.reversed(), SOLS_AT_B1)
    assert {i: back[j] for i, j in permutation_of_loop(quad_family, big, SOLS_AT_B1).items()} == {0: 0, 1: 1}


def test_zero_radius_loop_is_identity(quad_family):
    loop = Loop.triangle(quad_family.q0, quad_family.q0, quad_family.q0)
    assert permutation_of_loop(quad_family, loop, SOLS_AT_B1) == {0: 0, 1: 1}


def test_incomplete_solution_set_is_flagged(quad_family):
    big = Loop.circle(quad_family.q0, 0, 0.25, 0.75)
    assert permutation_of_loop(quad_family, big, SOLS_AT_B1[:1]) == {0: "unmatched"}


def test_monodromy_quadratic_from_one_seed(quad_family):
    res = monodromy_solve(quad_family, [SOLS_AT_B1[0]], MonodromyOptions(stall_limit=5),
                          rng=np.random.default_rng(0))
    assert len(res.solutions) == 2
    assert res.stabilized
    assert max(res.residuals) < 1e-10


def test_linear_family_stalls_with_one_solution():
    S = PolynomialSystem.parse(["x + 2*y - q", "x - y + 1"], ["q", "x", "y"], 1)
    fam = ParameterFamily.from_system(S, [0.3 + 0.2j])
    x0 = np.linalg.solve([[1, 2], [1, -1]], [0.3 + 0.2j, -1])
    res = monodromy_solve(fam, [x0], MonodromyOptions(stall_limit=4), rng=np.random.default_rng(1))
    assert len(res.solutions) == 1
    assert res.loops == 4 and res.stabilized


GENERIC = PolynomialSystem.parse(["x^2 + y^2 - 5 + q1*x", "x*y - 2 + q2*y^2 + q1"], ["q1", "q2", "x", "y"], 2)


def _fibre_by_total_degree(q0):
    sub = PolynomialSystem([f.substitute({"q1": q0[0], "q2": q0[1]}).with_variables(["x", "y"])
                            for f in GENERIC.polys], 0)
    return solve_total_degree(sub, rng=np.random.default_rng(3)).solutions


def test_monodromy_matches_total_degree():
    q0 = np.array([0.4 - 0.7j, -0.3 + 0.2j])
    fam = ParameterFamily.from_system(GENERIC, q0)
    full = _fibre_by_total_degree(q0)
    assert len(full) == 4
    res = monodromy_solve(fam, [full[0]], MonodromyOptions(stall_limit=6), rng=np.random.default_rng(4))
    assert len(res.solutions) == len(full)
    for x in res.solutions:
        assert any(same_point(x, y) for y in full)


def test_monodromy_target_count_and_determinism():
    q0 = np.array([0.4 - 0.7j, -0.3 + 0.2j])
    fam = ParameterFamily.from_system(GENERIC, q0)
    seed = _fibre_by_total_degree(q0)[0]
    opts = MonodromyOptions(stall_limit=6, target_count=4)
    a = monodromy_solve(fam, [seed], opts, rng=np.random.default_rng(9))
    b = monodromy_solve(fam, [seed], opts, rng=np.random.default_rng(9))
    assert len(a.solutions) == 4
    assert not a.stabilized
    assert len(a.solutions) == len(b.solutions)
    for x, y in zip(a.solutions, b.solutions):
        np.testing.assert_array_equal(x, y)


def test_repeated_loops_never_exceed_fibre():
    q0 = np.array([0.4 - 0.7j, -0.3 + 0.2j])
    fam = ParameterFamily.from_system(GENERIC, q0)
    full = _fibre_by_total_degree(q0)
    res = monodromy_solve(fam, full, MonodromyOptions(stall_limit=3, max_loops=6),
                          rng=np.random.default_rng(5))
    assert len(res.solutions) == 4
