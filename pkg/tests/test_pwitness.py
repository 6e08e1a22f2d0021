import json

import numpy as np
import pytest

from chambercut.errors import NonReducedWitnessSet, PathFailure, PointOnHypersurface, TCollision
from chambercut.fixtures import get_fixture
from chambercut.pwitness import (PseudoWitnessSet, SlicedSystem, SliceLine, check_reduced,
                                 initial_pseudo_witness, move_slice)

SQRT209 = np.sqrt(209.0)
EXAMPLE_LINE = SliceLine([0, 2], [-2, 3 / 5])


def test_quadratic_degree(quad_pws):
    assert quad_pws.degH == 2
    assert quad_pws.mult == 1
    assert quad_pws.reduced
    assert len(quad_pws.t) == quad_pws.degH * quad_pws.mult


def test_witness_points_satisfy_system(quad_pws):
    X = quad_pws.lifted()
    F = quad_pws.system
    for x in X:
        assert np.linalg.norm(F.evaluate(x)) < 1e-10 * (1 + F.coefficient_scale())


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_degree_slice_independent(seed):
    F = get_fixture("quadratic").system
    pws = initial_pseudo_witness(F, rng=np.random.default_rng(seed))
    assert (pws.degH, pws.mult) == (2, 1)


def test_example_line_closed_forms(quad_pws):
    inter = move_slice(quad_pws, EXAMPLE_LINE)
    X = SlicedSystem(quad_pws.system).lift(np.column_stack([inter.t, inter.y]), inter.line, inter.fibre)
    expected = []
    for sgn in (1, -1):
        r = 3 + sgn * SQRT209
        expected.append([-r / 5, (109 + 3 * sgn * SQRT209) / 50, r / 10])
    for e in expected:
        assert min(np.max(np.abs(x - np.array(e))) for x in X) < 1e-10
    np.testing.assert_allclose(sorted(inter.t.real), sorted([(3 - SQRT209) / 10, (3 + SQRT209) / 10]),
                               atol=1e-10)


def test_real_query_vieta(quad_pws):
    """h(p + t b) = 4t^2 - (12/5)t - 8 on the example line."""
    t = move_slice(quad_pws, EXAMPLE_LINE).t
    assert np.max(np.abs(t.imag)) < 1e-10
    assert t.sum() == pytest.approx(3 / 5, abs=1e-10)
    assert np.prod(t) == pytest.approx(-2, abs=1e-10)
    s = 1 / t
    assert abs((-s.sum()).imag) < 1e-9


def test_identity_move(quad_pws):
    inter = move_slice(quad_pws, quad_pws.line, quad_pws.fibre)
    np.testing.assert_allclose(np.sort_complex(inter.t_all), np.sort_complex(quad_pws.t), atol=1e-12)


def test_requery_is_stable(quad_pws):
    line = SliceLine([0.3, -1.2], [0.6, -0.8])
    a = move_slice(quad_pws, line, rng=np.random.default_rng(1)).t
    b = move_slice(quad_pws, line, rng=np.random.default_rng(2)).t
    np.testing.assert_allclose(np.sort_complex(a), np.sort_complex(b), atol=1e-9)


def test_all_paths_accounted(quad_pws):
    inter = move_slice(quad_pws, SliceLine([1.0, -3.0], [0.2, 0.9]))
    assert len(inter.t_all) == quad_pws.degH * quad_pws.mult
    assert len(inter.t) == quad_pws.degH


def test_point_on_hypersurface(quad_pws):
    with pytest.raises(PointOnHypersurface):
        move_slice(quad_pws, SliceLine([2.0, 1.0], [0.3, 0.7]))   # h(2, 1) = 0


def test_tangent_line_collides(quad_pws):
    # b = a - 1 touches a^2 = 4b at (2, 1): h(t, t - 1) = (t - 2)^2.  Two witness
    # paths meet at the double root, which surfaces as a collision or a path failure.
    with pytest.raises((TCollision, PathFailure)):
        move_slice(quad_pws, SliceLine([0.0, -1.0], [1.0, 1.0]))


def test_circle_squared_not_reduced():
    pws = initial_pseudo_witness(get_fixture("circle-squared").system, rng=np.random.default_rng(0))
    ok, ranks = check_reduced(pws)
    assert not ok
    assert all(r == 0 for r in ranks)
    assert not pws.reduced
    with pytest.raises(NonReducedWitnessSet):
        move_slice(pws, EXAMPLE_LINE)


def test_serialization_round_trip(quad_pws):
    data = json.loads(json.dumps(quad_pws.to_dict()))
    back = PseudoWitnessSet.from_dict(data)
    assert back.system == quad_pws.system
    assert (back.degH, back.mult, back.reduced) == (quad_pws.degH, quad_pws.mult, quad_pws.reduced)
    np.testing.assert_array_equal(back.points, quad_pws.points)
    np.testing.assert_array_equal(back.line.direction, quad_pws.line.direction)


def test_kuramoto_degree():
    pws = initial_pseudo_witness(get_fixture("kuramoto").system, rng=np.random.default_rng(11))
    assert pws.degH == 12
    assert pws.mult == 1
    assert pws.reduced


def test_conjugation_closure_on_real_lines():
    pws = initial_pseudo_witness(get_fixture("kuramoto").system, rng=np.random.default_rng(12))
    rng = np.random.default_rng(13)
    for _ in range(3):
        p = rng.uniform(-0.5, 0.5, 2)
        b = rng.standard_normal(2)
        t = move_slice(pws, SliceLine(p, b / np.linalg.norm(b)), rng=rng).t
        assert abs(np.sum(1 / t).imag) < 1e-9
        for tj in t:
            assert np.min(np.abs(np.conj(tj) - t)) < 1e-8 * (1 + abs(tj))
