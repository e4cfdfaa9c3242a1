import numpy as np
import pytest

from hopflab import geometry as geo
from hopflab import operator as opm
from hopflab.geometry import Annulus, Ball, Box, Implicit


def test_ball_distance_and_membership():
    dom = Ball((0.0, 0.0), 1.0)
    x = np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(geo.delta_D(dom, x), [1.0, 0.5, 0.0])
    assert list(dom.contains(x)) == [True, True, False]


def test_box_and_annulus_distance():
    box = Box((-1.0, -1.0), (1.0, 2.0))
    np.testing.assert_allclose(geo.delta_D(box, [[0.0, 0.0]]), [1.0])
    ann = Annulus((0.0, 0.0), 0.5, 1.0)
    np.testing.assert_allclose(geo.delta_D(ann, [[0.75, 0.0], [0.0, 0.0]]), [0.25, 0.0])


def test_shrink_and_empty():
    assert geo.shrink(Ball((0.0,), 1.0), 0.25).radius == pytest.approx(0.75)
    assert Ball((0.0,), 0.0).is_empty
    assert not Implicit("twin-cusp").is_empty


def test_interior_ball_on_box_face_and_corner():
    box = Box((-1.0, -1.0), (1.0, 1.0))
    assert geo.interior_ball_radius(box, [1.0, 0.0]) == pytest.approx(1.0)
    assert geo.interior_ball_radius(box, [1.0, 0.8]) == pytest.approx(0.2)
    assert geo.interior_ball_radius(box, [1.0, 1.0]) == 0.0


def test_generalized_normal_of_ball():
    n = geo.generalized_normals(Ball((0.0, 0.0), 1.0), [0.0, 1.0])
    np.testing.assert_allclose(n, [[0.0, 1.0]], atol=1e-12)


def test_exterior_ball_of_ball():
    c, r = geo.exterior_ball(Ball((0.0, 0.0), 1.0), [1.0, 0.0])
    np.testing.assert_allclose(c, [2.0, 0.0])
    assert r == 1.0


def test_lower_normal_derivative_of_square():
    # u = |x|^2 at (1, 0) along n = e1: (1 - (1-h)^2)/h = 2 - h, smallest at h_max
    nd = geo.lower_normal_derivative(lambda p: np.sum(p ** 2, axis=1), [1.0, 0.0], [1.0, 0.0], 1e-3, 0.1)
    assert nd.value == pytest.approx(1.9)
    assert nd.hs[0] == pytest.approx(0.1)


def test_reachable_set_for_atomic_kernel():
    dom = Box((-1.0,), (1.0,))
    kern = opm.two_point_jump(1, size=3.0).kernel
    z = np.array([[0.0], [2.5], [1.5]])
    assert list(geo.reachable_set_contains(dom, kern, z)) == [True, True, False]


def test_domain_from_dict_errors():
    with pytest.raises(opm.ContractError):
        geo.domain_from_dict({"variant": "torus"})
    dom = geo.domain_from_dict({"variant": "ball", "center": [0, 0], "radius": 2})
    assert dom.dim == 2 and dom.diameter() == pytest.approx(4 * np.sqrt(2))
