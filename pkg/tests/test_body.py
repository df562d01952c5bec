import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from centroaffine.body import (
    ConvexBody,
    ball,
    body_from_json,
    body_to_json,
    boundary_point,
    centro_affine_curvature,
    curvature_function,
    ellipsoid,
    linear_image,
    load_body,
    mixed_curvature,
    mixed_volume,
    polar_body,
    polar_volume,
    save_body,
    validate,
    volume,
)
from centroaffine.errors import DetNotOne, DomainError, InvalidBody, NumericsError
from centroaffine.harness import BodySpec, random_body, random_sl
from centroaffine.spherical import ScalarField, make_grid

G256 = make_grid(2, 256)
G512 = make_grid(2, 512)
G3 = make_grid(3, 32, 64)


def circle_body(values_fn, grid=G256):
    return ConvexBody(grid, values_fn(grid.theta))


class TestValidate:
    def test_unit_ball(self):
        rep = validate(ball(G256))
        assert rep.ok and rep.min_eig == pytest.approx(1.0, abs=1e-12)
        assert rep.failing_node is None

    def test_concave_dent_rejected(self):
        rep = validate(circle_body(lambda t: 1 + 0.5 * np.cos(2 * t)))
        assert not rep.ok
        assert rep.min_eig == pytest.approx(-0.5, abs=1e-9)
        assert rep.failing_node is not None

    def test_mild_perturbation_accepted(self):
        assert validate(circle_body(lambda t: 1 + 0.1 * np.cos(3 * t))).ok

    def test_origin_outside_rejected(self):
        rep = validate(circle_body(lambda t: 0.5 + 0.8 * np.cos(t)))
        assert not rep.ok and rep.min_h < 0

    def test_operations_refuse_invalid_body(self):
        bad = circle_body(lambda t: 1 + 0.5 * np.cos(2 * t))
        for op in (volume, polar_volume, curvature_function, centro_affine_curvature, polar_body):
            with pytest.raises(InvalidBody):
                op(bad)

    def test_nonfinite_support(self):
        with pytest.raises(NumericsError):
            ConvexBody(G256, np.full(G256.size, np.inf))

    def test_sphere_ball(self):
        rep = validate(ball(G3, 2.0))
        assert rep.ok and rep.min_eig == pytest.approx(2.0, rel=1e-10)


class TestCurvature:
    def test_unit_ball(self):
        assert np.allclose(curvature_function(ball(G256)).values, 1.0, atol=1e-12)

    def test_ellipse_vertex(self):
        f = curvature_function(ellipsoid(G256, [2, 1])).values
        assert f[0] == pytest.approx(0.5, rel=1e-10)

    @pytest.mark.parametrize("grid,n", [(G256, 2), (G3, 3)])
    def test_ball_radius(self, grid, n):
        assert np.allclose(curvature_function(ball(grid, 1.7)).values, 1.7 ** (n - 1), rtol=1e-10)

    def test_affine_curvature_circle(self):
        assert np.allclose(centro_affine_curvature(ball(G256, 1.5)).values, 1.5**-4, rtol=1e-10)
        assert np.allclose(centro_affine_curvature(ball(G256)).values, 1.0, rtol=1e-12)

    def test_affine_curvature_constant_on_centered_ellipse(self):
        k = centro_affine_curvature(ellipsoid(G256, [2, 1])).values
        assert np.ptp(k) <= 1e-8
        assert k.mean() == pytest.approx(0.25, rel=1e-9)

    def test_affine_curvature_constant_on_ellipsoid(self):
        k = centro_affine_curvature(ellipsoid(G3, [1.5, 1.0, 0.8])).values
        assert np.ptp(k) / k.mean() <= 1e-6
        assert k.mean() == pytest.approx((1.5 * 0.8) ** -2, rel=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.3, 3.0), st.integers(0, 50))
    def test_scaling_law(self, lam, trial):
        body = random_body(11, trial, BodySpec(resolution=(256,)))
        scaled = ConvexBody(body.grid, lam * body.h)
        assert volume(scaled) == pytest.approx(lam**2 * volume(body), rel=1e-12)
        ratio = scaled.kappa / body.kappa
        assert np.max(np.abs(ratio * lam**4 - 1)) <= 1e-9


class TestVolumes:
    def test_unit_disk(self):
        assert volume(ball(G256)) == pytest.approx(math.pi, rel=1e-14)
        assert polar_volume(ball(G256)) == pytest.approx(math.pi, rel=1e-14)

    def test_ellipse(self):
        e = ellipsoid(G256, [2, 1])
        assert abs(volume(e) / (2 * math.pi) - 1) <= 1e-8
        assert polar_volume(e) == pytest.approx(math.pi / 2, rel=1e-8)

    def test_ball_3d(self):
        assert volume(ball(G3, 1.3)) == pytest.approx(4 / 3 * math.pi * 1.3**3, rel=1e-10)

    def test_circle_radius_two_polar(self):
        assert polar_volume(ball(G256, 2.0)) == pytest.approx(math.pi / 4, rel=1e-13)

    @pytest.mark.parametrize("trial", range(4))
    def test_santalo_symmetric(self, trial):
        body = random_body(3, trial, BodySpec(symmetrize=True, amplitude=0.01))
        assert volume(body) * polar_volume(body) <= math.pi**2 + 1e-6

    def test_santalo_equality_on_ellipse(self):
        e = ellipsoid(G512, [1.7, 0.4])
        assert volume(e) * polar_volume(e) == pytest.approx(math.pi**2, rel=1e-8)


class TestBoundaryPoint:
    def test_unit_ball(self):
        u = np.array([0.6, 0.8])
        assert np.allclose(boundary_point(ball(G256), u), u, atol=1e-13)

    def test_translated_ball(self):
        body = circle_body(lambda t: 1 + 0.2 * np.cos(t))
        for th in (0.0, 0.7, 2.9):
            x = boundary_point(body, [math.cos(th), math.sin(th)])
            assert np.allclose(x, [math.cos(th) + 0.2, math.sin(th)], atol=1e-12)

    def test_ellipse_vertex(self):
        assert np.allclose(boundary_point(ellipsoid(G256, [2, 1]), [1.0, 0.0]), [2.0, 0.0], atol=1e-12)

    def test_ellipsoid_pole(self):
        # a 4:1 ellipsoid needs more than 32x64 nodes to resolve h to 1e-9
        x = boundary_point(ellipsoid(make_grid(3, 96, 192), [2, 1, 0.5]), [0.0, 0.0, 1.0])
        assert np.allclose(x, [0, 0, 0.5], atol=1e-9)

    def test_ellipsoid_off_pole(self):
        v = np.array([0.3, -0.4, 0.5])
        v /= np.linalg.norm(v)
        x = boundary_point(ellipsoid(G3, [1.5, 1, 0.75]), v)
        d = np.array([1.5, 1, 0.75]) ** 2
        want = d * v / math.sqrt(np.sum(d * v * v))
        assert np.allclose(x, want, atol=1e-8)


class TestPolar:
    def test_circle(self):
        assert np.allclose(polar_body(ball(G256, 2.0)).h, 0.5, atol=1e-14)

    @pytest.mark.parametrize("axes", [(2, 1), (3, 1 / 3)])
    def test_ellipse(self, axes):
        got = polar_body(ellipsoid(G512, axes)).h
        want = ellipsoid(G512, [1 / axes[0], 1 / axes[1]]).h
        assert np.max(np.abs(got - want)) <= 1e-9

    def test_ellipsoid_3d(self):
        got = polar_body(ellipsoid(G3, [1.5, 1.0, 0.8])).h
        want = ellipsoid(G3, [1 / 1.5, 1.0, 1 / 0.8]).h
        assert np.max(np.abs(got - want)) <= 1e-8

    @pytest.mark.parametrize("trial", range(3))
    def test_bipolar_and_volume(self, trial):
        body = random_body(8, trial, BodySpec())
        pol = polar_body(body)
        assert volume(pol) == pytest.approx(polar_volume(body), rel=1e-6)
        assert np.max(np.abs(polar_body(pol).h - body.h)) <= 1e-6

    def test_bipolar_3d(self):
        body = random_body(8, 0, BodySpec(dim=3))
        pol = polar_body(body)
        assert volume(pol) == pytest.approx(polar_volume(body), rel=1e-6)
        assert np.max(np.abs(polar_body(pol).h - body.h)) <= 1e-6


class TestMixed:
    def test_diagonal_is_curvature_function(self):
        body = random_body(1, 0, BodySpec(resolution=(256,)))
        assert np.allclose(mixed_curvature(body.support()).values, body.f, atol=1e-12)
        b3 = random_body(1, 0, BodySpec(dim=3))
        s = mixed_curvature(b3.support(), b3.support()).values
        assert np.allclose(s, b3.f, atol=1e-10)

    def test_constant(self):
        one = ScalarField(G256, np.ones(G256.size))
        assert np.allclose(mixed_curvature(one).values, 1.0)

    def test_sphere_one_and_ball(self):
        one = ScalarField(G3, np.ones(G3.size))
        assert np.allclose(mixed_curvature(one, ball(G3).support()).values, 1.0, atol=1e-11)

    def test_volume_diagonal(self):
        body = random_body(2, 0, BodySpec(resolution=(256,)))
        assert mixed_volume(body.support(), body.support()) == pytest.approx(volume(body), rel=1e-13)
        b3 = random_body(2, 0, BodySpec(dim=3))
        s = b3.support()
        assert mixed_volume(s, s, s) == pytest.approx(volume(b3), rel=1e-12)

    def test_half_perimeter(self):
        one = ScalarField(G256, np.ones(G256.size))
        assert mixed_volume(one, ball(G256, 1.3).support()) == pytest.approx(math.pi * 1.3, rel=1e-13)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 100), st.integers(0, 100))
    def test_symmetry_and_linearity(self, i, j):
        spec = BodySpec(resolution=(256,))
        f, g = random_body(4, i, spec).support(), random_body(5, j, spec).support()
        assert abs(mixed_volume(f, g) - mixed_volume(g, f)) <= 1e-10
        s3 = BodySpec(dim=3, resolution=(12, 24))
        a, b, c = (random_body(6, k, s3).support() for k in (i, j, i + j + 1))
        ab = mixed_curvature(a, b).values
        assert np.max(np.abs(ab - mixed_curvature(b, a).values)) <= 1e-10
        lin = mixed_curvature(ScalarField(a.grid, 2 * a.values + c.values), b).values
        assert np.max(np.abs(lin - 2 * ab - mixed_curvature(c, b).values)) <= 1e-10

    def test_grid_mismatch(self):
        with pytest.raises(DomainError):
            mixed_volume(ball(G256).support(), ball(G512).support())


class TestLinearImage:
    def test_identity(self):
        body = random_body(9, 0, BodySpec())
        assert np.allclose(linear_image(body, np.eye(2)).h, body.h, atol=1e-14)

    def test_diag_stretch(self):
        got = linear_image(ball(G256), np.diag([2.0, 0.5])).h
        assert np.max(np.abs(got - ellipsoid(G256, [2, 0.5]).h)) <= 1e-12

    def test_det_not_one(self):
        with pytest.raises(DetNotOne):
            linear_image(ball(G256), np.diag([2.0, 1.0]))

    @pytest.mark.parametrize("trial", range(5))
    def test_volume_invariance(self, trial):
        body = random_body(10, trial, BodySpec())
        a = random_sl(10, trial, 2, 3.0)
        img = linear_image(body, a)
        assert volume(img) == pytest.approx(volume(body), rel=1e-6)
        # extremes over the whole circle, from the trigonometric interpolant
        dense = np.linspace(0, 2 * math.pi, 8 * body.grid.size, endpoint=False)
        pts = np.column_stack([np.cos(dense), np.sin(dense)])
        k0 = body.grid.interpolate(body.kappa, pts)
        k1 = body.grid.interpolate(img.kappa, pts)
        assert k1.min() == pytest.approx(k0.min(), rel=1e-5)
        assert k1.max() == pytest.approx(k0.max(), rel=1e-5)

    def test_sl3(self):
        body = random_body(10, 0, BodySpec(dim=3))
        img = linear_image(body, random_sl(10, 0, 3, 2.0))
        assert volume(img) == pytest.approx(volume(body), rel=1e-6)


class TestJson:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_round_trip_bit_exact(self, dim, tmp_path):
        body = random_body(12, 0, BodySpec(dim=dim))
        path = tmp_path / "b.json"
        save_body(body, path)
        back = load_body(path)
        assert back.grid == body.grid
        assert np.array_equal(back.h, body.h)
        assert validate(back) == validate(body)

    def test_format(self):
        obj = json.loads(body_to_json(ellipsoid(G256, [2, 1])))
        assert obj["dim"] == 2
        assert obj["grid"] == {"type": "uniform_angle", "m": 256}
        assert len(obj["h"]) == 256
        obj3 = json.loads(body_to_json(ball(G3)))
        assert obj3["grid"] == {"type": "gauss_fourier", "n_theta": 32, "n_phi": 64}

    def test_bad_grid_type(self):
        with pytest.raises(DomainError):
            body_from_json('{"dim": 2, "grid": {"type": "hex"}, "h": [1, 1]}')
