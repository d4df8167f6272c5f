"""Loop field values, analytic references, symmetries, and offsets."""

import numpy as np
import pytest

from knotfield import (
    DegenerateDirectionError,
    FieldParams,
    InvalidParameterError,
    SingularityError,
    field,
    field_planar,
    fit_plane_frame,
    flux_magnitude,
    make_circle,
    offset,
    offset_planar,
)

P = FieldParams()


def analytic_on_axis(radius, z, scale_c=1.0):
    # continuum circular loop on its axis: B_z = 2*pi*R^2 / (R^2 + z^2)^(3/2)
    return scale_c * 2.0 * np.pi * radius**2 / (radius**2 + z**2) ** 1.5


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


class TestAnalyticReference:
    def test_center_of_unit_circle(self):
        loop = make_circle(1.0, 0.1)
        b = field(loop, (0.0, 0.0, 0.0), P)
        assert abs(b[2] - 2.0 * np.pi) / (2.0 * np.pi) < 5e-3
        assert np.allclose(b[:2], 0.0, atol=1e-12)

    @pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
    def test_on_axis_samples(self, z):
        loop = make_circle(1.0, 0.1)
        b = field(loop, (0.0, 0.0, z), P)
        ref = analytic_on_axis(1.0, z)
        assert abs(b[2] - ref) / ref < 5e-3

    def test_scale_c_is_linear(self):
        loop = make_circle(1.0, 0.1)
        b1 = field(loop, (0.1, 0.2, 0.5), FieldParams(scale_c=1.0))
        b3 = field(loop, (0.1, 0.2, 0.5), FieldParams(scale_c=3.0))
        assert np.allclose(b3, 3.0 * b1, rtol=1e-12)

    def test_second_order_convergence_under_step_halving(self):
        # midpoint rule: halving the angular step cuts the center-field
        # error by at least ~4x
        x = np.zeros(3)
        ref = 2.0 * np.pi
        errs = [abs(field(make_circle(1.0, h), x, P)[2] - ref)
                for h in (0.2, 0.1, 0.05)]
        assert errs[0] / errs[1] > 3.5
        assert errs[1] / errs[2] > 3.5


class TestSymmetries:
    N_CASES = 1000

    def test_orientation_antisymmetry(self):
        rng = np.random.default_rng(11)
        loop = make_circle(1.0, 0.1)
        for _ in range(self.N_CASES):
            x = rng.normal(scale=2.0, size=3)
            if abs(np.linalg.norm(x[:2]) - 1.0) < 0.05 and abs(x[2]) < 0.05:
                continue
            b = field(loop, x, P)
            assert np.allclose(field(loop.reversed(), x, P), -b, rtol=1e-9, atol=1e-12)

    def test_rigid_motion_equivariance(self):
        rng = np.random.default_rng(12)
        loop = make_circle(1.0, 0.1)
        for _ in range(self.N_CASES):
            rot = random_rotation(rng)
            t = rng.normal(size=3)
            x = rng.normal(scale=2.0, size=3)
            if abs(np.linalg.norm(x[:2]) - 1.0) < 0.05 and abs(x[2]) < 0.05:
                continue
            moved = loop.transformed(rot, t)
            assert np.allclose(field(moved, rot @ x + t, P),
                               rot @ field(loop, x, P), rtol=1e-9, atol=1e-10)

    def test_superposition_by_arc_splitting(self):
        # a loop traversed forward plus the shared chord both ways equals
        # the sum of the two sub-loops obtained by splitting along the chord
        rng = np.random.default_rng(13)
        loop = make_circle(1.0, 2 * np.pi / 36)
        v = loop.vertices
        lower = np.concatenate([v[:19]])          # arc through angle pi
        upper = np.concatenate([v[18:], v[:1]])   # remaining arc, closed back
        from knotfield import Loop
        a, b = Loop(lower), Loop(upper)
        for _ in range(self.N_CASES):
            x = rng.normal(scale=2.0, size=3) + np.array([0.0, 0.0, 1.5])
            total = field(a, x, P) + field(b, x, P)
            # the chord is traversed once in each direction; its two
            # midpoint contributions cancel exactly, leaving the full loop
            assert np.allclose(total, field(loop, x, P), rtol=1e-9, atol=1e-10)

    def test_offset_norm_is_gamma(self):
        rng = np.random.default_rng(14)
        loop = make_circle(1.0, 0.1)
        frame = fit_plane_frame(loop)
        for _ in range(self.N_CASES):
            x = rng.normal(scale=2.0, size=3)
            if abs(np.linalg.norm(x[:2]) - 1.0) < 0.05 and abs(x[2]) < 0.05:
                continue
            gamma = float(rng.uniform(0.001, 0.1))
            params = FieldParams(gamma=gamma, alpha=rng.uniform(0.1, 3),
                                 beta=rng.uniform(0.1, 3))
            assert np.linalg.norm(offset(loop, x, params)) == pytest.approx(gamma, rel=1e-12)
            assert np.linalg.norm(offset_planar(loop, frame, x, params)) == \
                pytest.approx(gamma, rel=1e-12)


class TestPlanarWeighting:
    def setup_method(self):
        self.loop = make_circle(1.0, 0.1)
        self.frame = fit_plane_frame(self.loop)

    def test_equal_weights_reduce_to_plain_field(self):
        x = np.array([0.4, -0.2, 0.8])
        b = field(self.loop, x, P)
        bw = field_planar(self.loop, self.frame, x, FieldParams(alpha=1.0, beta=1.0))
        assert np.allclose(bw, b, rtol=1e-12)

    def test_weights_scale_components(self):
        x = np.array([0.4, -0.2, 0.8])
        b = field(self.loop, x, P)
        bw = field_planar(self.loop, self.frame, x, FieldParams(alpha=2.0, beta=0.5))
        bn = (b @ self.frame.v_n) * self.frame.v_n
        assert np.allclose(bw, 2.0 * (b - bn) + 0.5 * bn, rtol=1e-12)

    def test_weighting_happens_before_normalization(self):
        # heavier alpha must actually tilt the *unit* step toward the plane,
        # which only happens if weights are applied before normalizing
        x = np.array([0.5, 0.0, 1.0])
        d1 = offset_planar(self.loop, self.frame, x, FieldParams(alpha=1.0, beta=1.0))
        d2 = offset_planar(self.loop, self.frame, x, FieldParams(alpha=3.0, beta=1.0))
        inplane = lambda d: np.linalg.norm(d - (d @ self.frame.v_n) * self.frame.v_n)
        assert inplane(d2) > inplane(d1)

    def test_beta_only_moves_along_normal(self):
        x = np.array([0.5, 0.0, 1.0])
        d = offset_planar(self.loop, self.frame, x, FieldParams(alpha=0.0, beta=1.0))
        assert np.allclose(np.cross(d, self.frame.v_n), 0.0, atol=1e-12)


class TestSingularities:
    def test_query_on_wire_rejected(self):
        loop = make_circle(1.0, 0.1)
        with pytest.raises(SingularityError):
            field(loop, loop.vertices[0], P)

    def test_query_near_wire_rejected(self):
        loop = make_circle(1.0, 0.1)
        x = loop.vertices[0] * (1.0 + 1e-9)
        with pytest.raises(SingularityError):
            field(loop, x, P)

    def test_flux_magnitude_positive_off_wire(self):
        loop = make_circle(1.0, 0.1)
        assert flux_magnitude(loop, (0.0, 0.0, 1.0), P) > 0.0

    def test_degenerate_direction_far_away(self):
        # far from the loop the field underflows the direction threshold
        loop = make_circle(1.0, 0.1)
        with pytest.raises(DegenerateDirectionError):
            offset(loop, (0.0, 0.0, 1e7), P)


class TestParams:
    @pytest.mark.parametrize("kw", [dict(gamma=0.0), dict(gamma=-1.0),
                                    dict(alpha=-0.1), dict(beta=-2.0),
                                    dict(alpha=0.0, beta=0.0)])
    def test_invalid_params(self, kw):
        with pytest.raises(InvalidParameterError):
            FieldParams(**kw)
