"""Tests for the projection calculus on cone products."""

import numpy as np
import pytest

from conestab import cones
from conestab.cones import (Cone, dir_deriv_fixed_point, dir_deriv_conditions,
                            smat, svec)


def random_cone(rng):
    """A single random primitive cone block of ambient dimension <= 15."""
    kind = rng.choice(["orthant", "soc", "psd"])
    if kind == "psd":
        size = int(rng.integers(2, 6))
    else:
        size = int(rng.integers(2, 6))
    return Cone([(kind, size)])


class TestSvec:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for n in range(1, 6):
            S = rng.standard_normal((n, n))
            S = S + S.T
            assert np.allclose(smat(svec(S)), S)

    def test_preserves_inner_product(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((4, 4))
        A = A + A.T
        B = rng.standard_normal((4, 4))
        B = B + B.T
        assert np.isclose(svec(A) @ svec(B), np.sum(A * B))

    def test_dimension(self):
        assert cones.svec_dim(2) == 3
        assert cones.svec_dim(5) == 15


class TestProject:
    def test_orthant_clips_negatives(self):
        cone = Cone([("orthant", 2)])
        assert np.allclose(cone.project(np.array([-1.0, 2.0])), [0.0, 2.0])

    def test_psd_offdiagonal(self):
        cone = Cone([("psd", 2)])
        z = svec(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(smat(cone.project(z)), 0.5 * np.ones((2, 2)))

    def test_soc_boundary_case(self):
        cone = Cone([("soc", 3)])
        assert np.allclose(cone.project(np.array([0.0, 1.0, 0.0])),
                           [0.5, 0.5, 0.0])

    def test_variational_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            cone = random_cone(rng)
            z = 2.0 * rng.standard_normal(cone.dim)
            A = cone.project(z)
            for _ in range(10):
                w = cone.project(2.0 * rng.standard_normal(cone.dim))
                assert (z - A) @ (w - A) <= 1e-10

    def test_nonexpansive(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            cone = random_cone(rng)
            u = rng.standard_normal(cone.dim)
            v = rng.standard_normal(cone.dim)
            assert (np.linalg.norm(cone.project(u) - cone.project(v))
                    <= np.linalg.norm(u - v) + 1e-12)

    def test_moreau_decomposition(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            cone = random_cone(rng)
            z = rng.standard_normal(cone.dim)
            p = cone.project(z)
            q = -cone.project(-z)
            assert np.allclose(p + q, z, atol=1e-10)
            assert abs(p @ (z - p)) <= 1e-10


class TestSpectralFrame:
    def test_psd_indefinite_diagonal(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        assert np.allclose(smat(f.a), np.diag([1.0, 0.0]))
        assert np.allclose(smat(f.b), np.diag([0.0, -1.0]))

    def test_psd_origin_is_all_boundary(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(np.zeros(3))
        assert np.allclose(f.a, 0.0)
        assert np.allclose(f.b, 0.0)

    def test_orthant_active_set(self):
        cone = Cone([("orthant", 2)])
        f = cone.frame(np.array([3.0, -2.0]))
        assert np.allclose(f.a, [3.0, 0.0])
        assert np.allclose(f.b, [0.0, -2.0])

    def test_decomposition_invariants(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            cone = random_cone(rng)
            c = 2.0 * rng.standard_normal(cone.dim)
            f = cone.frame(c)
            a, b = f.a, f.b
            assert np.allclose(a + b, c)
            assert cone.dist(a) <= 1e-10
            assert abs(a @ b) <= 1e-10 * max(1.0, a @ a + b @ b)
            # b in the polar cone: projection onto K of b is zero
            assert np.linalg.norm(cone.project(b)) <= 1e-8


class TestCriticalCone:
    def test_psd_rank_one_face(self):
        # A = diag(1,0), B = diag(0,-1): membership iff D22 = 0
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        ok = svec(np.array([[2.0, 1.0], [1.0, 0.0]]))
        bad = svec(np.array([[0.0, 0.0], [0.0, 1.0]]))
        assert f.cc_dist(ok) <= 1e-10
        assert f.cc_dist(bad) > 1e-3

    def test_orthant_pinned_coordinate(self):
        cone = Cone([("orthant", 2)])
        f = cone.frame(np.array([-1.0, 2.0]))
        assert f.cc_dist(np.array([0.0, -3.0])) <= 1e-12
        assert f.cc_dist(np.array([1.0, 0.0])) > 0.5

    def test_interior_point_gives_tangent_space(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.eye(2)))
        rng = np.random.default_rng(6)
        for _ in range(5):
            assert f.cc_dist(rng.standard_normal(3)) <= 1e-12

    def test_projection_is_idempotent_and_conic(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            h = rng.standard_normal(cone.dim)
            d = f.cc_project(h)
            assert np.allclose(f.cc_project(d), d, atol=1e-9)
            assert np.allclose(f.cc_project(2.5 * d), 2.5 * d, atol=1e-9)
            assert f.cc_dist(np.zeros(cone.dim)) <= 1e-12


class TestCriticalPolar:
    def test_psd_rank_one_face_polar(self):
        # critical cone {D : D22 = 0} has polar {S : S11 = S12 = 0, S22 <= 0}
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        assert f.polar_dist(svec(np.diag([0.0, -3.0]))) <= 1e-10
        assert f.polar_dist(svec(np.diag([1.0, 0.0]))) > 0.5

    def test_polar_of_full_space_is_zero(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.eye(2)))
        s = np.array([1.0, 0.0, 0.0])
        assert np.allclose(f.polar_project(s), 0.0)

    def test_polar_pairing_nonpositive(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            d = f.cc_project(rng.standard_normal(cone.dim))
            s = f.polar_project(rng.standard_normal(cone.dim))
            assert d @ s <= 1e-9

    def test_polar_of_polar_recovers_cone_samples(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            d = f.cc_project(rng.standard_normal(cone.dim))
            # d maximizes <d, s> = 0 over the polar, so it survives the
            # double-polar test: <d, s> <= 0 for all sampled polar s
            for _ in range(10):
                s = f.polar_project(rng.standard_normal(cone.dim))
                assert d @ s <= 1e-9


class TestDirDeriv:
    def test_psd_offdiagonal_direction(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        h = svec(np.array([[0.0, 1.0], [1.0, 0.0]]))
        got = smat(f.dir_deriv(h))
        assert np.allclose(got, [[0.0, 0.5], [0.5, 0.0]])

    def test_identity_on_interior(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.eye(2)))
        h = np.array([0.3, -1.0, 2.0])
        assert np.allclose(f.dir_deriv(h), h)

    def test_zero_on_polar_interior(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(-np.eye(2)))
        h = np.array([0.3, -1.0, 2.0])
        assert np.allclose(f.dir_deriv(h), 0.0)

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(10)
        t = 1e-6
        for _ in range(60):
            cone = random_cone(rng)
            c = rng.standard_normal(cone.dim)
            f = cone.frame(c)
            h = rng.standard_normal(cone.dim)
            fd = (cone.project(c + t * h) - cone.project(c)) / t
            assert (np.linalg.norm(f.dir_deriv(h) - fd)
                    <= 10.0 * t * max(1.0, h @ h))

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            h = rng.standard_normal(cone.dim)
            for t in (0.5, 2.0, 7.25):
                assert np.allclose(f.dir_deriv(t * h), t * f.dir_deriv(h),
                                   atol=1e-10)

    def test_variational_characterization(self):
        # the output minimizes ||d - h||^2 + upsilon(d) over the critical cone
        rng = np.random.default_rng(12)
        for _ in range(10):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            h = rng.standard_normal(cone.dim)
            d = f.dir_deriv(h)
            val = float((d - h) @ (d - h)) + f.upsilon(d)
            for _ in range(200):
                w = f.cc_sample(rng)
                trial = float((w - h) @ (w - h)) + f.upsilon(w)
                assert val <= trial + 1e-8

    def test_euler_identity(self):
        # positively homogeneous piecewise linear maps satisfy J(h) h = D(h)
        rng = np.random.default_rng(13)
        for _ in range(30):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            h = rng.standard_normal(cone.dim)
            J = f.dir_deriv_jac(h)
            assert np.allclose(J @ h, f.dir_deriv(h), atol=1e-8)


class TestUpsilon:
    def test_psd_rank_one_face_value(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        d = svec(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.isclose(f.upsilon(d), 2.0)

    def test_zero_direction(self):
        cone = Cone([("psd", 3)])
        f = cone.frame(np.random.default_rng(14).standard_normal(6))
        assert f.upsilon(np.zeros(6)) == 0.0

    def test_polyhedral_blocks_contribute_nothing(self):
        cone = Cone([("orthant", 3)])
        f = cone.frame(np.array([1.0, -2.0, 0.0]))
        d = f.cc_project(np.array([0.5, 0.0, 1.0]))
        assert f.upsilon(d) == 0.0

    def test_rejects_noncritical_direction(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        with pytest.raises(ValueError):
            f.upsilon(svec(np.diag([0.0, 1.0])))

    def test_copositive_and_quadratic(self):
        rng = np.random.default_rng(15)
        for _ in range(40):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            d = f.cc_sample(rng)
            u = f.upsilon(d)
            assert u >= -1e-10 * max(1.0, d @ d)
            assert np.isclose(f.upsilon(3.0 * d), 9.0 * u, atol=1e-9)

    def test_gradient_pairing(self):
        # upsilon(d) = <d, grad upsilon(d)> / 2 for the quadratic form
        rng = np.random.default_rng(16)
        for _ in range(30):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            d = f.cc_sample(rng)
            assert np.isclose(f.upsilon(d), 0.5 * d @ f.upsilon_grad(d),
                              atol=1e-9)


class TestFixedPointCharacterization:
    def test_zero_direction_with_polar_offset(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        dA = np.zeros(3)
        dB = f.polar_project(svec(np.diag([-1.0, -2.0])))
        assert dir_deriv_conditions(f, dA, dB) == (True, True, True)
        assert dir_deriv_fixed_point(f, dA, dB)

    def test_face_direction_with_zero_offset(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        dA = svec(np.diag([1.0, 0.0]))
        dB = np.zeros(3)
        assert dir_deriv_conditions(f, dA, dB) == (True, True, True)
        assert dir_deriv_fixed_point(f, dA, dB)

    def test_noncritical_direction_fails_first_condition(self):
        cone = Cone([("psd", 2)])
        f = cone.frame(svec(np.diag([1.0, -1.0])))
        dA = svec(np.diag([0.0, 1.0]))
        assert dir_deriv_conditions(f, dA, np.zeros(3))[0] is False

    def test_equivalence_random(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            cone = random_cone(rng)
            f = cone.frame(rng.standard_normal(cone.dim))
            dA = rng.standard_normal(cone.dim)
            dB = rng.standard_normal(cone.dim)
            if rng.random() < 0.5:
                # bias toward satisfying pairs, which are measure zero
                d = f.dir_deriv(dA + dB)
                dA, dB = d, dA + dB - d
            conj = all(dir_deriv_conditions(f, dA, dB))
            assert conj == dir_deriv_fixed_point(f, dA, dB)


class TestConeContainer:
    def test_split_and_dim(self):
        cone = Cone([("orthant", 1), ("psd", 2)])
        assert cone.dim == 4
        parts = cone.split(np.arange(4.0))
        assert np.allclose(parts[0], [0.0])
        assert np.allclose(parts[1], [1.0, 2.0, 3.0])

    def test_spec_round_trip(self):
        cone = Cone([("zero", 2), ("orthant", 1), ("soc", 3), ("psd", 2)])
        again = Cone.from_spec(cone.to_spec())
        assert again.dim == cone.dim
        assert [(b.kind, b.size) for b in again.blocks] == \
            [(b.kind, b.size) for b in cone.blocks]

    def test_zero_block_projects_to_origin(self):
        cone = Cone([("zero", 2)])
        assert np.allclose(cone.project(np.array([1.0, -3.0])), 0.0)
