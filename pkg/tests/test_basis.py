import math

import numpy as np
import pytest

from alefv import basis as B


def exact_monomial_integral(a, b):
    # int over T_e of xi^a eta^b = a! b! / (a+b+2)!
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def duffy_rule(n):
    """Independent tensor rule on T_e built from raw Gauss-Legendre points."""
    x, w = np.polynomial.legendre.leggauss(n)
    u, wu = 0.5 * (x + 1.0), 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    pts = np.column_stack([(U * (1 - V)).ravel(), V.ravel()])
    wts = (wu[:, None] * wu[None, :] * (1 - V)).ravel()
    return pts, wts


class TestTriangleRule:
    def test_degree0_is_centroid(self):
        r = B.make_triangle_rule(0)
        assert len(r.weights) == 1
        assert np.allclose(r.points[0], [1 / 3, 1 / 3])
        assert np.isclose(r.weights[0], 0.5)

    @pytest.mark.parametrize("deg", range(0, 13))
    def test_weights_sum_to_area(self, deg):
        r = B.make_triangle_rule(deg)
        assert abs(r.weights.sum() - 0.5) < 1e-14

    @pytest.mark.parametrize("deg", [3, 4, 6, 8, 10])
    def test_monomial_exactness(self, deg):
        r = B.make_triangle_rule(deg)
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                got = (r.weights * r.points[:, 0] ** a * r.points[:, 1] ** b).sum()
                assert abs(got - exact_monomial_integral(a, b)) < 1e-13

    def test_xi2eta_at_degree3(self):
        r = B.make_triangle_rule(3)
        got = (r.weights * r.points[:, 0] ** 2 * r.points[:, 1]).sum()
        assert abs(got - 1.0 / 60.0) < 1e-15

    def test_unsupported_degree(self):
        with pytest.raises(B.UnsupportedDegreeError):
            B.make_triangle_rule(B.MAX_QUAD_DEGREE + 1)


class TestSpatialBasis:
    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_first_function_constant(self, M):
        sb = B.get_spatial_basis(M)
        rng = np.random.default_rng(0)
        pts = rng.random((30, 2)) * 0.5
        vals = sb.eval(1, pts)
        assert np.allclose(vals, vals[0])

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_orthogonality(self, M):
        sb = B.get_spatial_basis(M)
        r = B.make_triangle_rule(2 * M)
        v = sb.eval_all(r.points)
        G = np.einsum("q,ql,qm->lm", r.weights, v, v)
        off = G - np.diag(np.diag(G))
        assert np.max(np.abs(off)) < 1e-13
        assert np.all(np.diag(G) > 0)

    def test_psi3_squared_integral_against_fine_quadrature(self):
        # oracle: 50-point-class independent Duffy rule
        sb = B.get_spatial_basis(2)
        pts, wts = duffy_rule(8)    # 64 points, plenty for degree 4
        oracle = (wts * sb.eval(3, pts) ** 2).sum()
        assert oracle > 0
        assert abs(sb.mode_mass[2] - oracle) < 1e-14

    def test_index_out_of_range(self):
        sb = B.get_spatial_basis(2)
        with pytest.raises(IndexError):
            sb.eval(0, np.array([[0.2, 0.2]]))
        with pytest.raises(IndexError):
            sb.eval(sb.dof_count + 1, np.array([[0.2, 0.2]]))

    def test_gradient_against_finite_differences(self):
        sb = B.get_spatial_basis(3)
        rng = np.random.default_rng(1)
        pts = rng.random((20, 2)) * 0.4 + 0.05
        g = sb.grad_all(pts)
        h = 1e-6
        for d in range(2):
            dp = np.zeros(2); dp[d] = h
            fd = (sb.eval_all(pts + dp) - sb.eval_all(pts - dp)) / (2 * h)
            assert np.max(np.abs(fd - g[..., d])) < 1e-6


class TestOscillationMatrix:
    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_constant_annihilated(self, M):
        sigma = B.build_oscillation_matrix(M)
        w = np.zeros(B.dof_count(M)); w[0] = 3.7
        assert w @ sigma @ w == 0.0
        assert np.max(np.abs(sigma[0, :])) == 0.0
        assert np.max(np.abs(sigma[:, 0])) == 0.0

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_symmetric_psd(self, M):
        sigma = B.build_oscillation_matrix(M)
        assert np.max(np.abs(sigma - sigma.T)) == 0.0
        assert np.linalg.eigvalsh(sigma).min() > -1e-12

    def test_linear_mode_indicator_against_brute_force(self, ):
        # oracle: finite-difference derivatives + fine quadrature of the
        # defining derivative-product sum, for the fixed linear mode psi_2
        M = 2
        sb = B.get_spatial_basis(M)
        sigma = B.build_oscillation_matrix(M)
        w = np.zeros(sb.dof_count); w[1] = 1.0
        got = w @ sigma @ w

        pts, wts = duffy_rule(10)
        h = 1e-5
        oracle = 0.0
        for a in range(M + 1):
            for b in range(M + 1 - a):
                if a + b < 1:
                    continue
                # central finite differences of psi_2 of order (a, b)
                vals = np.zeros(len(pts))
                for ia in range(a + 1):
                    for ib in range(b + 1):
                        coef = ((-1) ** (ia + ib) * math.comb(a, ia) * math.comb(b, ib))
                        shift = np.array([(a / 2 - ia) * h, (b / 2 - ib) * h])
                        vals += coef * sb.eval(2, pts + shift)
                vals /= h ** (a + b)
                oracle += (wts * vals ** 2).sum()
        assert oracle > 0
        assert abs(got - oracle) < 1e-5 * max(1.0, oracle)


class TestSpaceTimeBasis:
    def test_dof_count_M1(self):
        st = B.get_spacetime_basis(1)
        assert st.dof_count == 6

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_nodal_delta_property(self, M):
        st = B.get_spacetime_basis(M)
        vals = st.eval_theta(st.nodes)
        assert np.max(np.abs(vals - np.eye(st.dof_count))) < 1e-12

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_partition_of_unity(self, M):
        st = B.get_spacetime_basis(M)
        rng = np.random.default_rng(2)
        pts = np.column_stack([rng.random(20) * 0.45, rng.random(20) * 0.45, rng.random(20)])
        s = st.eval_theta(pts).sum(axis=-1)
        assert np.max(np.abs(s - 1.0)) < 1e-12

    def test_interpolates_xi_eta_tau_product(self):
        # oracle: direct evaluation of the polynomial xi*eta*tau
        st = B.get_spacetime_basis(2)
        f = st.nodes[:, 0] * st.nodes[:, 1] * st.nodes[:, 2]
        rng = np.random.default_rng(3)
        pts = np.column_stack([rng.random(40) * 0.4, rng.random(40) * 0.4, rng.random(40)])
        got = st.eval_theta(pts) @ f
        exact = pts[:, 0] * pts[:, 1] * pts[:, 2]
        assert np.max(np.abs(got - exact)) < 1e-12

    def test_range_check(self):
        with pytest.raises(B.UnsupportedDegreeError):
            B.get_spacetime_basis(4)


class TestSpaceTimeMatrices:
    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_constant_fixed_point(self, M):
        um = B.build_spacetime_matrices(M)
        w = np.zeros(B.dof_count(M)); w[0] = 2.5
        qhat = um.K1inv_F0 @ w
        # psi_1 is the constant 1, so the space-time field must equal 2.5
        assert np.max(np.abs(qhat - 2.5)) < 1e-12

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_mass_matrix_spd(self, M):
        um = B.build_spacetime_matrices(M)
        assert np.max(np.abs(um.M_mass - um.M_mass.T)) < 1e-14
        assert np.linalg.eigvalsh(um.M_mass).min() > 0

    def test_theta1_mass_entry_against_tensor_quadrature(self):
        # oracle: independent degree-4 tensor quadrature over T_e x [0,1]
        um = B.build_spacetime_matrices(1)
        st = B.get_spacetime_basis(1)
        pts2, wts2 = duffy_rule(4)
        tg, twg = np.polynomial.legendre.leggauss(4)
        tg, twg = 0.5 * (tg + 1), 0.5 * twg
        acc = 0.0
        for t, wt in zip(tg, twg):
            p = np.column_stack([pts2, np.full(len(pts2), t)])
            th = st.eval_theta(p)[:, 0]
            acc += wt * (wts2 * th * th).sum()
        assert abs(um.M_mass[0, 0] - acc) < 1e-14

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_K1_invertible(self, M):
        um = B.build_spacetime_matrices(M)
        r = np.max(np.abs(um.K1 @ um.K1_inv - np.eye(um.K1.shape[0])))
        assert r < 1e-10
