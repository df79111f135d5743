"""Reference-element machinery.

Everything here lives on the unit triangle T_e with vertices (0,0), (1,0),
(0,1) and on the space-time reference prism T_e x [0,1].  The module provides

* Gaussian quadrature on the triangle (conical product rules) and on [0,1],
* the orthogonal modal basis used by the WENO reconstruction,
* the nodal space-time basis used by the local predictor,
* the universal matrices (oscillation indicator, K1, F0, mass matrix) that
  the rest of the solver consumes.

All objects are immutable after construction and cached per degree, so they
are safe to share between any number of workers.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import eval_jacobi, roots_jacobi

MAX_DEGREE_M = 3          # highest supported polynomial degree (4th order scheme)
MAX_QUAD_DEGREE = 30      # conical-product rule table limit

TE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class UnsupportedDegreeError(ValueError):
    """Requested quadrature or basis degree is above the implemented range."""


def dof_count(M):
    """Number of modes of a bivariate polynomial of total degree M."""
    return (M + 1) * (M + 2) // 2


def gauss_legendre_01(n):
    """n-point Gauss-Legendre rule on [0,1]; exact for degree 2n-1."""
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points/weights on a reference domain."""
    points: np.ndarray   # (n, dim)
    weights: np.ndarray  # (n,)
    degree: int          # exact for polynomials up to this total degree


@lru_cache(maxsize=None)
def make_triangle_rule(exactness_degree):
    """Conical product Gauss rule on T_e, exact for total degree <= requested.

    Built from Gauss-Legendre in the collapsed u-direction and Gauss-Jacobi
    (weight 1-v) in v; all weights are positive and sum to |T_e| = 1/2.
    """
    if exactness_degree < 0:
        raise UnsupportedDegreeError("quadrature degree must be >= 0")
    if exactness_degree > MAX_QUAD_DEGREE:
        raise UnsupportedDegreeError(
            f"triangle rule of degree {exactness_degree} exceeds the table "
            f"limit {MAX_QUAD_DEGREE}")
    n = max(1, (exactness_degree + 2) // 2)
    u, wu = gauss_legendre_01(n)
    xj, wj = roots_jacobi(n, 1.0, 0.0)          # weight (1-x) on [-1,1]
    v = 0.5 * (xj + 1.0)
    wv = 0.25 * wj
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([(uu * (1.0 - vv)).ravel(), vv.ravel()])
    w = (wu[:, None] * wv[None, :]).ravel()
    return QuadratureRule(points=pts, weights=w, degree=exactness_degree)


def monomial_exponents(M):
    """Graded list of (a, b) exponents with a+b <= M."""
    return [(d - k, k) for d in range(M + 1) for k in range(d + 1)]


def eval_monomials(exps, pts):
    """Evaluate monomials xi^a eta^b at pts (n,2) -> (n, len(exps))."""
    pts = np.asarray(pts, dtype=float)
    xi, eta = pts[..., 0], pts[..., 1]
    out = np.empty(pts.shape[:-1] + (len(exps),))
    for k, (a, b) in enumerate(exps):
        out[..., k] = xi ** a * eta ** b
    return out


def monomial_derivative(exps, coeffs, which):
    """Differentiate a coefficient array (..., n_mono) along xi (0) or eta (1)."""
    index = {e: k for k, e in enumerate(exps)}
    out = np.zeros_like(coeffs)
    for k, (a, b) in enumerate(exps):
        if which == 0 and a > 0:
            out[..., index[(a - 1, b)]] += a * coeffs[..., k]
        elif which == 1 and b > 0:
            out[..., index[(a, b - 1)]] += b * coeffs[..., k]
    return out


def principal_lattice(M):
    """Principal lattice nodes of degree M on T_e, vertices first."""
    if M == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    for i in range(M + 1):
        for j in range(M + 1 - i):
            p = (i / M, j / M)
            if p not in pts:
                pts.append(p)
    return np.array(pts)


class SpatialBasis:
    """Orthogonal modal basis on T_e (Dubiner construction), psi_1 == 1.

    The Jacobi-polynomial family on the collapsed coordinates is sampled once
    and re-expressed in monomial coefficients, which makes derivatives of any
    order cheap array operations.
    """

    def __init__(self, M):
        if not 0 <= M <= MAX_DEGREE_M:
            raise UnsupportedDegreeError(f"spatial basis degree {M} not in [0, {MAX_DEGREE_M}]")
        self.degree = M
        self.dof_count = dof_count(M)
        self.exps = monomial_exponents(M)
        self.coeffs = self._dubiner_coefficients(M)          # (dof, n_mono)
        # mode masses ||psi_l||^2, used by tests and for scaling
        rule = make_triangle_rule(2 * M + 2)
        vals = self.eval_all(rule.points)
        self.mode_mass = (rule.weights[:, None] * vals * vals).sum(axis=0)

    def _dubiner_coefficients(self, M):
        # sample the collapsed-coordinate family on a shrunk lattice (stays
        # clear of eta = 1) and solve for exact monomial coefficients
        pts = 1.0 / 3.0 + 0.8 * (principal_lattice(max(M, 1)) - 1.0 / 3.0)
        pts = pts[: self.dof_count]
        xi, eta = pts[:, 0], pts[:, 1]
        a = 2.0 * xi / (1.0 - eta) - 1.0
        b = 2.0 * eta - 1.0
        vals = np.empty((len(pts), self.dof_count))
        col = 0
        for d in range(M + 1):
            for n in range(d + 1):
                m = d - n
                vals[:, col] = (eval_jacobi(m, 0.0, 0.0, a)
                                * (1.0 - eta) ** m
                                * eval_jacobi(n, 2.0 * m + 1.0, 0.0, b))
                col += 1
        V = eval_monomials(self.exps, pts)
        return np.linalg.solve(V, vals).T

    def eval_all(self, pts):
        """psi_l at pts (...,2) -> (..., dof_count)."""
        return eval_monomials(self.exps, pts) @ self.coeffs.T

    def eval(self, l, pts):
        """Single basis function, 1-based index as in the modal expansion."""
        if not 1 <= l <= self.dof_count:
            raise IndexError(f"basis index {l} out of range 1..{self.dof_count}")
        return self.eval_all(pts)[..., l - 1]

    def deriv_coeffs(self, alpha, beta):
        """Monomial coefficients of d^(alpha+beta) psi / dxi^alpha deta^beta."""
        c = self.coeffs
        for _ in range(alpha):
            c = monomial_derivative(self.exps, c, 0)
        for _ in range(beta):
            c = monomial_derivative(self.exps, c, 1)
        return c

    def grad_all(self, pts):
        """Gradients (..., dof_count, 2)."""
        mono = eval_monomials(self.exps, pts)
        gx = mono @ self.deriv_coeffs(1, 0).T
        gy = mono @ self.deriv_coeffs(0, 1).T
        return np.stack([gx, gy], axis=-1)


def build_oscillation_matrix(M):
    """Σ_lm = sum over derivative orders 1 <= a+b <= M of the derivative
    products integrated over T_e; constants therefore have zero indicator."""
    if M < 1:
        raise UnsupportedDegreeError("oscillation matrix needs M >= 1")
    basis = get_spatial_basis(M)
    rule = make_triangle_rule(2 * M + 2)
    mono = eval_monomials(basis.exps, rule.points)
    sigma = np.zeros((basis.dof_count, basis.dof_count))
    for a in range(M + 1):
        for b in range(M + 1 - a):
            if a + b < 1:
                continue
            d = mono @ basis.deriv_coeffs(a, b).T      # (nq, dof)
            sigma += np.einsum("q,ql,qm->lm", rule.weights, d, d)
    return 0.5 * (sigma + sigma.T)


class SpaceTimeBasis:
    """Nodal Lagrange basis on T_e x [0,1].

    Node set: principal lattice of degree M in space, tensorized with M+1
    equidistant time levels tau in {0, 1/M, ..., 1}; the first time level is
    tau=0 and the last is tau=1, which the F0 and K1 matrices rely on.
    Node ordering is time-major: l = p*n_space + a.
    """

    def __init__(self, M):
        if not 1 <= M <= MAX_DEGREE_M:
            raise UnsupportedDegreeError(f"space-time basis degree {M} not in [1, {MAX_DEGREE_M}]")
        self.degree = M
        self.n_space = dof_count(M)
        self.n_time = M + 1
        self.dof_count = self.n_space * self.n_time

        self.space_nodes = principal_lattice(M)
        self.tau_nodes = np.linspace(0.0, 1.0, self.n_time)

        # spatial nodal basis phi_a: monomial coefficients from the lattice
        self.exps = monomial_exponents(M)
        V = eval_monomials(self.exps, self.space_nodes)
        self.space_coeffs = np.linalg.inv(V).T              # (n_space, n_mono)
        # temporal Lagrange coefficients (power basis)
        Vt = np.vander(self.tau_nodes, increasing=True)
        self.time_coeffs = np.linalg.inv(Vt).T              # (n_time, M+1)

        s = np.tile(self.space_nodes, (self.n_time, 1))
        t = np.repeat(self.tau_nodes, self.n_space)
        self.nodes = np.column_stack([s, t])                # (dof, 3)

        # local node ids of the three triangle vertices at each time level
        self.vertex_space_ids = np.array([0, 1, 2])

    # -- evaluation ---------------------------------------------------------

    def _eval_time(self, tau, order=0):
        c = self.time_coeffs
        for _ in range(order):
            c = c[:, 1:] * np.arange(1, c.shape[1])
        powers = np.asarray(tau)[..., None] ** np.arange(c.shape[1])
        return powers @ c.T                                  # (..., n_time)

    def _eval_space(self, pts, dxi=0, deta=0):
        c = self.space_coeffs
        for _ in range(dxi):
            c = monomial_derivative(self.exps, c, 0)
        for _ in range(deta):
            c = monomial_derivative(self.exps, c, 1)
        return eval_monomials(self.exps, pts) @ c.T          # (..., n_space)

    def eval_theta(self, pts, dxi=0, deta=0, dtau=0):
        """theta_l (or a derivative) at space-time pts (...,3) -> (..., dof)."""
        pts = np.asarray(pts, dtype=float)
        sp = self._eval_space(pts[..., :2], dxi, deta)
        tm = self._eval_time(pts[..., 2], dtau)
        return (tm[..., :, None] * sp[..., None, :]).reshape(pts.shape[:-1] + (self.dof_count,))


@dataclass(frozen=True)
class UniversalMatrices:
    """Cached matrices driving reconstruction and the space-time predictor."""
    M: int
    sigma: np.ndarray        # oscillation indicator, (n_modes, n_modes)
    K1: np.ndarray           # (dof, dof)
    F0: np.ndarray           # (dof, n_modes)
    M_mass: np.ndarray       # (dof, dof)
    K1_inv: np.ndarray
    K1inv_F0: np.ndarray
    K1inv_M: np.ndarray
    F0_geo: np.ndarray       # (dof, 3): initial-condition matrix for vertex coords
    time_avg_vertex: np.ndarray  # (3, dof): time-averaged theta at the vertices
    D_xi: np.ndarray         # nodal derivative matrices, (dof, dof)
    D_eta: np.ndarray
    D_tau: np.ndarray


@lru_cache(maxsize=None)
def get_spatial_basis(M):
    return SpatialBasis(M)


@lru_cache(maxsize=None)
def get_spacetime_basis(M):
    return SpaceTimeBasis(M)


def make_spacetime_basis(M):
    return get_spacetime_basis(M)


def spacetime_quadrature(M):
    """Tensor rule on T_e x [0,1] of spatial exactness 2M+2, temporal M+2 points."""
    tri = make_triangle_rule(2 * M + 2)
    tg, twg = gauss_legendre_01(M + 2)
    nq, nt = len(tri.weights), len(tg)
    pts = np.empty((nq * nt, 3))
    pts[:, :2] = np.tile(tri.points, (nt, 1))
    pts[:, 2] = np.repeat(tg, nq)
    w = (twg[:, None] * tri.weights[None, :]).ravel()
    return pts, w


@lru_cache(maxsize=None)
def build_spacetime_matrices(M):
    """Assemble K1, F0, the space-time mass matrix and companions for degree M."""
    st = get_spacetime_basis(M)
    sb = get_spatial_basis(M)
    pts, w = spacetime_quadrature(M)

    theta = st.eval_theta(pts)
    theta_tau = st.eval_theta(pts, dtau=1)
    M_mass = np.einsum("q,qk,ql->kl", w, theta, theta)
    Ktau = np.einsum("q,qk,ql->kl", w, theta_tau, theta)

    tri = make_triangle_rule(2 * M + 2)
    n_sp = len(tri.weights)
    top = np.column_stack([tri.points, np.ones(n_sp)])
    bot = np.column_stack([tri.points, np.zeros(n_sp)])
    th_top = st.eval_theta(top)
    th_bot = st.eval_theta(bot)
    K1 = np.einsum("q,qk,ql->kl", tri.weights, th_top, th_top) - Ktau

    psi = sb.eval_all(tri.points)
    F0 = np.einsum("q,qk,ql->kl", tri.weights, th_bot, psi)

    # linear vertex shape functions 1-xi-eta, xi, eta for the geometry IC
    N = np.column_stack([1.0 - tri.points.sum(axis=1), tri.points[:, 0], tri.points[:, 1]])
    F0_geo = np.einsum("q,qk,qv->kv", tri.weights, th_bot, N)

    tg, twg = gauss_legendre_01(M + 2)
    tav = np.zeros((3, st.dof_count))
    for m, vtx in enumerate(TE_VERTICES):
        p = np.column_stack([np.tile(vtx, (len(tg), 1)), tg])
        tav[m] = twg @ st.eval_theta(p)

    D_xi = st.eval_theta(st.nodes, dxi=1)
    D_eta = st.eval_theta(st.nodes, deta=1)
    D_tau = st.eval_theta(st.nodes, dtau=1)

    K1_inv = np.linalg.inv(K1)
    cond = np.linalg.cond(K1)
    if not np.isfinite(cond) or cond > 1e12:
        raise UnsupportedDegreeError(f"K1 is numerically singular for M={M} (cond={cond:.2e})")

    return UniversalMatrices(
        M=M, sigma=build_oscillation_matrix(M), K1=K1, F0=F0, M_mass=M_mass,
        K1_inv=K1_inv, K1inv_F0=K1_inv @ F0, K1inv_M=K1_inv @ M_mass,
        F0_geo=F0_geo, time_avg_vertex=tav,
        D_xi=D_xi, D_eta=D_eta, D_tau=D_tau)
