"""Compressible two-phase (Baer-Nunziato) model in two space dimensions.

State layout (..., 9):
    Q = (a1*r1, a1*r1*u1, a1*r1*v1, a1*r1*E1,
         a2*r2, a2*r2*u2, a2*r2*v2, a2*r2*E2, a1)
with volume fractions a1 + a2 = 1 (a2 is always derived, never stored),
phase densities r_k, velocities (u_k, v_k), total energies E_k, and the
stiffened-gas closure e_k = (p_k + gamma_k*pi_k) / (r_k*(gamma_k - 1)).

Interface quantities follow the classic solid/gas choice u_I = u_1 and
p_I = p_2.  The compaction equation lets the temporal non-conservative term
in the energy equations be rewritten spatially,
    d(a1)/dt = -u_I . grad(a1) + nu_relax*(p1 - p2),
so the spatial matrices carry -/+ p_I u_I . grad(a1) in the energy rows and
the relaxation remainder -/+ p_I*nu_relax*(p1 - p2) moves into the algebraic
source vector.  All operations are pure functions of their inputs and accept
arbitrary leading batch dimensions.
"""

from dataclasses import dataclass

import numpy as np

N_VARS = 9
PHI_MIN = 1e-8  # volume-fraction clamp applied before EOS evaluation


class InvalidStateError(ValueError):
    """A state violates positivity; carries the offending component name."""

    def __init__(self, component, value):
        self.component = component
        self.value = value
        super().__init__(f"invalid state: {component} = {value!r}")


class DegenerateEigenstructureError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    gamma1: float = 1.4
    gamma2: float = 1.4
    pi1: float = 0.0
    pi2: float = 0.0
    lam: float = 0.0        # inter-phase drag
    nu_relax: float = 0.0   # pressure relaxation rate

    def __post_init__(self):
        if self.gamma1 <= 1 or self.gamma2 <= 1:
            raise ValueError("adiabatic exponents must exceed 1")
        if min(self.pi1, self.pi2) < 0 or min(self.lam, self.nu_relax) < 0:
            raise ValueError("pi_k, lambda, nu_relax must be nonnegative")


def _phi(Q):
    return np.clip(Q[..., 8], PHI_MIN, 1.0 - PHI_MIN)


def cons_to_prim(Q, par, check=True):
    """-> (r1, u1, v1, p1, r2, u2, v2, p2, a1) with the same batch shape."""
    Q = np.asarray(Q, dtype=float)
    phi1 = _phi(Q)
    phi2 = 1.0 - phi1
    P = np.empty_like(Q)
    for off, phi, g, pi in ((0, phi1, par.gamma1, par.pi1),
                            (4, phi2, par.gamma2, par.pi2)):
        m = Q[..., off]
        u = Q[..., off + 1] / m
        v = Q[..., off + 2] / m
        E = Q[..., off + 3] / m
        rho = m / phi
        p = (g - 1.0) * rho * (E - 0.5 * (u * u + v * v)) - g * pi
        P[..., off] = rho
        P[..., off + 1] = u
        P[..., off + 2] = v
        P[..., off + 3] = p
        if check:
            if np.any(m <= 0) or not np.all(np.isfinite(m)):
                k = "solid" if off == 0 else "gas"
                raise InvalidStateError(f"partial density ({k})", float(np.min(m)))
            if np.any(p + pi <= 0):
                k = "solid" if off == 0 else "gas"
                raise InvalidStateError(f"p+pi ({k})", float(np.min(p + pi)))
    P[..., 8] = Q[..., 8]
    return P


def prim_to_cons(P, par):
    P = np.asarray(P, dtype=float)
    phi1 = np.clip(P[..., 8], PHI_MIN, 1.0 - PHI_MIN)
    Q = np.empty_like(P)
    for off, phi, g, pi in ((0, phi1, par.gamma1, par.pi1),
                            (4, 1.0 - phi1, par.gamma2, par.pi2)):
        rho, u, v, p = (P[..., off + i] for i in range(4))
        e = (p + g * pi) / (rho * (g - 1.0))
        E = e + 0.5 * (u * u + v * v)
        m = phi * rho
        Q[..., off] = m
        Q[..., off + 1] = m * u
        Q[..., off + 2] = m * v
        Q[..., off + 3] = m * E
    Q[..., 8] = P[..., 8]
    return Q


def is_valid(Q, par):
    """Vectorized validity mask (positivity and volume-fraction bounds)."""
    Q = np.asarray(Q, dtype=float)
    ok = np.isfinite(Q).all(axis=-1)
    ok &= (Q[..., 0] > 0) & (Q[..., 4] > 0)
    ok &= (Q[..., 8] > 0.0) & (Q[..., 8] < 1.0)
    phi1 = _phi(Q)
    for off, phi, g, pi in ((0, phi1, par.gamma1, par.pi1),
                            (4, 1.0 - phi1, par.gamma2, par.pi2)):
        m = Q[..., off]
        with np.errstate(divide="ignore", invalid="ignore"):
            ke = 0.5 * (Q[..., off + 1] ** 2 + Q[..., off + 2] ** 2) / np.where(m > 0, m, 1.0)
            p = (g - 1.0) * (Q[..., off + 3] - ke) / phi - g * pi
        ok &= p + pi > 0
    return ok


def flux(Q, par):
    """Conservative flux tensor, shape (..., 2, 9): [0] is f, [1] is g."""
    P = cons_to_prim(Q, par, check=False)
    phi1 = _phi(Q)
    F = np.zeros(Q.shape[:-1] + (2, N_VARS))
    for off, phi in ((0, phi1), (4, 1.0 - phi1)):
        m = Q[..., off]
        u, v, p = P[..., off + 1], P[..., off + 2], P[..., off + 3]
        mE = Q[..., off + 3]
        phip = phi * p
        F[..., 0, off] = m * u
        F[..., 0, off + 1] = m * u * u + phip
        F[..., 0, off + 2] = m * u * v
        F[..., 0, off + 3] = (mE + phip) * u
        F[..., 1, off] = m * v
        F[..., 1, off + 1] = m * u * v
        F[..., 1, off + 2] = m * v * v + phip
        F[..., 1, off + 3] = (mE + phip) * v
    return F


def flux_normal(Q, par, n):
    """F . n for a (batch of) unit normal(s) n (..., 2)."""
    F = flux(Q, par)
    return F[..., 0, :] * n[..., 0:1] + F[..., 1, :] * n[..., 1:2]


def interface_quantities(Q, par):
    """(p_I, uI, vI) with p_I = p2 and u_I = u1."""
    P = cons_to_prim(Q, par, check=False)
    return P[..., 7], P[..., 1], P[..., 2]


def ncp_column(Q, par, n):
    """Ninth column of B.n (the only nonzero one), shape (..., 9)."""
    pI, uI, vI = interface_quantities(Q, par)
    uin = uI * n[..., 0] + vI * n[..., 1]
    col = np.zeros(Q.shape[:-1] + (N_VARS,))
    col[..., 1] = -pI * n[..., 0]
    col[..., 2] = -pI * n[..., 1]
    col[..., 3] = -pI * uin
    col[..., 5] = pI * n[..., 0]
    col[..., 6] = pI * n[..., 1]
    col[..., 7] = pI * uin
    col[..., 8] = uin
    return col


def ncp_matrix_normal(Q, par, n):
    """B.n as a full (..., 9, 9) matrix."""
    B = np.zeros(Q.shape[:-1] + (N_VARS, N_VARS))
    B[..., :, 8] = ncp_column(Q, par, np.asarray(n, dtype=float))
    return B


def ncp_product(Q, par, grad_q):
    """P = B(Q) . grad Q from gradients grad_q with shape (..., 9, 2)."""
    pI, uI, vI = interface_quantities(Q, par)
    dphix = grad_q[..., 8, 0]
    dphiy = grad_q[..., 8, 1]
    adv = uI * dphix + vI * dphiy
    P = np.zeros_like(np.asarray(Q, dtype=float))
    P[..., 1] = -pI * dphix
    P[..., 2] = -pI * dphiy
    P[..., 3] = -pI * adv
    P[..., 5] = pI * dphix
    P[..., 6] = pI * dphiy
    P[..., 7] = pI * adv
    P[..., 8] = adv
    return P


def source(Q, par):
    """Algebraic sources: drag, pressure relaxation, and the relaxation
    remainder moved out of the energy equations' temporal term."""
    S = np.zeros_like(np.asarray(Q, dtype=float))
    if par.lam == 0.0 and par.nu_relax == 0.0:
        return S
    P = cons_to_prim(Q, par, check=False)
    du = P[..., 1] - P[..., 5]
    dv = P[..., 2] - P[..., 6]
    uI, vI = P[..., 1], P[..., 2]
    pI = P[..., 7]
    relax = par.nu_relax * (P[..., 3] - P[..., 7])
    S[..., 1] = -par.lam * du
    S[..., 2] = -par.lam * dv
    S[..., 3] = -par.lam * (uI * du + vI * dv) - pI * relax
    S[..., 5] = par.lam * du
    S[..., 6] = par.lam * dv
    S[..., 7] = par.lam * (uI * du + vI * dv) + pI * relax
    S[..., 8] = relax
    return S


def sound_speeds(Q, par):
    P = cons_to_prim(Q, par, check=False)
    c1 = np.sqrt(par.gamma1 * (P[..., 3] + par.pi1) / P[..., 0])
    c2 = np.sqrt(par.gamma2 * (P[..., 7] + par.pi2) / P[..., 4])
    return c1, c2


def eigenvalues_normal(Q, par, n):
    """The nine characteristic speeds in direction n (closed forms)."""
    P = cons_to_prim(Q, par, check=False)
    c1, c2 = sound_speeds(Q, par)
    n = np.asarray(n, dtype=float)
    u1n = P[..., 1] * n[..., 0] + P[..., 2] * n[..., 1]
    u2n = P[..., 5] * n[..., 0] + P[..., 6] * n[..., 1]
    lam = np.stack([u1n - c1, u1n, u1n, u1n, u1n + c1,
                    u2n - c2, u2n, u2n, u2n + c2], axis=-1)
    return np.sort(lam, axis=-1)


def max_abs_eigenvalue_iso(Q, par):
    """Direction-free wave-speed bound max_k(|u_k| + c_k)."""
    P = cons_to_prim(Q, par, check=False)
    c1, c2 = sound_speeds(Q, par)
    v1 = np.hypot(P[..., 1], P[..., 2])
    v2 = np.hypot(P[..., 5], P[..., 6])
    return np.maximum(v1 + c1, v2 + c2)


def max_abs_eigenvalue(Q, par, n):
    P = cons_to_prim(Q, par, check=False)
    c1, c2 = sound_speeds(Q, par)
    n = np.asarray(n, dtype=float)
    u1n = P[..., 1] * n[..., 0] + P[..., 2] * n[..., 1]
    u2n = P[..., 5] * n[..., 0] + P[..., 6] * n[..., 1]
    return np.maximum(np.abs(u1n) + c1, np.abs(u2n) + c2)


def flux_jacobian_normal(Q, par, n):
    """Analytic d(F.n)/dQ, shape (..., 9, 9)."""
    Q = np.asarray(Q, dtype=float)
    n = np.asarray(n, dtype=float)
    P = cons_to_prim(Q, par, check=False)
    A = np.zeros(Q.shape[:-1] + (N_VARS, N_VARS))
    nx, ny = n[..., 0], n[..., 1]
    for off, g, pi, sgn in ((0, par.gamma1, par.pi1, -1.0),
                            (4, par.gamma2, par.pi2, +1.0)):
        u, v = P[..., off + 1], P[..., off + 2]
        un = u * nx + v * ny
        k = 0.5 * (u * u + v * v)
        phip = Q[..., off] / P[..., off] * P[..., off + 3]  # phi_k * p_k
        H = (Q[..., off + 3] + phip) / Q[..., off]
        gm = g - 1.0
        o = off
        A[..., o, o + 1] = nx
        A[..., o, o + 2] = ny
        A[..., o + 1, o] = -u * un + nx * gm * k
        A[..., o + 1, o + 1] = un + u * nx - nx * gm * u
        A[..., o + 1, o + 2] = u * ny - nx * gm * v
        A[..., o + 1, o + 3] = nx * gm
        A[..., o + 2, o] = -v * un + ny * gm * k
        A[..., o + 2, o + 1] = v * nx - ny * gm * u
        A[..., o + 2, o + 2] = un + v * ny - ny * gm * v
        A[..., o + 2, o + 3] = ny * gm
        A[..., o + 3, o] = un * (gm * k - H)
        A[..., o + 3, o + 1] = H * nx - gm * u * un
        A[..., o + 3, o + 2] = H * ny - gm * v * un
        A[..., o + 3, o + 3] = g * un
        # phi_k p_k depends on a1 only through the stiffening constant
        A[..., o + 1, 8] = sgn * g * pi * nx
        A[..., o + 2, 8] = sgn * g * pi * ny
        A[..., o + 3, 8] = sgn * g * pi * un
    return A


def quasilinear_normal(Q, par, n):
    """A_n = d(F.n)/dQ + B.n."""
    A = flux_jacobian_normal(Q, par, n)
    A[..., :, 8] += ncp_column(Q, par, np.asarray(n, dtype=float))
    return A


def _euler_block_vectors(u, v, H, c, g, nx, ny):
    """Right/left eigenvectors of the stiffened-Euler 4x4 sub-block.

    Ordering: (un - c, un, un, un + c) with the entropy mode before the
    tangential one.  Returns (Rb, Lb) with shapes (..., 4, 4); Lb @ Rb = I.
    """
    gm = g - 1.0
    tx, ty = -ny, nx
    un = u * nx + v * ny
    ut = u * tx + v * ty
    k = 0.5 * (u * u + v * v)
    zero = np.zeros_like(u)
    one = np.ones_like(u)
    Rb = np.stack([
        np.stack([one, u - c * nx, v - c * ny, H - c * un], axis=-1),
        np.stack([one, u, v, k], axis=-1),
        np.stack([zero, tx * one, ty * one, ut], axis=-1),
        np.stack([one, u + c * nx, v + c * ny, H + c * un], axis=-1),
    ], axis=-1)                                   # columns are eigenvectors
    ic2 = (1.0 / (c * c))[..., None]
    Lb = np.stack([
        0.5 * ic2 * np.stack([gm * k + c * un, -gm * u - c * nx, -gm * v - c * ny, gm * one], axis=-1),
        ic2 * np.stack([c * c - gm * k, gm * u, gm * v, -gm * one], axis=-1),
        np.stack([-ut, tx * one, ty * one, zero], axis=-1),
        0.5 * ic2 * np.stack([gm * k - c * un, -gm * u + c * nx, -gm * v + c * ny, gm * one], axis=-1),
    ], axis=-2)                                   # rows are left eigenvectors
    return Rb, Lb


def eigendecomposition_normal(Q, par, n, resonance_tol=1e-10):
    """Analytic eigendecomposition of A_n -> (R, lam, R_inv).

    The system matrix is block triangular: one stiffened-Euler block per
    phase plus the compaction row, whose eigenvector is obtained in closed
    form by expanding the coupling column in the phase eigenbases.  The 0/0
    in the gas entropy coefficient at velocity equilibrium cancels exactly;
    a true resonance u1.n = u2.n +- c2 has no complete eigenbasis and raises.
    """
    Q = np.asarray(Q, dtype=float)
    n = np.asarray(n, dtype=float)
    P = cons_to_prim(Q, par, check=False)
    c1, c2 = sound_speeds(Q, par)
    nx, ny = n[..., 0], n[..., 1]
    pI = P[..., 7]

    u1, v1 = P[..., 1], P[..., 2]
    u2, v2 = P[..., 5], P[..., 6]
    H1 = (Q[..., 3] + Q[..., 0] / P[..., 0] * P[..., 3]) / Q[..., 0]
    H2 = (Q[..., 7] + Q[..., 4] / P[..., 4] * P[..., 7]) / Q[..., 4]
    un1 = u1 * nx + v1 * ny
    un2 = u2 * nx + v2 * ny

    scale = np.maximum(np.abs(un1) + c1, np.abs(un2) + c2)
    res = np.minimum(np.abs(un2 - c2 - un1), np.abs(un2 + c2 - un1))
    if np.any(res < resonance_tol * scale):
        raise DegenerateEigenstructureError(
            "resonance u1.n ~ u2.n +- c2: eigenbasis incomplete")

    R1, L1 = _euler_block_vectors(u1, v1, H1, c1, par.gamma1, nx, ny)
    R2, L2 = _euler_block_vectors(u2, v2, H2, c2, par.gamma2, nx, ny)

    # compaction eigenvector (a, b, 1) for mu = u1.n
    kappa1 = par.gamma1 * par.pi1 + pI
    a = (kappa1 / (2.0 * c1 * c1))[..., None] * (R1[..., :, 0] + R1[..., :, 3])
    kappa2 = par.gamma2 * par.pi2 + pI
    gm2 = par.gamma2 - 1.0
    lmin_cg = -kappa2 / (2.0 * c2) + pI * (un1 - un2) * gm2 / (2.0 * c2 * c2)
    lplu_cg = kappa2 / (2.0 * c2) + pI * (un1 - un2) * gm2 / (2.0 * c2 * c2)
    coef_min = -lmin_cg / (un2 - c2 - un1)
    coef_plu = -lplu_cg / (un2 + c2 - un1)
    coef_ent = -pI * gm2 / (c2 * c2)
    b = (coef_min[..., None] * R2[..., :, 0]
         + coef_ent[..., None] * R2[..., :, 1]
         + coef_plu[..., None] * R2[..., :, 3])

    shape = Q.shape[:-1]
    R = np.zeros(shape + (N_VARS, N_VARS))
    Rinv = np.zeros_like(R)
    R[..., 0:4, 0:4] = R1
    R[..., 4:8, 4:8] = R2
    R[..., 0:4, 8] = a
    R[..., 4:8, 8] = b
    R[..., 8, 8] = 1.0
    Rinv[..., 0:4, 0:4] = L1
    Rinv[..., 4:8, 4:8] = L2
    Rinv[..., 0:4, 8] = -np.einsum("...ij,...j->...i", L1, a)
    Rinv[..., 4:8, 8] = -np.einsum("...ij,...j->...i", L2, b)
    Rinv[..., 8, 8] = 1.0

    lam = np.stack([un1 - c1, un1, un1, un1 + c1,
                    un2 - c2, un2, un2, un2 + c2, un1], axis=-1)
    return R, lam, Rinv


def abs_matrix_action(A, eig, vec, merge_tol=1e-8):
    """|A| @ vec through Newton interpolation of |x| on the known spectrum.

    For diagonalizable A with eigenvalues `eig` (..., k) this equals
    R|Lambda|R^-1 vec without any eigenvector computation.  Nearly coincident
    nodes are handled confluently (divided differences of |x| fall back to
    sign / zero), which keeps the evaluation bounded near resonances.
    """
    eig = np.sort(eig, axis=-1)
    k = eig.shape[-1]
    scale = np.abs(eig).max(axis=-1, keepdims=True) + 1e-300
    tol = merge_tol * scale[..., 0]

    # divided-difference table of f = |x|
    dd = [np.abs(eig)]
    for level in range(1, k):
        prev = dd[-1]
        num = prev[..., 1:] - prev[..., :-1]
        den = eig[..., level:] - eig[..., :-level]
        small = np.abs(den) <= tol[..., None]
        if level == 1:
            confluent = np.sign(0.5 * (eig[..., 1:] + eig[..., :-1]))
        else:
            confluent = np.zeros_like(num)
        with np.errstate(divide="ignore", invalid="ignore"):
            dd.append(np.where(small, confluent, num / den))
    coeff = [d[..., 0] for d in dd]  # Newton coefficients c_0 .. c_{k-1}

    out = coeff[k - 1][..., None] * vec
    eye = np.eye(A.shape[-1])
    for j in range(k - 2, -1, -1):
        shifted = A - eig[..., j, None, None] * eye
        out = np.einsum("...ij,...j->...i", shifted, out) + coeff[j][..., None] * vec
    return out
