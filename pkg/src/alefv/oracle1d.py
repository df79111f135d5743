"""One-dimensional reference solver for shock-tube and explosion comparisons.

A deliberately independent implementation: the planar/radial two-phase
equations in one space dimension (7 variables), advanced by a MUSCL-Hancock
TVD scheme with minmod slopes and path-conservative Rusanov fluctuations on a
fixed fine grid.  Cylindrical runs add the geometric reaction sources
evaluated at the half-time step (midpoint rule).

Also hosts the exact Riemann solver of the single-phase Euler equations used
to validate the scheme in the single-phase limit.
"""

import numpy as np

# state: (a1 r1, a1 r1 u1, a1 r1 E1, a2 r2, a2 r2 u2, a2 r2 E2, a1)
NV = 7


def prim_to_cons_1d(P, par):
    P = np.asarray(P, dtype=float)
    Q = np.empty_like(P)
    phi1 = P[..., 6]
    for off, phi, g, pi in ((0, phi1, par.gamma1, par.pi1),
                            (3, 1.0 - phi1, par.gamma2, par.pi2)):
        rho, u, p = P[..., off], P[..., off + 1], P[..., off + 2]
        E = (p + g * pi) / (rho * (g - 1.0)) + 0.5 * u * u
        Q[..., off] = phi * rho
        Q[..., off + 1] = phi * rho * u
        Q[..., off + 2] = phi * rho * E
    Q[..., 6] = phi1
    return Q


def cons_to_prim_1d(Q, par):
    Q = np.asarray(Q, dtype=float)
    P = np.empty_like(Q)
    phi1 = np.clip(Q[..., 6], 1e-8, 1.0 - 1e-8)
    for off, phi, g, pi in ((0, phi1, par.gamma1, par.pi1),
                            (3, 1.0 - phi1, par.gamma2, par.pi2)):
        m = Q[..., off]
        u = Q[..., off + 1] / m
        E = Q[..., off + 2] / m
        rho = m / phi
        P[..., off] = rho
        P[..., off + 1] = u
        P[..., off + 2] = (g - 1.0) * rho * (E - 0.5 * u * u) - g * pi
    P[..., 6] = Q[..., 6]
    return P


def flux_1d(Q, par):
    P = cons_to_prim_1d(Q, par)
    phi1 = np.clip(Q[..., 6], 1e-8, 1.0 - 1e-8)
    F = np.zeros_like(Q)
    for off, phi in ((0, phi1), (3, 1.0 - phi1)):
        u, p = P[..., off + 1], P[..., off + 2]
        F[..., off] = Q[..., off + 1]
        F[..., off + 1] = Q[..., off + 1] * u + phi * p
        F[..., off + 2] = (Q[..., off + 2] + phi * p) * u
    return F


def ncp_column_1d(Q, par):
    """Seventh column of B (all others vanish): p_I = p2, u_I = u1."""
    P = cons_to_prim_1d(Q, par)
    pI, uI = P[..., 5], P[..., 1]
    col = np.zeros_like(Q)
    col[..., 1] = -pI
    col[..., 2] = -pI * uI
    col[..., 4] = pI
    col[..., 5] = pI * uI
    col[..., 6] = uI
    return col


def max_speed_1d(Q, par):
    P = cons_to_prim_1d(Q, par)
    c1 = np.sqrt(par.gamma1 * (P[..., 2] + par.pi1) / P[..., 0])
    c2 = np.sqrt(par.gamma2 * (P[..., 5] + par.pi2) / P[..., 3])
    return np.maximum(np.abs(P[..., 1]) + c1, np.abs(P[..., 4]) + c2)


def geometric_source(Q, par, r):
    """Cylindrical reaction terms -(1/r) * advective fluxes."""
    P = cons_to_prim_1d(Q, par)
    phi1 = np.clip(Q[..., 6], 1e-8, 1.0 - 1e-8)
    S = np.zeros_like(Q)
    for off, phi in ((0, phi1), (3, 1.0 - phi1)):
        u, p = P[..., off + 1], P[..., off + 2]
        S[..., off] = -Q[..., off] * u / r
        S[..., off + 1] = -Q[..., off + 1] * u / r
        S[..., off + 2] = -(Q[..., off + 2] + phi * p) * u / r
    return S


def _minmod(a, b):
    return np.where(a * b <= 0.0, 0.0, np.where(np.abs(a) < np.abs(b), a, b))


def _valid_1d(Q, par):
    ok = (Q[..., 0] > 0) & (Q[..., 3] > 0) & (Q[..., 6] > 0) & (Q[..., 6] < 1)
    P = cons_to_prim_1d(Q, par)
    ok &= (P[..., 2] + par.pi1 > 0) & (P[..., 5] + par.pi2 > 0)
    return ok & np.isfinite(Q).all(axis=-1)


def reference_1d_solve(case_kind, left, right, par, t_end, cells=10000,
                       domain=(-0.5, 0.5), cfl=0.9, jump_at=None):
    """Second-order TVD path-conservative run on a fine Eulerian grid.

    case_kind 'planar': two-state data split at jump_at (default mid-domain),
    transmissive ends.  'radial': domain (0, R), inner state for r < jump_at,
    reflecting axis at r = 0, transmissive outer rim.
    Returns (cell centers, primitive states).
    """
    x0, x1 = domain
    dx = (x1 - x0) / cells
    x = x0 + (np.arange(cells) + 0.5) * dx
    if jump_at is None:
        jump_at = 0.5 * (x0 + x1) if case_kind == "planar" else 0.5
    QL = prim_to_cons_1d(np.asarray(left, dtype=float), par)
    QR = prim_to_cons_1d(np.asarray(right, dtype=float), par)
    Q = np.where(x[:, None] < jump_at, QL, QR)

    radial = case_kind == "radial"
    t = 0.0
    while t < t_end - 1e-14:
        dt = cfl * dx / np.max(max_speed_1d(Q, par))
        dt = min(dt, t_end - t)
        Q = _step_1d(Q, par, dx, dt, x, radial)
        if not _valid_1d(Q, par).all():
            raise RuntimeError(f"1D reference solver lost positivity at t={t:.5f}")
        t += dt
    return x, cons_to_prim_1d(Q, par)


def _ghost(Q, radial):
    """Two ghost cells per side: reflecting axis for radial, else outflow."""
    G = np.empty((len(Q) + 4, NV))
    G[2:-2] = Q
    if radial:
        G[0] = Q[1]
        G[1] = Q[0]
        for k in (1, 4):
            G[0, k] = -Q[1, k]
            G[1, k] = -Q[0, k]
    else:
        G[0] = G[1] = Q[0]
    G[-1] = G[-2] = Q[-1]
    return G


def _step_1d(Q, par, dx, dt, x, radial):
    G = _ghost(Q, radial)
    dminus = G[1:-1] - G[:-2]
    dplus = G[2:] - G[1:-1]
    slope = _minmod(dminus, dplus)            # for cells G[1:-1]
    QL = G[1:-1] - 0.5 * slope
    QR = G[1:-1] + 0.5 * slope
    # drop slopes wherever an extrapolated state went invalid
    bad = ~(_valid_1d(QL, par) & _valid_1d(QR, par))
    if bad.any():
        QL[bad] = G[1:-1][bad]
        QR[bad] = G[1:-1][bad]
        slope[bad] = 0.0

    # half-step evolution (MUSCL-Hancock) including interior path term
    col = ncp_column_1d(G[1:-1], par)
    dphi = QR[..., 6] - QL[..., 6]
    interior = flux_1d(QR, par) - flux_1d(QL, par) + col * dphi[..., None]
    if radial:
        xg = np.concatenate([[x[0] - 2 * dx, x[0] - dx], x, [x[-1] + dx, x[-1] + 2 * dx]])
        rr = np.abs(xg[1:-1])
        src = geometric_source(G[1:-1], par, rr)
    else:
        src = 0.0
    half = -0.5 * dt / dx * interior + 0.5 * dt * src
    QLh = QL + half
    QRh = QR + half
    bad = ~(_valid_1d(QLh, par) & _valid_1d(QRh, par))
    if bad.any():
        QLh[bad] = G[1:-1][bad]
        QRh[bad] = G[1:-1][bad]

    qm = QRh[:-1]    # right face value of cell i
    qp = QLh[1:]     # left face value of cell i+1
    dq = qp - qm
    # 3-point segment-path average of B
    sg = np.array([0.5 - np.sqrt(15) / 10, 0.5, 0.5 + np.sqrt(15) / 10])
    sw = np.array([5.0, 8.0, 5.0]) / 18.0
    Bbar = np.zeros_like(qm)
    for g, w in zip(sg, sw):
        Bbar += w * ncp_column_1d(qm + g * dq, par)
    jump = Bbar * dq[..., 6:7]
    lam = np.maximum(max_speed_1d(qm, par), max_speed_1d(qp, par))
    dF = flux_1d(qp, par) - flux_1d(qm, par)
    dminus_f = 0.5 * (dF + jump) - 0.5 * lam[:, None] * dq   # D^-_{i+1/2}
    dplus_f = 0.5 * (dF + jump) + 0.5 * lam[:, None] * dq    # D^+_{i+1/2}

    # real cell i: left face D^+ is dplus_f[i], right face D^- is dminus_f[i+1]
    Qmid = 0.5 * (QLh + QRh)
    col_h = ncp_column_1d(Qmid, par)
    interior_h = (flux_1d(QRh, par) - flux_1d(QLh, par)
                  + col_h * (QRh[..., 6] - QLh[..., 6])[..., None])
    new = Q - dt / dx * (dplus_f[:-1] + dminus_f[1:] + interior_h[1:-1])
    if radial:
        new += dt * geometric_source(Qmid[1:-1], par, np.abs(x))
    return new


# -- exact Euler Riemann solver (validation oracle) --------------------------------

def exact_euler_riemann(rhoL, uL, pL, rhoR, uR, pR, gamma, xi):
    """Sampled exact solution (rho, u, p) of the 1D Euler Riemann problem at
    similarity coordinates xi = x/t (Godunov/Toro construction)."""
    g = gamma
    cL = np.sqrt(g * pL / rhoL)
    cR = np.sqrt(g * pR / rhoR)

    def f_side(p, ps, rs, cs):
        if p > ps:   # shock
            A = 2.0 / ((g + 1) * rs)
            B = (g - 1) / (g + 1) * ps
            return (p - ps) * np.sqrt(A / (p + B))
        return 2 * cs / (g - 1) * ((p / ps) ** ((g - 1) / (2 * g)) - 1.0)

    def fprime(p, ps, rs, cs):
        if p > ps:
            A = 2.0 / ((g + 1) * rs)
            B = (g - 1) / (g + 1) * ps
            return np.sqrt(A / (B + p)) * (1 - (p - ps) / (2 * (B + p)))
        return 1.0 / (rs * cs) * (p / ps) ** (-(g + 1) / (2 * g))

    du = uR - uL
    p = max(1e-8, 0.5 * (pL + pR) - 0.125 * du * (rhoL + rhoR) * (cL + cR))
    for _ in range(60):
        f = f_side(p, pL, rhoL, cL) + f_side(p, pR, rhoR, cR) + du
        df = fprime(p, pL, rhoL, cL) + fprime(p, pR, rhoR, cR)
        dp = f / df
        p = max(1e-10, p - dp)
        if abs(dp) < 1e-14 * p:
            break
    um = 0.5 * (uL + uR) + 0.5 * (f_side(p, pR, rhoR, cR) - f_side(p, pL, rhoL, cL))

    xi = np.asarray(xi, dtype=float)
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    pp = np.empty_like(xi)

    def fill(mask, r_, u_, p_):
        rho[mask], u[mask], pp[mask] = r_, u_, p_

    left = xi < um
    # left wave
    if p > pL:  # shock
        SL = uL - cL * np.sqrt((g + 1) / (2 * g) * p / pL + (g - 1) / (2 * g))
        rint = rhoL * ((p / pL + (g - 1) / (g + 1)) / ((g - 1) / (g + 1) * p / pL + 1))
        fill(left & (xi < SL), rhoL, uL, pL)
        fill(left & (xi >= SL), rint, um, p)
    else:       # rarefaction
        cml = cL * (p / pL) ** ((g - 1) / (2 * g))
        SHL, STL = uL - cL, um - cml
        fill(left & (xi < SHL), rhoL, uL, pL)
        fan = left & (xi >= SHL) & (xi < STL)
        cfan = (2 / (g + 1)) * (cL + (g - 1) / 2 * (uL - xi[fan]))
        ufan = (2 / (g + 1)) * (cL + (g - 1) / 2 * uL + xi[fan])
        pfan = pL * (cfan / cL) ** (2 * g / (g - 1))
        rho[fan], u[fan], pp[fan] = g * pfan / cfan ** 2, ufan, pfan
        fill(left & (xi >= STL), rhoL * (p / pL) ** (1 / g), um, p)
    right = ~left
    if p > pR:
        SR = uR + cR * np.sqrt((g + 1) / (2 * g) * p / pR + (g - 1) / (2 * g))
        rint = rhoR * ((p / pR + (g - 1) / (g + 1)) / ((g - 1) / (g + 1) * p / pR + 1))
        fill(right & (xi > SR), rhoR, uR, pR)
        fill(right & (xi <= SR), rint, um, p)
    else:
        cmr = cR * (p / pR) ** ((g - 1) / (2 * g))
        SHR, STR = uR + cR, um + cmr
        fill(right & (xi > SHR), rhoR, uR, pR)
        fan = right & (xi <= SHR) & (xi > STR)
        cfan = (2 / (g + 1)) * (cR - (g - 1) / 2 * (uR - xi[fan]))
        ufan = (2 / (g + 1)) * (-cR + (g - 1) / 2 * uR + xi[fan])
        pfan = pR * (cfan / cR) ** (2 * g / (g - 1))
        rho[fan], u[fan], pp[fan] = g * pfan / cfan ** 2, ufan, pfan
        fill(right & (xi <= STR), rhoR * (p / pR) ** (1 / g), um, p)
    return rho, u, pp
