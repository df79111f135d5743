"""Verification cases: manufactured vortex solution, shock-tube and explosion
setups, error norms and line sampling.

The vortex is a steady rotationally-symmetric two-phase equilibrium made
unsteady by superimposing a constant translation; pressures and the solid
volume fraction are prescribed, the angular velocities follow from the radial
momentum balance in closed form.  Every tabulated state below reproduces the
published initial data digit for digit.
"""

from dataclasses import dataclass, field

import numpy as np

from . import mesh as msh
from .basis import make_triangle_rule
from .model import ModelParams, prim_to_cons

SQRT2PI = np.sqrt(2.0 * np.pi)


# -- manufactured vortex -------------------------------------------------------

VORTEX_PARAMS = ModelParams(gamma1=1.4, gamma2=1.35, pi1=0.0, pi2=0.0)
VORTEX_RHO1 = 1.0
VORTEX_RHO2 = 2.0
VORTEX_P10 = 1.0
VORTEX_P20 = 1.5
VORTEX_S1 = 1.5
VORTEX_S2 = 1.4
VORTEX_UBAR = 2.0
VORTEX_VBAR = 2.0


def vortex_exact(xy, t):
    """Primitive state of the translating vortex at physical points (..., 2)."""
    xy = np.asarray(xy, dtype=float)
    dx = xy[..., 0] - VORTEX_UBAR * t
    dy = xy[..., 1] - VORTEX_VBAR * t
    r2 = dx * dx + dy * dy
    r = np.sqrt(r2)
    s1, s2 = VORTEX_S1, VORTEX_S2
    p10, p20 = VORTEX_P10, VORTEX_P20
    rho1, rho2 = VORTEX_RHO1, VORTEX_RHO2

    p1 = p10 * (1.0 - 0.25 * np.exp(1.0 - r2 / s1**2))
    p2 = p20 * (1.0 - 0.25 * np.exp(1.0 - r2 / s2**2))
    phi1 = 1.0 / 3.0 + np.exp(-r2 / 2.0) / (2.0 * SQRT2PI)

    H1 = np.exp(-(2.0 * r2 + r2 * s1**2 - 2.0 * s1**2) / (2.0 * s1**2))
    H2 = np.exp(-(2.0 * r2 + r2 * s2**2 - 2.0 * s2**2) / (2.0 * s2**2))
    F1 = np.exp(-(r - s1) * (r + s1) / s1**2)
    F2 = np.exp(-(r - s2) * (r + s2) / s2**2)
    G = np.exp(-r2 / 2.0)
    D = rho1 * (2.0 * SQRT2PI + 3.0 * G)

    # the solid angular velocity carries a leading factor r (like the gas
    # one), which the radial momentum balance fixes; see the ODE residual test
    rad1 = D * (p10 * (4.0 * SQRT2PI * F1 + 6.0 * H1 - 12.0 * G * s1**2 + 3.0 * H1 * s1**2)
                + 3.0 * p20 * s1**2 * (4.0 * G - H2))
    if np.any(rad1 < -1e-12):
        raise ValueError("negative radicand in the solid angular velocity")
    u1t = r * np.sqrt(np.maximum(rad1, 0.0)) / (2.0 * s1 * D)
    u2t = r * np.sqrt(2.0 * rho2 * p20 * F2) / (2.0 * rho2 * s2)

    beta = np.arctan2(dy, dx)
    sb, cb = np.sin(beta), np.cos(beta)
    P = np.empty(xy.shape[:-1] + (9,))
    P[..., 0] = rho1
    P[..., 1] = -u1t * sb + VORTEX_UBAR
    P[..., 2] = u1t * cb + VORTEX_VBAR
    P[..., 3] = p1
    P[..., 4] = rho2
    P[..., 5] = -u2t * sb + VORTEX_UBAR
    P[..., 6] = u2t * cb + VORTEX_VBAR
    P[..., 7] = p2
    P[..., 8] = phi1
    return P


def vortex_ode_residual(r):
    """Residual of the steady radial momentum balance at radii r (> 0); a
    transcription guard for the closed-form angular velocities."""
    r = np.asarray(r, dtype=float)
    h = 1e-5   # balances truncation against subtractive roundoff

    def fields(rr):
        xy = np.stack([rr, np.zeros_like(rr)], axis=-1)
        P = vortex_exact(xy, 0.0)
        phi1 = P[..., 8]
        p1, p2 = P[..., 3], P[..., 7]
        # on the positive x-axis the angular velocity is the +y component
        u1t = P[..., 2] - VORTEX_VBAR
        u2t = P[..., 6] - VORTEX_VBAR
        return phi1, p1, p2, u1t, u2t

    phi1, p1, p2, u1t, u2t = fields(r)
    phi1p, p1p, p2p, _, _ = fields(r + h)
    phi1m, p1m, p2m, _, _ = fields(r - h)

    d_phi1p1 = (phi1p * p1p - phi1m * p1m) / (2 * h)
    d_phi2p2 = ((1 - phi1p) * p2p - (1 - phi1m) * p2m) / (2 * h)
    d_phi1 = (phi1p - phi1m) / (2 * h)

    res1 = d_phi1p1 - (p2 * d_phi1 + u1t**2 * phi1 * VORTEX_RHO1 / r)
    res2 = d_phi2p2 - (-p2 * d_phi1 + u2t**2 * (1 - phi1) * VORTEX_RHO2 / r)
    return res1, res2


# -- tabulated cases ------------------------------------------------------------

@dataclass
class CaseDefinition:
    name: str
    params: ModelParams
    t_end: float
    kind: str                      # vortex | riemann | explosion | riemann2d
    initial: object = None         # primitive state fn (x, y) -> (..., 9)
    domain: tuple = None
    mesh_velocity: str = "lagrangian-solid"
    flux: str = "osher"
    reconstruction: str = "characteristic"
    default_resolution: object = None   # N_G for squares, h for discs
    periodic: tuple = (False, False)
    boundary: str = "transmissive"
    sample_points: int = 200
    notes: str = ""


def _two_state(left, right):
    L, R = np.asarray(left), np.asarray(right)

    def ic(x, y):
        P = np.where(x[..., None] < 0.0, L, R)
        return P
    return ic


def _quadrants(q1, q2, q3, q4):
    states = [np.asarray(q) for q in (q1, q2, q3, q4)]

    def ic(x, y):
        P = np.empty(np.shape(x) + (9,))
        P[...] = np.where((x[..., None] > 0) & (y[..., None] > 0), states[0], 0)
        P += np.where((x[..., None] <= 0) & (y[..., None] > 0), states[1], 0)
        P += np.where((x[..., None] <= 0) & (y[..., None] <= 0), states[2], 0)
        P += np.where((x[..., None] > 0) & (y[..., None] <= 0), states[3], 0)
        return P
    return ic


def _prim(rho_s, u_s, p_s, rho_g, u_g, p_g, phi_s):
    return np.array([rho_s, u_s, 0.0, p_s, rho_g, u_g, 0.0, p_g, phi_s])


def _prim2d(rho_s, u_s, v_s, p_s, rho_g, u_g, v_g, p_g, phi_s):
    return np.array([rho_s, u_s, v_s, p_s, rho_g, u_g, v_g, p_g, phi_s])


# initial states straight from the published tables
RP_TABLE = {
    "rp1": dict(params=ModelParams(gamma1=1.4, gamma2=1.4, pi1=0.0, pi2=0.0),
                left=_prim(1.0, 0.0, 1.0, 0.5, 0.0, 1.0, 0.4),
                right=_prim(2.0, 0.0, 2.0, 1.5, 0.0, 2.0, 0.8),
                t_end=0.10),
    "rp2": dict(params=ModelParams(gamma1=3.0, gamma2=1.4, pi1=100.0, pi2=0.0),
                left=_prim(800.0, 0.0, 500.0, 1.5, 0.0, 2.0, 0.4),
                right=_prim(1000.0, 0.0, 600.0, 1.0, 0.0, 1.0, 0.3),
                t_end=0.10),
    "rp3": dict(params=ModelParams(gamma1=1.4, gamma2=1.4, pi1=0.0, pi2=0.0),
                left=_prim(1.0, 0.9, 2.5, 1.0, 0.0, 1.0, 0.9),
                right=_prim(1.0, 0.0, 1.0, 1.2, 1.0, 2.0, 0.2),
                t_end=0.10),
    "rp4": dict(params=ModelParams(gamma1=3.0, gamma2=1.35, pi1=3400.0, pi2=0.0),
                left=_prim(1900.0, 0.0, 10.0, 2.0, 0.0, 3.0, 0.2),
                right=_prim(1950.0, 0.0, 1000.0, 1.0, 0.0, 1.0, 0.9),
                t_end=0.15),
}

RP2D_TABLE = {
    "c1": dict(params=ModelParams(gamma1=1.4, gamma2=1.4, pi1=0.0, pi2=0.0),
               q1=_prim2d(2.0, 0.0, 0.0, 2.0, 1.5, 0.0, 0.0, 2.0, 0.8),
               q2=_prim2d(1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 1.0, 0.4),
               q3=_prim2d(2.0, 0.0, 0.0, 2.0, 1.5, 0.0, 0.0, 2.0, 0.8),
               q4=_prim2d(1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 1.0, 0.4),
               t_end=0.15),
    "c2": dict(params=ModelParams(gamma1=3.0, gamma2=1.4, pi1=100.0, pi2=0.0),
               q1=_prim2d(1000.0, 0.0, 0.0, 600.0, 1.0, 0.0, 0.0, 1.0, 0.3),
               q2=_prim2d(800.0, 0.0, 0.0, 500.0, 1.5, 0.0, 0.0, 2.0, 0.4),
               q3=_prim2d(1000.0, 0.0, 0.0, 600.0, 1.0, 0.0, 0.0, 1.0, 0.3),
               q4=_prim2d(800.0, 0.0, 0.0, 500.0, 1.5, 0.0, 0.0, 2.0, 0.4),
               t_end=0.15),
}

# explosion problems reuse the shock-tube states: inner = left, outer = right
EP_TABLE = {"ep1": "rp1", "ep2": "rp2", "ep3": "rp4"}


def case_names():
    return (["vortex"] + sorted(RP_TABLE) + sorted(EP_TABLE) + sorted(RP2D_TABLE))


def make_case(name):
    name = name.lower()
    if name == "vortex":
        return CaseDefinition(
            name=name, params=VORTEX_PARAMS, t_end=2.0, kind="vortex",
            initial=lambda x, y: vortex_exact(np.stack([x, y], axis=-1), 0.0),
            domain=(-10.0, 10.0, -10.0, 10.0), periodic=(True, True),
            reconstruction="componentwise", default_resolution=24)
    if name in RP_TABLE:
        row = RP_TABLE[name]
        return CaseDefinition(
            name=name, params=row["params"], t_end=row["t_end"], kind="riemann",
            initial=_two_state(row["left"], row["right"]),
            domain=(-0.5, 0.5, -0.05, 0.05), periodic=(False, True),
            default_resolution=200, sample_points=200)
    if name in EP_TABLE:
        row = RP_TABLE[EP_TABLE[name]]

        def ic(x, y, L=row["left"], R=row["right"]):
            inner = (x * x + y * y)[..., None] < 0.25
            return np.where(inner, L, R)
        return CaseDefinition(
            name=name, params=row["params"], t_end=0.15, kind="explosion",
            initial=ic, domain=(-1.0, 1.0, -1.0, 1.0),
            default_resolution=0.01, sample_points=250)
    if name in RP2D_TABLE:
        row = RP2D_TABLE[name]
        return CaseDefinition(
            name=name, params=row["params"], t_end=row["t_end"], kind="riemann2d",
            initial=_quadrants(row["q1"], row["q2"], row["q3"], row["q4"]),
            domain=(-0.5, 0.5, -0.5, 0.5), periodic=(False, False),
            boundary="wall", default_resolution=100, sample_points=200)
    raise KeyError(f"unknown case {name!r}; available: {', '.join(case_names())}")


def build_mesh(case, resolution=None):
    res = resolution if resolution is not None else case.default_resolution
    if case.kind == "vortex":
        return msh.generate_structured_mesh(int(res), domain=case.domain,
                                            periodic=(True, True))
    if case.kind == "riemann":
        nx = int(res)
        x0, x1, y0, y1 = case.domain
        # a y-periodic strip needs >= 3 rows to stay manifold
        ny = max(4, int(round((y1 - y0) * nx / (x1 - x0))))
        return msh.generate_structured_mesh(nx, ny, domain=case.domain,
                                            periodic=(False, True))
    if case.kind == "explosion":
        return msh.generate_disc_mesh(float(res), radius=1.0)
    if case.kind == "riemann2d":
        nx = int(res)
        return msh.generate_structured_mesh(
            nx, nx, domain=case.domain, periodic=(False, False),
            tag_x=msh.WALL, tag_y=msh.WALL)
    raise ValueError(case.kind)


def initial_averages(mesh, case, degree=8):
    """Cell averages of the initial condition by element quadrature."""
    rule = make_triangle_rule(degree)
    pts = (np.einsum("eab,qb->eqa", mesh.geom.jac, rule.points)
           + mesh.geom.tri_coords[:, None, 0])
    P = case.initial(pts[..., 0], pts[..., 1])
    Q = prim_to_cons(P, case.params)
    w = rule.weights / rule.weights.sum()
    return np.einsum("q,eqv->ev", w, Q)


# -- norms and sampling ----------------------------------------------------------

def l2_error(geom, averages, exact_fn, component, t, M):
    """Cell-average L2 norm sqrt(sum |T_i| (Q_i - mean_i exact)^2)."""
    rule = make_triangle_rule(2 * M)
    pts = (np.einsum("eab,qb->eqa", geom.jac, rule.points)
           + geom.tri_coords[:, None, 0])
    vals = exact_fn(pts, t)[..., component]
    w = rule.weights / rule.weights.sum()
    exact_avg = np.einsum("q,eq->e", w, vals)
    diff = averages[:, component] - exact_avg
    return float(np.sqrt(np.sum(geom.area * diff * diff)))


def l2_error_reconstruction(geom, basis, coeffs, exact_fn, component, t, degree=8):
    """Continuous L2 norm of w_h - exact (the refinement-table measure: it
    sees the sub-cell misfit that cell averages hide on marginal meshes)."""
    rule = make_triangle_rule(degree)
    pts = (np.einsum("eab,qb->eqa", geom.jac, rule.points)
           + geom.tri_coords[:, None, 0])
    psi = basis.eval_all(rule.points)
    wh = np.einsum("ql,nlv->nqv", psi, coeffs)[..., component]
    ex = exact_fn(pts, t)[..., component]
    w = rule.weights / rule.weights.sum()
    return float(np.sqrt(np.sum(geom.area[:, None] * w[None, :] * (wh - ex) ** 2)))


def locate_points(geom, pts, tol=1e-12):
    """Element ids containing each point of pts (n, 2) in the (possibly
    deformed) mesh; points outside get the element of smallest barycentric
    violation and a flag."""
    d = pts[:, None, :] - geom.tri_coords[None, :, 0, :]
    lam = np.einsum("eab,neb->nea", geom.jac_inv, d)
    l3 = 1.0 - lam.sum(axis=-1)
    viol = np.maximum(np.maximum(-lam[..., 0], -lam[..., 1]), -l3)
    elem = viol.argmin(axis=1)
    outside = viol[np.arange(len(pts)), elem] > tol
    return elem, outside


def sample_line(mesh, basis, coeffs, start, end, n_points):
    """Evaluate the reconstructed solution on equidistant points of a segment.

    Returns (points, values, outside_flags); outside points are extrapolated
    from the nearest element.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    frac = (np.arange(n_points) + 0.5) / n_points
    pts = start + frac[:, None] * (end - start)
    geom = mesh.geom
    elem, outside = locate_points(geom, pts)
    d = pts - geom.tri_coords[elem, 0]
    ref = np.einsum("nab,nb->na", geom.jac_inv[elem], d)
    psi = basis.eval_all(ref)
    vals = np.einsum("nl,nlv->nv", psi, coeffs[elem])
    return pts, vals, outside
