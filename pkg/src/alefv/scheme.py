"""Path-conservative one-step ALE finite-volume update.

One step chains: WENO reconstruction -> element-local space-time predictor ->
node-velocity averaging -> vertex motion -> space-time face assembly ->
cell-average update.  Faces are the bilinear lateral surfaces spanned by the
edge endpoints at t^n and t^{n+1}; their scaled normals come from the cross
product of the parametric tangents, which closes the space-time surface of
every element exactly (discrete geometric conservation law).

The jump terms use the straight-line segment path.  The Rusanov and
Osher-type variants differ only in the dissipation matrix: |lambda_max| I
versus the path-averaged |A| built from the known characteristic speeds.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model as md
from .basis import gauss_legendre_01, get_spacetime_basis, make_triangle_rule
from .mesh import EDGE_VERTS, INTERIOR, TRANSMISSIVE, WALL, TangledMeshError
from .predictor import BNAdapter, Predictor, PredictorError, average_node_velocities, mesh_velocity_rule
from .weno import Reconstructor, WenoConfig

TE_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class StepError(RuntimeError):
    pass


def segment_path_jump(qm, qp, n_unit, params, n_points=3):
    """D.n from the straight-line segment path: only the ninth column of B is
    nonzero, so the Gauss-Legendre path integral reduces to averaging that
    column along the segment and scaling by the jump in the volume fraction."""
    n_unit = np.asarray(n_unit, dtype=float)
    s = np.hypot(n_unit[..., 0], n_unit[..., 1])
    n2 = np.stack([n_unit[..., 0] / s, n_unit[..., 1] / s], axis=-1)
    dq = qp - qm
    sg, sw = gauss_legendre_01(n_points)
    out = np.zeros_like(np.asarray(qm, dtype=float))
    for g, w in zip(sg, sw):
        psi = qm + g * dq
        out += w * md.ncp_column(psi, params, n2) * s[..., None]
    return out * dq[..., 8:9]


def shifted_wavespeeds(Q, params, n2, vn):
    """The six distinct characteristic speeds in the moving-face frame."""
    P = md.cons_to_prim(Q, params, check=False)
    c1, c2 = md.sound_speeds(Q, params)
    u1n = P[..., 1] * n2[..., 0] + P[..., 2] * n2[..., 1] - vn
    u2n = P[..., 5] * n2[..., 0] + P[..., 6] * n2[..., 1] - vn
    return np.stack([u1n - c1, u1n, u1n + c1, u2n - c2, u2n, u2n + c2], axis=-1)


def numerical_flux_parts(qm, qp, n_unit, params, flux, sg, sw):
    """Central flux, path jump term and dissipation at face quadrature points.

    The face term is cen + db - diss; the two elements receive
    -(cen + db - diss) and +(cen - db - diss) respectively, so conservative
    rows telescope exactly while the path term is split symmetrically.
    """
    nx, ny, nt = n_unit[..., 0], n_unit[..., 1], n_unit[..., 2]
    s = np.hypot(nx, ny)
    n2 = np.stack([nx / s, ny / s], axis=-1)
    vn = -nt / s

    Fm = md.flux(qm, params)
    Fp = md.flux(qp, params)
    cen = 0.5 * (
        (Fm[..., 0, :] + Fp[..., 0, :]) * nx[..., None]
        + (Fm[..., 1, :] + Fp[..., 1, :]) * ny[..., None]
        + (qm + qp) * nt[..., None])

    dq = qp - qm
    db = np.zeros_like(dq)
    diss = np.zeros_like(dq)
    if flux == "rusanov":
        lam = np.maximum(np.abs(shifted_wavespeeds(qm, params, n2, vn)).max(axis=-1),
                         np.abs(shifted_wavespeeds(qp, params, n2, vn)).max(axis=-1)) * s
        diss = 0.5 * lam[..., None] * dq
        for g, w in zip(sg, sw):
            psi = qm + g * dq
            col = md.ncp_column(psi, params, n2) * s[..., None]
            db += 0.5 * w * col * dq[..., 8:9]
    elif flux == "osher":
        idx = np.arange(qm.shape[-1])
        for g, w in zip(sg, sw):
            psi = qm + g * dq
            col = md.ncp_column(psi, params, n2) * s[..., None]
            db += 0.5 * w * col * dq[..., 8:9]
            A = md.quasilinear_normal(psi, params, n2)
            A[..., idx, idx] -= vn[..., None]
            A *= s[..., None, None]
            eig = shifted_wavespeeds(psi, params, n2, vn) * s[..., None]
            diss += 0.5 * w * md.abs_matrix_action(A, eig, dq)
    else:
        raise ValueError(f"unknown flux {flux!r}")
    return cen, db, diss


@dataclass
class SchemeConfig:
    flux: str = "osher"                   # or "rusanov"
    reconstruction: str = "characteristic"
    mesh_velocity: str = "lagrangian-solid"
    prescribed_field: object = None
    cfl: float = 0.5
    path_points: int = 3
    face_chunk: int = 2048


@dataclass
class StepDiagnostics:
    dt: float
    gcl_max: float
    gcl_limit: float
    phi_min: float
    phi_max: float
    predictor_iters: int
    predictor_retries: int = 0
    recon_order_reduced: int = 0
    face_fallbacks: int = 0
    weno: dict = field(default_factory=dict)


class Stepper:
    def __init__(self, mesh, M, params, config=None):
        self.mesh = mesh
        self.M = M
        self.params = params
        self.config = config or SchemeConfig()
        self.st = get_spacetime_basis(M)
        wmode = WenoConfig(mode=self.config.reconstruction)
        self.recon = Reconstructor(mesh, M, params, wmode)
        self.pred = Predictor(M, BNAdapter(params))
        self.vel_rule = mesh_velocity_rule(self.config.mesh_velocity,
                                           self.config.prescribed_field)
        self._face_quadrature()
        self._volume_quadrature()
        self._wall_constraints()
        self.sg, self.sw = gauss_legendre_01(self.config.path_points)

    # -- precomputed reference-space data ------------------------------------

    def _face_quadrature(self):
        M = self.M
        g, w = gauss_legendre_01(M + 1)
        chi, tau = np.meshgrid(g, g, indexing="ij")
        self.fq_chi = chi.ravel()
        self.fq_tau = tau.ravel()
        self.fq_w = (w[:, None] * w[None, :]).ravel()
        nq = len(self.fq_w)

        st = self.st
        self.trace_fwd = np.empty((3, nq, st.dof_count))
        self.trace_rev = np.empty((3, nq, st.dof_count))
        for k in range(3):
            a, b = TE_VERTS[EDGE_VERTS[k, 0]], TE_VERTS[EDGE_VERTS[k, 1]]
            for rev, out in ((False, self.trace_fwd), (True, self.trace_rev)):
                c = 1.0 - self.fq_chi if rev else self.fq_chi
                pts = np.column_stack([a + c[:, None] * (b - a), self.fq_tau])
                out[k] = st.eval_theta(pts)

    def _volume_quadrature(self):
        M = self.M
        tri = make_triangle_rule(2 * M)
        tg, tw = gauss_legendre_01(M + 1)
        self.vol_tau = tg
        self.vol_tw = tw
        # spatially pre-integrated basis at each temporal quadrature level
        th = np.empty((len(tg), self.st.dof_count))
        for t, tau in enumerate(tg):
            pts = np.column_stack([tri.points, np.full(len(tri.weights), tau)])
            th[t] = tri.weights @ self.st.eval_theta(pts)
        self.vol_theta = th

    def _wall_constraints(self):
        """Boundary nodes on walls slide along them; wall corners are pinned."""
        mesh = self.mesh
        normals = {}
        for e in range(mesh.n_elems):
            for k in range(3):
                if mesh.boundary_tag[e, k] != WALL:
                    continue
                a, b = mesh.tris[e, EDGE_VERTS[k]]
                ev = mesh.geom.nodes[b] - mesh.geom.nodes[a]
                nrm = np.array([ev[1], -ev[0]]) / np.linalg.norm(ev)
                for node in (a, b):
                    normals.setdefault(node, []).append(nrm)
        self.wall_project = {}
        for node, ns in normals.items():
            distinct = [ns[0]]
            for v in ns[1:]:
                if min(np.linalg.norm(v - u) for u in distinct) > 1e-9 and \
                   min(np.linalg.norm(v + u) for u in distinct) > 1e-9:
                    distinct.append(v)
            self.wall_project[node] = None if len(distinct) > 1 else distinct[0]

    def _constrain_node_velocities(self, vbar):
        for node, nrm in self.wall_project.items():
            if nrm is None:
                vbar[node] = 0.0
            else:
                vbar[node] -= (vbar[node] @ nrm) * nrm
        return vbar

    # -- time step control ------------------------------------------------------

    def compute_dt(self, averages, t=0.0):
        geom = self.mesh.geom
        lam = md.max_abs_eigenvalue_iso(averages, self.params)
        dt = self.config.cfl * np.min(geom.incircle / lam)
        if self.config.mesh_velocity == "lagrangian-solid":
            vmag = np.hypot(averages[:, 1], averages[:, 2]) / averages[:, 0]
        elif self.config.mesh_velocity == "prescribed":
            vmag = np.linalg.norm(self.config.prescribed_field(geom.bary, t), axis=-1)
        else:
            vmag = None
        if vmag is not None:
            vmax = np.max(vmag)
            if vmax > 0:
                dt = min(dt, 0.5 * np.min(geom.incircle) / vmax)
        if not np.isfinite(dt) or dt <= 0:
            raise StepError(f"nonpositive time step {dt}")
        return float(dt)

    # -- one step -----------------------------------------------------------------

    def step(self, averages, t, dt):
        """-> (averages^{n+1}, StepDiagnostics); commits the mesh motion."""
        try:
            return self._attempt(averages, t, dt, retried=False)
        except PredictorError:
            self.mesh.geom_new = None
            out = self._attempt(averages, t, dt / 2.0, retried=True)
            return out

    def _attempt(self, averages, t, dt, retried):
        mesh, st = self.mesh, self.st
        geom = mesh.geom
        coeffs, wdiag = self.recon.reconstruct(geom, averages)

        # order reduction where the reconstructed nodal states went invalid
        q0 = np.einsum("lm,nmv->nlv", self.pred.nodal_from_modal, coeffs)
        ok = md.is_valid(q0, self.params).all(axis=1)
        n_reduced = int((~ok).sum())
        if n_reduced:
            coeffs[~ok, 1:, :] = 0.0

        out = self.pred.predict(coeffs, geom, dt, self.vel_rule, t)
        vbar = average_node_velocities(mesh, out["vhat"], self.M)
        self._constrain_node_velocities(vbar)
        geom_new = mesh.move_vertices(vbar, dt)
        # geometry-consistent pass: traces and interior terms must live on the
        # same straight vertex motion as the space-time faces
        out2 = self.pred.repredict(coeffs, out["qhat"], geom, geom_new, dt)
        out2["n_iters"] = out["n_iters"] + out2["n_iters"]
        out = out2

        rhs = geom.area[:, None] * averages
        rhs += self._volume_term(out, geom, geom_new, dt)
        gcl = np.zeros((mesh.n_elems, 3))
        gcl[:, 2] = geom_new.area - geom.area
        gcl_scale = geom_new.area + geom.area

        fb_total = 0
        for lo in range(0, mesh.n_faces, self.config.face_chunk):
            hi = min(lo + self.config.face_chunk, mesh.n_faces)
            fb_total += self._face_terms(slice(lo, hi), out["qhat"], averages,
                                         geom, geom_new, dt, rhs, gcl, gcl_scale)

        new_avg = rhs / geom_new.area[:, None]
        if not md.is_valid(new_avg, self.params).all():
            bad = int(np.nonzero(~md.is_valid(new_avg, self.params))[0][0])
            raise md.InvalidStateError(f"cell average (element {bad})",
                                       new_avg[bad].tolist())

        gcl_max = float(np.abs(gcl).max(axis=1).max())
        limit = float(1e-12 * gcl_scale.max())
        mesh.commit()
        phi = new_avg[:, 8]
        return new_avg, StepDiagnostics(
            dt=dt, gcl_max=gcl_max, gcl_limit=limit,
            phi_min=float(phi.min()), phi_max=float(phi.max()),
            predictor_iters=out["n_iters"], predictor_retries=int(retried),
            recon_order_reduced=n_reduced, face_fallbacks=fb_total, weno=wdiag)

    # -- face machinery -----------------------------------------------------------

    def _face_geometry(self, fs, geom, geom_new, dt):
        mesh = self.mesh
        el, ke = mesh.face_elem_l[fs], mesh.face_edge_l[fs]
        a = mesh.tris[el, EDGE_VERTS[ke, 0]]
        b = mesh.tris[el, EDGE_VERTS[ke, 1]]
        Xa0, Xb0 = geom.nodes[a], geom.nodes[b]
        Xa1, Xb1 = geom_new.nodes[a], geom_new.nodes[b]
        chi, tau = self.fq_chi, self.fq_tau
        x_chi = ((1 - tau)[None, :, None] * (Xb0 - Xa0)[:, None, :]
                 + tau[None, :, None] * (Xb1 - Xa1)[:, None, :])
        x_tau = ((1 - chi)[None, :, None] * (Xa1 - Xa0)[:, None, :]
                 + chi[None, :, None] * (Xb1 - Xb0)[:, None, :])
        n_scaled = np.empty(x_chi.shape[:-1] + (3,))
        n_scaled[..., 0] = x_chi[..., 1] * dt
        n_scaled[..., 1] = -x_chi[..., 0] * dt
        n_scaled[..., 2] = x_chi[..., 0] * x_tau[..., 1] - x_chi[..., 1] * x_tau[..., 0]
        dC = np.linalg.norm(n_scaled, axis=-1)
        if np.any(dC <= 0):
            raise StepError("degenerate space-time face (zero normal)")
        return n_scaled, dC, n_scaled / dC[..., None]

    def _traces(self, fs, qhat):
        mesh = self.mesh
        el, ke = mesh.face_elem_l[fs], mesh.face_edge_l[fs]
        qm = np.einsum("fql,flv->fqv", self.trace_fwd[ke], qhat[el])
        er, kr = mesh.face_elem_r[fs], mesh.face_edge_r[fs]
        inter = er >= 0
        qp = np.empty_like(qm)
        if inter.any():
            qp[inter] = np.einsum("fql,flv->fqv",
                                  self.trace_rev[kr[inter]], qhat[er[inter]])
        return qm, qp, inter

    def _ghost(self, q_in, tag_arr, n_unit):
        """Exterior trace for boundary faces from the interior one."""
        qg = q_in.copy()
        wall = tag_arr == WALL
        if wall.any():
            P = md.cons_to_prim(q_in[wall], self.params, check=False)
            n = n_unit[wall]
            s = np.hypot(n[..., 0], n[..., 1])
            nx, ny = n[..., 0] / s, n[..., 1] / s
            vn_wall = -n[..., 2] / s
            for off in (0, 4):
                un = P[..., off + 1] * nx + P[..., off + 2] * ny
                P[..., off + 1] += 2.0 * (vn_wall - un) * nx
                P[..., off + 2] += 2.0 * (vn_wall - un) * ny
            qg[wall] = md.prim_to_cons(P, self.params)
        return qg

    def _face_terms(self, fs, qhat, averages, geom, geom_new, dt, rhs, gcl, gcl_scale):
        mesh = self.mesh
        n_scaled, dC, n_unit = self._face_geometry(fs, geom, geom_new, dt)
        qm, qp, inter = self._traces(fs, qhat)
        tag = mesh.face_tag[fs]
        if (~inter).any():
            qp[~inter] = self._ghost(qm[~inter], tag[~inter], n_unit[~inter])

        ok = md.is_valid(qm, self.params) & md.is_valid(qp, self.params)
        bad_face = ~ok.all(axis=1)
        n_fb = int(bad_face.sum())
        if n_fb:
            el = mesh.face_elem_l[fs]
            er = mesh.face_elem_r[fs]
            qm[bad_face] = averages[el[bad_face]][:, None, :]
            fb_in = bad_face & inter
            fb_bc = bad_face & ~inter
            if fb_in.any():
                qp[fb_in] = averages[er[fb_in]][:, None, :]
            if fb_bc.any():
                qp[fb_bc] = self._ghost(qm[fb_bc], tag[fb_bc], n_unit[fb_bc])

        cen, db, diss = self._numerical_flux(qm, qp, n_unit)

        wdc = self.fq_w[None, :] * dC
        int_cen = np.einsum("fq,fqv->fv", wdc, cen)
        int_db = np.einsum("fq,fqv->fv", wdc, db)
        int_diss = np.einsum("fq,fqv->fv", wdc, diss)

        el = mesh.face_elem_l[fs]
        er = mesh.face_elem_r[fs]
        np.add.at(rhs, el, -(int_cen + int_db - int_diss))
        sel = er >= 0
        np.add.at(rhs, er[sel], (int_cen - int_db - int_diss)[sel])

        nds = np.einsum("q,fqc->fc", self.fq_w, n_scaled)
        np.add.at(gcl, el, nds)
        np.add.at(gcl, er[sel], -nds[sel])
        lat = np.einsum("fq->f", wdc)
        np.add.at(gcl_scale, el, lat)
        np.add.at(gcl_scale, er[sel], lat[sel])
        return n_fb

    def _numerical_flux(self, qm, qp, n_unit):
        return numerical_flux_parts(qm, qp, n_unit, self.params,
                                    self.config.flux, self.sg, self.sw)

    # -- interior space-time volume term -------------------------------------------

    def face_term(self, qm, qp, n_unit):
        """G_ij at face quadrature points (spec surface for tests)."""
        cen, db, diss = self._numerical_flux(qm, qp, n_unit)
        return cen + db - diss

    def _volume_term(self, out, geom, geom_new, dt):
        """Integral of (S_h - P_h) over the moving element interior."""
        sp = out["shat"] - out["phat"]
        if np.abs(sp).max() == 0.0:
            return 0.0
        j0 = 2.0 * geom.area
        j1 = 2.0 * geom_new.area
        # spatial jacobian determinant is quadratic in tau for linear motion;
        # evaluate from the staged node positions directly
        tc0, tc1 = geom.tri_coords, geom_new.tri_coords
        dets = np.empty((len(self.vol_tau), self.mesh.n_elems))
        for t, tau in enumerate(self.vol_tau):
            tc = (1 - tau) * tc0 + tau * tc1
            d1 = tc[:, 1] - tc[:, 0]
            d2 = tc[:, 2] - tc[:, 0]
            dets[t] = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        W = dt * np.einsum("t,tn,tl->nl", self.vol_tw, dets, self.vol_theta)
        return np.einsum("nl,nlv->nv", W, sp)
