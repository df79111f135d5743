"""Nonlinear WENO reconstruction on moving triangles.

Per element, 7 stencil polynomials (1 central, 3 forward, 3 backward) are
obtained from integral conservation by constrained least squares, rated by
the oscillation indicator and blended with nonlinear weights.  The mean
constraint on the home element is imposed by elimination: with psi_1 == 1
and all higher modes having zero mean, the first coefficient simply equals
the cell average and only the n_modes-1 higher coefficients are solved for.

The small linear systems depend on the current vertex positions, so they are
re-assembled from scratch at every call; the stencil element sets themselves
never change.
"""

from dataclasses import dataclass

import numpy as np

from . import model as md
from .basis import build_oscillation_matrix, get_spatial_basis, make_triangle_rule


@dataclass
class WenoConfig:
    epsilon: float = 1e-14
    exponent: int = 8
    lambda_central: float = 1e5
    lambda_sided: float = 1.0
    mode: str = "characteristic"          # or "componentwise"
    char_directions: str = "xy-average"   # or "x"


class StencilConditioningError(RuntimeError):
    pass


class Reconstructor:
    def __init__(self, mesh, M, params, config=None, chunk=4096):
        self.mesh = mesh
        self.M = M
        self.params = params
        self.config = config or WenoConfig()
        self.chunk = chunk
        self.basis = get_spatial_basis(M)
        self.sigma = build_oscillation_matrix(M)
        self.stencils = mesh.build_stencils(M)
        self.n_modes = self.basis.dof_count

        rule = make_triangle_rule(2 * M)
        self.qpts = rule.points
        self.qmean = rule.weights / rule.weights.sum()   # mean-value weights

        self._dedupe_pairs()
        self.lambdas = np.full(7, self.config.lambda_sided)
        self.lambdas[0] = self.config.lambda_central

    def _dedupe_pairs(self):
        """Unique (element, member, shift) triples shared across the 7 stencils."""
        members = self.stencils.members      # (N, 7, n_e)
        shifts = self.stencils.shifts        # (N, 7, n_e, 2)
        N, _, n_e = members.shape
        pair_i, pair_j, pair_shift = [], [], []
        index = np.empty((N, 7, n_e), dtype=np.int64)
        for i in range(N):
            seen = {}
            for s in range(7):
                for k in range(n_e):
                    key = (int(members[i, s, k]),
                           round(float(shifts[i, s, k, 0]), 9),
                           round(float(shifts[i, s, k, 1]), 9))
                    if key not in seen:
                        seen[key] = len(pair_i)
                        pair_i.append(i)
                        pair_j.append(members[i, s, k])
                        pair_shift.append(shifts[i, s, k])
                    index[i, s, k] = seen[key]
        self.pair_i = np.array(pair_i, dtype=np.int64)
        self.pair_j = np.array(pair_j, dtype=np.int64)
        self.pair_shift = np.array(pair_shift)
        self.pair_index = index
        # pairs are generated in home-element order, so chunks are slices
        self.pair_ptr = np.searchsorted(self.pair_i, np.arange(N + 1))

    # -- assembly -------------------------------------------------------------

    def _stencil_rows(self, geom, lo, hi):
        """Mean of each basis function over every stencil member, in the home
        element's reference frame, for elements lo..hi."""
        p0, p1 = self.pair_ptr[lo], self.pair_ptr[hi]
        pi, pj = self.pair_i[p0:p1], self.pair_j[p0:p1]
        Jinv = geom.jac_inv[pi]
        Jj = geom.jac[pj]
        dX = geom.tri_coords[pj, 0] + self.pair_shift[p0:p1] - geom.tri_coords[pi, 0]
        C = Jinv @ Jj
        d = np.einsum("pab,pb->pa", Jinv, dX)
        pts = d[:, None, :] + np.einsum("pab,qb->pqa", C, self.qpts)
        psi = self.basis.eval_all(pts)                     # (P, nq, modes)
        rows = np.einsum("q,pql->pl", self.qmean, psi)
        return rows, p0

    def reconstruct(self, geom, averages):
        """-> (coeffs (N, n_modes, n_vars), diagnostics dict)."""
        N = self.mesh.n_elems
        nm, nv = self.n_modes, averages.shape[-1]
        coeffs = np.empty((N, nm, nv))
        diag = {"lsq_fallback": 0, "char_fallback": 0}
        for lo in range(0, N, self.chunk):
            hi = min(lo + self.chunk, N)
            w_s = self._stencil_coeffs_chunk(geom, averages, lo, hi, diag)
            if self.config.mode == "characteristic":
                coeffs[lo:hi] = self._blend_characteristic(averages[lo:hi], w_s, diag)
            else:
                coeffs[lo:hi] = self._blend(w_s)
        coeffs[:, 0, :] = averages          # exact mean constraint
        return coeffs, diag

    def _per_stencil_coeffs(self, geom, averages):
        """All 7 candidate polynomials per element (diagnostics/tests)."""
        N, nv = self.mesh.n_elems, averages.shape[-1]
        out = np.empty((N, 7, self.n_modes, nv))
        diag = {"lsq_fallback": 0, "char_fallback": 0}
        for lo in range(0, N, self.chunk):
            hi = min(lo + self.chunk, N)
            out[lo:hi] = self._stencil_coeffs_chunk(geom, averages, lo, hi, diag)
        return out

    def _stencil_coeffs_chunk(self, geom, averages, lo, hi, diag):
        n = hi - lo
        nm, n_e = self.n_modes, self.stencils.n_e
        rows, p0 = self._stencil_rows(geom, lo, hi)
        A = rows[self.pair_index[lo:hi] - p0]              # (n, 7, n_e, nm)

        members = self.stencils.members[lo:hi]
        b = averages[members[..., 1:]] - averages[lo:hi, None, None, :]
        A1 = A[..., 1:, 1:]                                 # drop home row, mean column

        scale = np.sqrt(np.einsum("nsrl,nsrl->nsl", A1, A1))
        scale = np.maximum(scale, 1e-300)
        As = A1 / scale[..., None, :]
        q, r = np.linalg.qr(As.reshape(n * 7, n_e - 1, nm - 1))
        rd = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
        bad = (rd.min(axis=-1) < 1e-10 * rd.max(axis=-1)).reshape(n, 7)
        y = np.einsum("prl,prv->plv", q, b.reshape(n * 7, n_e - 1, -1))
        # rank-deficient candidates (sector stencils can collapse onto a strip
        # of cells) get a minimum-norm solve below; swap in the identity so the
        # batched solve stays well posed
        r_reg = np.where(bad.reshape(-1)[:, None, None], np.eye(nm - 1)[None], r)
        w_hi = np.linalg.solve(r_reg, y).reshape(n, 7, nm - 1, -1)
        w_hi /= scale[..., None]

        if bad.any():
            As_flat = As.reshape(n * 7, n_e - 1, nm - 1)
            b_flat = b.reshape(n * 7, n_e - 1, -1)
            w_flat = w_hi.reshape(n * 7, nm - 1, -1)
            sc_flat = scale.reshape(n * 7, nm - 1)
            for t in np.nonzero(bad.reshape(-1))[0]:
                w_flat[t] = _graded_lsq(As_flat[t], b_flat[t]) / sc_flat[t][:, None]
            diag["lsq_degenerate"] = diag.get("lsq_degenerate", 0) + int(bad.sum())

        if not np.isfinite(w_hi).all():
            broken = ~np.isfinite(w_hi).all(axis=(1, 2, 3))
            w_hi[broken] = 0.0          # first-order fallback
            diag["lsq_fallback"] += int(broken.sum())

        return np.concatenate([np.broadcast_to(averages[lo:hi, None, None, :],
                                               (n, 7, 1, w_hi.shape[-1])), w_hi], axis=2)

    # -- nonlinear blending -----------------------------------------------------

    def _weights(self, sig):
        """Nonlinear weights from oscillation values sig (..., 7 on axis 1)."""
        eps, r = self.config.epsilon, self.config.exponent
        t = (sig + eps) / (sig.min(axis=1, keepdims=True) + eps)
        wt = self.lambdas.reshape((1, 7) + (1,) * (sig.ndim - 2)) * t ** (-float(r))
        return wt / wt.sum(axis=1, keepdims=True)

    def _blend(self, w_s):
        sig = np.einsum("lm,nslv,nsmv->nsv", self.sigma, w_s, w_s)
        om = self._weights(sig)
        return np.einsum("nsv,nslv->nlv", om, w_s)

    def _blend_characteristic(self, avg, w_s, diag):
        dirs = [np.array([1.0, 0.0])]
        if self.config.char_directions == "xy-average":
            dirs.append(np.array([0.0, 1.0]))
        out = np.zeros(w_s.shape[:1] + w_s.shape[2:])
        ok_all = np.ones(w_s.shape[0], dtype=bool)
        for nvec in dirs:
            R, Rinv, ok = char_projection_matrices(avg, self.params, nvec)
            ok_all &= ok
            v_s = np.einsum("ndc,nslc->nsld", Rinv, w_s)
            sig = np.einsum("lm,nsld,nsmd->nsd", self.sigma, v_s, v_s)
            om = self._weights(sig)
            v = np.einsum("nsd,nsld->nld", om, v_s)
            out += np.einsum("ncd,nld->nlc", R, v)
        out /= len(dirs)
        if not ok_all.all():
            comp = self._blend(w_s[~ok_all])
            out[~ok_all] = comp
            diag["char_fallback"] += int((~ok_all).sum())
        return out


def _graded_lsq(A, b, tol=1e-8):
    """Least squares dropping columns dependent on lower-order ones.

    Degenerate sector stencils (all members on a strip of cells) cannot see
    some high modes; zeroing exactly those keeps every representable
    polynomial, unlike a minimum-norm solve.  Columns must be pre-scaled to
    unit norm.
    """
    m = A.shape[1]
    kept = []
    Qb = np.zeros((A.shape[0], 0))
    for l in range(m):
        c = A[:, l]
        r = c - Qb @ (Qb.T @ c)
        nr = np.linalg.norm(r)
        if nr > tol:
            kept.append(l)
            Qb = np.column_stack([Qb, r / nr])
    w = np.zeros((m, b.shape[1]))
    if kept:
        w[kept] = np.linalg.lstsq(A[:, kept], b, rcond=None)[0]
    return w


def char_projection_matrices(Q, params, nvec):
    """Eigenvector matrices at the cell averages for one probe direction,
    with a componentwise-fallback mask where the eigenbasis degenerates."""
    n = np.broadcast_to(nvec, Q[..., :2].shape)
    try:
        R, _, Rinv = md.eigendecomposition_normal(Q, params, n)
        ok = np.ones(Q.shape[:-1], dtype=bool)
    except md.DegenerateEigenstructureError:
        ok = _resonance_ok(Q, params, n)
        Qs = Q.copy()
        if (~ok).any():
            # substitute a benign state so the batched call goes through
            Qs[~ok] = Q[ok][0] if ok.any() else _unit_state(params)
        R, _, Rinv = md.eigendecomposition_normal(Qs, params, n)
        eye = np.eye(Q.shape[-1])
        R[~ok] = eye
        Rinv[~ok] = eye
    return R, Rinv, ok


def _resonance_ok(Q, params, n, tol=1e-10):
    P = md.cons_to_prim(Q, params, check=False)
    c1, c2 = md.sound_speeds(Q, params)
    un1 = P[..., 1] * n[..., 0] + P[..., 2] * n[..., 1]
    un2 = P[..., 5] * n[..., 0] + P[..., 6] * n[..., 1]
    scale = np.maximum(np.abs(un1) + c1, np.abs(un2) + c2)
    res = np.minimum(np.abs(un2 - c2 - un1), np.abs(un2 + c2 - un1))
    return res >= tol * scale


def _unit_state(params):
    P = np.array([1.0, 0, 0, 1.0, 1.0, 0.5, 0, 1.0, 0.5])
    return md.prim_to_cons(P, params)


def evaluate(basis, coeffs, pts):
    """w_h at reference points: (N, n_modes, v), (n_pts, 2) -> (N, n_pts, v)."""
    psi = basis.eval_all(pts)
    return np.einsum("ql,nlv->nqv", psi, coeffs)
