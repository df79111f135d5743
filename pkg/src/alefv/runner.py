"""Run orchestration: configuration, time loop, artifacts.

A run executes the time loop exactly to t_end (the final step is clipped),
then writes a VTK snapshot, a sampled-profile CSV, a machine-readable
summary, and report figures into the output directory.  Everything except
the wall-time entry of the summary is byte-reproducible for a fixed
configuration.
"""

import json
import os
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import cases as cs
from . import figures as fig
from . import mesh as msh
from . import model as md
from . import oracle1d as orc
from . import scheme as sc
from . import vtkio

DATA_DIR = Path(__file__).parent / "data"
OUT_ENV = "ALEFV_OUT"


@dataclass
class RunConfig:
    case: str = "rp1"
    order: int = 2                     # polynomial degree M (order M+1 scheme)
    flux: str = None                   # case default unless set
    reconstruction: str = None
    mesh_velocity: str = "lagrangian-solid"
    mesh: str = None                   # resolution (N or h) or mesh file path
    cfl: float = 0.5
    t_end: float = None
    out_dir: str = None
    output_every: int = 0              # snapshot cadence in steps, 0 = ends only
    threads: int = 1
    deterministic: bool = True
    figures: bool = True
    verbose: bool = False


def load_config_file(path):
    """Flat key=value text file -> dict of strings."""
    out = {}
    with open(path) as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            if not _:
                raise ValueError(f"malformed config line: {line!r}")
            out[key.strip()] = val.strip()
    return out


def _resolve_mesh(case, spec):
    if spec is None:
        return cs.build_mesh(case)
    if isinstance(spec, str) and os.path.exists(spec):
        return msh.read_mesh(spec)
    try:
        res = float(spec)
    except (TypeError, ValueError):
        raise ValueError(f"mesh spec {spec!r} is neither a file nor a number")
    if case.kind == "explosion":
        return cs.build_mesh(case, resolution=res if res < 1 else 1.0 / res)
    return cs.build_mesh(case, resolution=int(res))


def run(config):
    """Execute one case; returns (summary dict, out_dir path)."""
    t_wall = time.perf_counter()
    case = cs.make_case(config.case)
    mesh = _resolve_mesh(case, config.mesh)
    flux = config.flux or case.flux
    recon = config.reconstruction or case.reconstruction
    t_end = case.t_end if config.t_end is None else float(config.t_end)

    out_dir = Path(config.out_dir or os.environ.get(OUT_ENV, "out")) / config.case
    out_dir.mkdir(parents=True, exist_ok=True)

    stepper = sc.Stepper(mesh, config.order, case.params, sc.SchemeConfig(
        flux=flux, reconstruction=recon, mesh_velocity=config.mesh_velocity,
        cfl=config.cfl))
    avg = cs.initial_averages(mesh, case)

    _write_snapshot(out_dir / "snapshot_0000.vtk", mesh, avg, case, 0.0)

    t, n_steps = 0.0, 0
    gcl_max_rel = 0.0
    retries = reduced = fallbacks = 0
    while t < t_end - 1e-13:
        dt = min(stepper.compute_dt(avg, t), t_end - t)
        avg, diag = stepper.step(avg, t, dt)
        t += dt
        n_steps += 1
        gcl_max_rel = max(gcl_max_rel, diag.gcl_max / diag.gcl_limit)
        retries += diag.predictor_retries
        reduced += diag.recon_order_reduced
        fallbacks += diag.face_fallbacks
        if config.verbose and n_steps % 25 == 0:
            print(f"  step {n_steps}: t={t:.5f} dt={dt:.3e}", flush=True)
        if config.output_every and n_steps % config.output_every == 0:
            _write_snapshot(out_dir / f"snapshot_{n_steps:04d}.vtk",
                            mesh, avg, case, t)

    _write_snapshot(out_dir / "snapshot_final.vtk", mesh, avg, case, t)
    coeffs, _ = stepper.recon.reconstruct(mesh.geom, avg)

    summary = {
        "case": config.case, "order": config.order, "flux": flux,
        "reconstruction": recon, "mesh_velocity": config.mesh_velocity,
        "cfl": config.cfl, "n_elements": mesh.n_elems, "t_end": t,
        "steps": n_steps, "gcl_max_over_limit": gcl_max_rel,
        "predictor_retries": retries, "order_reductions": reduced,
        "face_fallbacks": fallbacks, "deterministic": config.deterministic,
        "threads": config.threads, "errors": {},
    }

    profile = _write_profile(out_dir, mesh, stepper, coeffs, case, t, config)
    if case.kind == "vortex":
        exact = lambda pts, tt: md.prim_to_cons(cs.vortex_exact(pts, tt), case.params)
        summary["errors"]["l2_phi_s"] = cs.l2_error(
            mesh.geom, avg, exact, 8, t, M=config.order)
    if profile is not None and profile.get("oracle_l1"):
        summary["errors"].update(profile["oracle_l1"])

    summary["wall_time_s"] = time.perf_counter() - t_wall
    with open(out_dir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)

    if config.figures:
        _figures(out_dir, mesh, avg, case, profile)
    return summary, out_dir


def _write_snapshot(path, mesh, avg, case, t):
    prim = md.cons_to_prim(avg, case.params, check=False)
    cell_data = {n: avg[:, i] for i, n in enumerate(vtkio.CONS_NAMES)}
    cell_data.update({n: prim[:, i] for i, n in enumerate(vtkio.PRIM_NAMES)})
    vtkio.write_vtk(path, mesh.geom.nodes, mesh.tris, cell_data,
                    point_data=None, title=f"{case.name} t={t!r}")


def _write_profile(out_dir, mesh, stepper, coeffs, case, t, config):
    """Sampled 1D cut (+ L1 against the stored oracle when one applies)."""
    if case.kind == "vortex":
        return None
    n = case.sample_points
    if case.kind in ("riemann", "riemann2d"):
        x0, x1 = case.domain[0], case.domain[1]
        start, end = (x0, 0.0), (x1, 0.0)
    else:
        start, end = (0.0, 0.0), (1.0, 0.0)
    pts, vals, outside = cs.sample_line(mesh, stepper.recon.basis, coeffs,
                                        start, end, n)
    prim = md.cons_to_prim(vals, case.params, check=False)
    header = ["x", "y"] + vtkio.PRIM_NAMES + ["extrapolated"]
    cols = [pts[:, 0], pts[:, 1]] + [prim[:, i] for i in range(9)] + [outside.astype(float)]
    vtkio.write_csv(out_dir / "profile.csv", header, cols)

    out = {"x": pts[:, 0], "prim": prim, "oracle": None, "oracle_l1": {}}
    if case.kind in ("riemann", "explosion"):
        xo, po = load_oracle(case.name)
        out["oracle"] = (xo, _prim1d_to_2d(po))
        interp = np.empty((len(pts), 9))
        for i in range(9):
            interp[:, i] = np.interp(pts[:, 0], xo, out["oracle"][1][:, i])
        for name, comp in fig.PROFILE_FIELDS:
            rng = np.ptp(out["oracle"][1][:, comp])
            l1 = float(np.mean(np.abs(prim[:, comp] - interp[:, comp])))
            out["oracle_l1"][f"l1_{name}"] = l1
            out["oracle_l1"][f"l1_{name}_over_range"] = l1 / rng if rng > 0 else 0.0
    return out


def _prim1d_to_2d(p1d):
    """(rs, us, ps, rg, ug, pg, phi) -> 9-component primitive layout."""
    out = np.zeros(p1d.shape[:-1] + (9,))
    out[..., 0] = p1d[..., 0]
    out[..., 1] = p1d[..., 1]
    out[..., 3] = p1d[..., 2]
    out[..., 4] = p1d[..., 3]
    out[..., 5] = p1d[..., 4]
    out[..., 7] = p1d[..., 5]
    out[..., 8] = p1d[..., 6]
    return out


def _figures(out_dir, mesh, avg, case, profile):
    fig.mesh_figure(out_dir / "mesh.png", mesh.geom.nodes, mesh.tris,
                    values=avg[:, 8], title=f"{case.name}: final mesh, phi_s")
    if profile is not None:
        fig.profile_figure(out_dir / "profile.png", profile["x"],
                           profile["prim"], oracle=profile["oracle"],
                           title=f"{case.name} cut at t_end")


# -- 1D reference profiles --------------------------------------------------------

ORACLE_CELLS = 10000


def oracle_path(name):
    return DATA_DIR / f"oracle_{name}.csv"


def generate_oracle(name, cells=ORACLE_CELLS, path=None):
    """Solve the 1D reference problem for a shock-tube or explosion case and
    store the profile as a versioned CSV."""
    case = cs.make_case(name)
    base = cs.RP_TABLE[cs.EP_TABLE[name]] if case.kind == "explosion" else cs.RP_TABLE[name]
    L = _prim2d_to_1d(base["left"])
    R = _prim2d_to_1d(base["right"])
    if case.kind == "explosion":
        x, prim = orc.reference_1d_solve("radial", L, R, case.params, case.t_end,
                                         cells=cells, domain=(0.0, 1.0), jump_at=0.5)
    else:
        x, prim = orc.reference_1d_solve("planar", L, R, case.params, case.t_end,
                                         cells=cells, domain=(-0.5, 0.5), jump_at=0.0)
    path = Path(path) if path else oracle_path(name)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["x", "rho_s", "u_s", "p_s", "rho_g", "u_g", "p_g", "phi_s"]
    meta = (f"# case={name} kind={case.kind} cells={cells} t={case.t_end!r} "
            f"scheme=muscl-hancock-rusanov-pc version=1")
    cols = [x] + [prim[:, i] for i in range(7)]
    lines = [meta, ",".join(header)]
    for row in zip(*[np.asarray(c) for c in cols]):
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return path


def load_oracle(name):
    """-> (x, prim7) from the packaged golden profile (generated on demand)."""
    path = oracle_path(name)
    if not path.exists():
        generate_oracle(name)
    header, data, meta = vtkio.read_csv(path)
    return data[:, 0], data[:, 1:8]


def _prim2d_to_1d(P):
    return np.array([P[0], P[1], P[3], P[4], P[5], P[7], P[8]])


# -- convergence harness ------------------------------------------------------------

def convergence_harness(orders, meshes, t_end=2.0, flux="osher", cfl=0.5,
                        out_dir=None, verbose=False):
    """Vortex refinement table: rows of (M, N_G, L2 error, observed order)."""
    case = cs.make_case("vortex")
    exact = lambda pts, tt: md.prim_to_cons(cs.vortex_exact(pts, tt), case.params)
    rows = []
    for M in orders:
        prev = None
        for ng in meshes:
            mesh = cs.build_mesh(case, resolution=ng)
            stepper = sc.Stepper(mesh, M, case.params, sc.SchemeConfig(
                flux=flux, reconstruction=case.reconstruction,
                mesh_velocity="lagrangian-solid", cfl=cfl))
            avg = cs.initial_averages(mesh, case)
            t, n = 0.0, 0
            while t < t_end - 1e-13:
                dt = min(stepper.compute_dt(avg, t), t_end - t)
                avg, diag = stepper.step(avg, t, dt)
                t += dt
                n += 1
                if verbose and n % 25 == 0:
                    print(f"  M={M} N={ng} step {n} t={t:.3f}", flush=True)
            coeffs, _ = stepper.recon.reconstruct(mesh.geom, avg)
            err = cs.l2_error_reconstruction(mesh.geom, stepper.recon.basis,
                                             coeffs, exact, 8, t)
            err_avg = cs.l2_error(mesh.geom, avg, exact, 8, t, M=M)
            order = (np.log(prev[1] / err) / np.log(ng / prev[0])
                     if prev else float("nan"))
            rows.append({"M": M, "N": ng, "l2_phi_s": err, "order": order,
                         "l2_phi_s_cellavg": err_avg, "steps": n})
            prev = (ng, err)
            if verbose:
                print(f"M={M} N={ng}: L2={err:.4e} order={order:.2f}", flush=True)
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        vtkio.write_csv(out_dir / "convergence.csv",
                        ["M", "N", "l2_phi_s", "order"],
                        [[r["M"] for r in rows], [r["N"] for r in rows],
                         [r["l2_phi_s"] for r in rows],
                         [r["order"] for r in rows]])
        series = []
        for M in orders:
            series.append((f"order {M + 1}",
                           [(r["N"], r["l2_phi_s"]) for r in rows if r["M"] == M]))
        fig.convergence_figure(out_dir / "convergence.png", series,
                               title="vortex refinement")
    return rows
