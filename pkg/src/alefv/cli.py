"""Command line interface.

    alefv run --case rp1 --order 2 --flux osher --out results/
    alefv convergence --orders 2,3 --meshes 24,32 --out results/
    alefv oracle --case rp1
    alefv cases
"""

import argparse
import json
import os
import sys


def build_parser():
    p = argparse.ArgumentParser(prog="alefv",
                                description="ALE WENO finite-volume two-phase solver")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a verification case")
    r.add_argument("--case", required=True,
                   help="case name or path to a key=value config file")
    r.add_argument("--order", type=int, default=2, choices=(1, 2, 3),
                   help="polynomial degree M (scheme order M+1)")
    r.add_argument("--flux", choices=("rusanov", "osher"), default=None)
    r.add_argument("--recon", choices=("char", "comp"), default=None)
    r.add_argument("--mesh-velocity", choices=("lagrangian", "eulerian"),
                   default="lagrangian")
    r.add_argument("--mesh", default=None,
                   help="resolution (cells per direction, or 1/h) or mesh file")
    r.add_argument("--cfl", type=float, default=0.5)
    r.add_argument("--t-end", type=float, default=None)
    r.add_argument("--out", default=None,
                   help="output dir (default $ALEFV_OUT or ./out)")
    r.add_argument("--output-every", type=int, default=0)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--quiet", action="store_true")

    c = sub.add_parser("convergence", help="vortex refinement table")
    c.add_argument("--orders", default="2", help="comma list of degrees M")
    c.add_argument("--meshes", default="24,32", help="comma list of N_G")
    c.add_argument("--t-end", type=float, default=2.0)
    c.add_argument("--flux", choices=("rusanov", "osher"), default="osher")
    c.add_argument("--cfl", type=float, default=0.5)
    c.add_argument("--out", default=None)
    c.add_argument("--quiet", action="store_true")

    o = sub.add_parser("oracle", help="(re)generate a 1D reference profile")
    o.add_argument("--case", required=True)
    o.add_argument("--cells", type=int, default=10000)
    o.add_argument("--path", default=None)

    sub.add_parser("cases", help="list available cases")
    return p


RECON_MAP = {"char": "characteristic", "comp": "componentwise", None: None}
VEL_MAP = {"lagrangian": "lagrangian-solid", "eulerian": "eulerian"}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "cases":
        from .cases import case_names
        print("\n".join(case_names()))
        return 0

    if args.command == "oracle":
        from .runner import generate_oracle
        path = generate_oracle(args.case, cells=args.cells, path=args.path)
        print(f"wrote {path}")
        return 0

    if args.command == "convergence":
        from .runner import convergence_harness
        orders = [int(v) for v in args.orders.split(",") if v]
        meshes = [int(v) for v in args.meshes.split(",") if v]
        rows = convergence_harness(orders, meshes, t_end=args.t_end,
                                   flux=args.flux, cfl=args.cfl,
                                   out_dir=args.out or _default_out(),
                                   verbose=not args.quiet)
        print(f"{'M':>3} {'N_G':>5} {'L2(phi_s)':>14} {'order':>7}")
        for r in rows:
            order = "-" if r["order"] != r["order"] else f"{r['order']:.2f}"
            print(f"{r['M']:>3} {r['N']:>5} {r['l2_phi_s']:>14.6e} {order:>7}")
        return 0

    # run
    from .cases import case_names, make_case
    from .runner import RunConfig, load_config_file, run

    overrides = {}
    case_name = args.case
    if os.path.exists(case_name) and not _is_case(case_name):
        kv = load_config_file(case_name)
        case_name = kv.pop("case", None)
        if case_name is None:
            print("config file must set 'case'", file=sys.stderr)
            return 2
        overrides = kv
    try:
        make_case(case_name)
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return 2

    cfg = RunConfig(
        case=case_name, order=args.order, flux=args.flux,
        reconstruction=RECON_MAP[args.recon],
        mesh_velocity=VEL_MAP[args.mesh_velocity], mesh=args.mesh,
        cfl=args.cfl, t_end=args.t_end, out_dir=args.out,
        output_every=args.output_every, threads=args.threads,
        figures=not args.no_figures, verbose=not args.quiet)
    for key, val in overrides.items():
        if not hasattr(cfg, key):
            print(f"unknown config key {key!r}", file=sys.stderr)
            return 2
        cur = getattr(cfg, key)
        typ = type(cur) if cur is not None else str
        setattr(cfg, key, typ(val) if typ is not bool else val.lower() in ("1", "true", "yes"))

    try:
        summary, out_dir = run(cfg)
    except Exception as e:  # structured failure report, nonzero exit
        report = {"status": "error", "error_type": type(e).__name__,
                  "message": str(e)}
        print(json.dumps(report, indent=2), file=sys.stderr)
        return 1
    print(f"done: {summary['steps']} steps to t={summary['t_end']!r}; "
          f"artifacts in {out_dir}")
    for key, val in sorted(summary.get("errors", {}).items()):
        print(f"  {key} = {val:.6e}")
    return 0


def _is_case(name):
    from .cases import case_names
    return name.lower() in case_names()


def _default_out():
    return os.environ.get("ALEFV_OUT", "out")


if __name__ == "__main__":
    sys.exit(main())
