"""File writers: VTK legacy ASCII snapshots and CSV tables.

Formatting is pinned (repr of Python floats) so identical runs produce
byte-identical artifacts.
"""

import numpy as np

CONS_NAMES = ["a1r1", "a1r1u1", "a1r1v1", "a1r1E1",
              "a2r2", "a2r2u2", "a2r2v2", "a2r2E2", "a1"]
PRIM_NAMES = ["rho_s", "u_s", "v_s", "p_s",
              "rho_g", "u_g", "v_g", "p_g", "phi_s"]


def _fmt(x):
    return repr(float(x))


def write_vtk(path, nodes, tris, cell_data, point_data=None, title="snapshot"):
    """Legacy VTK 3.0 ASCII unstructured grid with triangle cells."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(nodes)} double"]
    for x, y in np.asarray(nodes):
        lines.append(f"{_fmt(x)} {_fmt(y)} 0.0")
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    for a, b, c in np.asarray(tris):
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {len(tris)}")
    lines.extend(["5"] * len(tris))
    if cell_data:
        lines.append(f"CELL_DATA {len(tris)}")
        for name, arr in cell_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in np.asarray(arr))
    if point_data:
        lines.append(f"POINT_DATA {len(nodes)}")
        for name, arr in point_data.items():
            arr = np.asarray(arr)
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{_fmt(vx)} {_fmt(vy)} 0.0" for vx, vy in arr)
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(_fmt(v) for v in arr)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_csv(path):
    """-> (header list, 2D float array); '#' lines before the header are
    returned as metadata."""
    meta = []
    with open(path) as f:
        rows = [r.strip() for r in f if r.strip()]
    while rows and rows[0].startswith("#"):
        meta.append(rows.pop(0))
    header = rows[0].split(",")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    return header, data, meta
