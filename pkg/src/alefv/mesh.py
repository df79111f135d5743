"""Unstructured triangular mesh with moving vertices.

Connectivity (Neumann neighbors, node incidence, faces, periodic pairing) is
built once and never changes; only vertex positions move.  During a time step
the mesh holds two geometry levels (t^n and t^{n+1}) because the space-time
faces need both.

Periodic boundaries are handled without ghost elements: the partner element
across a periodic face is wired directly into the adjacency, together with
the period shift that maps its coordinates next to the owner element.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import dof_count

# boundary tag codes
INTERIOR = 0
TRANSMISSIVE = 1
WALL = 2

TAG_NAMES = {TRANSMISSIVE: "transmissive", WALL: "wall"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}

# local edge k connects local vertices (k, k+1 mod 3)
EDGE_VERTS = np.array([[0, 1], [1, 2], [2, 0]])


class MeshError(Exception):
    pass


class NonManifoldError(MeshError):
    pass


class TangledMeshError(MeshError):
    pass


@dataclass
class Geometry:
    """Derived geometric quantities for one set of vertex positions."""
    nodes: np.ndarray       # (Nv, 2)
    tri_coords: np.ndarray  # (Ne, 3, 2)
    area: np.ndarray        # (Ne,) signed, positive for valid meshes
    bary: np.ndarray        # (Ne, 2)
    jac: np.ndarray         # (Ne, 2, 2) columns X2-X1, X3-X1
    jac_inv: np.ndarray
    edge_len: np.ndarray    # (Ne, 3)
    incircle: np.ndarray    # (Ne,)


def compute_geometry(nodes, tris):
    tc = nodes[tris]
    d1 = tc[:, 1] - tc[:, 0]
    d2 = tc[:, 2] - tc[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    jac = np.stack([d1, d2], axis=-1)
    inv = np.empty_like(jac)
    inv[:, 0, 0] = d2[:, 1]
    inv[:, 0, 1] = -d2[:, 0]
    inv[:, 1, 0] = -d1[:, 1]
    inv[:, 1, 1] = d1[:, 0]
    inv /= det[:, None, None]
    edge_vec = tc[:, [1, 2, 0]] - tc[:, [0, 1, 2]]
    elen = np.linalg.norm(edge_vec, axis=2)
    peri = elen.sum(axis=1)
    return Geometry(nodes=nodes, tri_coords=tc, area=area,
                    bary=tc.mean(axis=1), jac=jac, jac_inv=inv,
                    edge_len=elen, incircle=2.0 * area / peri)


def min_angle_deg(geom):
    a, b, c = geom.edge_len[:, 0], geom.edge_len[:, 1], geom.edge_len[:, 2]
    angles = []
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        cosv = np.clip((y**2 + z**2 - x**2) / (2 * y * z), -1, 1)
        angles.append(np.arccos(cosv))
    return np.degrees(np.min(angles))


@dataclass
class StencilSet:
    """Fixed reconstruction stencils: 7 per element, n_e = 2*n_modes members."""
    M: int
    n_e: int
    members: np.ndarray   # (Ne, 7, n_e) element ids
    shifts: np.ndarray    # (Ne, 7, n_e, 2) period shift to apply to member coords
    starved: int          # stencils that needed central-growth fill


class MovingMesh:
    """Triangulation with static connectivity and movable vertices."""

    def __init__(self, nodes, tris, boundary_edge_tags=None, periodic_pairs=()):
        """boundary_edge_tags: dict {(a, b): tag_code} with unordered node ids;
        periodic_pairs: iterable of (node_a, node_b) identifications."""
        self.nodes0 = np.asarray(nodes, dtype=float).copy()
        self.tris = np.ascontiguousarray(tris, dtype=np.int64)
        self.n_elems = len(self.tris)
        self.n_nodes = len(self.nodes0)

        self._canon = self._build_node_groups(periodic_pairs)
        self._build_connectivity(boundary_edge_tags or {})
        self._build_node_incidence()
        self._build_faces()

        self.geom = compute_geometry(self.nodes0, self.tris)
        if np.any(self.geom.area <= 0):
            bad = int(np.argmin(self.geom.area))
            raise MeshError(f"triangle {bad} is not counterclockwise (area {self.geom.area[bad]:.3e})")
        self.geom_new = None
        self.min_angle_warning = min_angle_deg(self.geom) < 1.0
        self._stencil_cache = {}

    # -- connectivity -------------------------------------------------------

    def _build_node_groups(self, periodic_pairs):
        parent = np.arange(self.n_nodes)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in periodic_pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        canon = np.array([find(x) for x in range(self.n_nodes)])
        groups = {}
        for k in range(self.n_nodes):
            groups.setdefault(canon[k], []).append(k)
        self.periodic_groups = [np.array(v) for v in groups.values() if len(v) > 1]
        return canon

    def _build_connectivity(self, boundary_edge_tags):
        canon = self._canon
        edges = {}
        for e in range(self.n_elems):
            for k in range(3):
                a, b = self.tris[e, EDGE_VERTS[k]]
                key = (min(canon[a], canon[b]), max(canon[a], canon[b]))
                edges.setdefault(key, []).append((e, k))

        self.neighbor = np.full((self.n_elems, 3), -1, dtype=np.int64)
        self.neighbor_edge = np.full((self.n_elems, 3), -1, dtype=np.int64)
        self.neighbor_shift = np.zeros((self.n_elems, 3, 2))
        self.boundary_tag = np.zeros((self.n_elems, 3), dtype=np.int64)

        tag_by_key = {}
        for (a, b), tag in boundary_edge_tags.items():
            tag_by_key[(min(canon[a], canon[b]), max(canon[a], canon[b]))] = tag

        for key, sides in edges.items():
            if len(sides) > 2:
                raise NonManifoldError(f"edge {key} shared by {len(sides)} triangles")
            if len(sides) == 1:
                e, k = sides[0]
                self.boundary_tag[e, k] = tag_by_key.get(key, TRANSMISSIVE)
                continue
            (e1, k1), (e2, k2) = sides
            self.neighbor[e1, k1], self.neighbor_edge[e1, k1] = e2, k2
            self.neighbor[e2, k2], self.neighbor_edge[e2, k2] = e1, k1
            # period shift mapping e2's copy of the edge onto e1's copy
            a1 = self.tris[e1, EDGE_VERTS[k1, 0]]
            a2, b2 = self.tris[e2, EDGE_VERTS[k2]]
            m2 = a2 if canon[a2] == canon[a1] else b2
            shift = self.nodes0[a1] - self.nodes0[m2]
            self.neighbor_shift[e1, k1] = shift
            self.neighbor_shift[e2, k2] = -shift

    def _build_node_incidence(self):
        order = np.argsort(self.tris.ravel(), kind="stable")
        elems = order // 3
        locs = order % 3
        nodes_sorted = self.tris.ravel()[order]
        counts = np.bincount(nodes_sorted, minlength=self.n_nodes)
        self.node_elem_ptr = np.concatenate([[0], np.cumsum(counts)])
        self.node_elems = elems
        self.node_elem_loc = locs

    def _build_faces(self):
        """One record per geometric face; periodic pairs share one record."""
        fl_e, fl_k, fr_e, fr_k, tags = [], [], [], [], []
        for e in range(self.n_elems):
            for k in range(3):
                j = self.neighbor[e, k]
                if j < 0:
                    fl_e.append(e); fl_k.append(k)
                    fr_e.append(-1); fr_k.append(-1)
                    tags.append(self.boundary_tag[e, k])
                elif (j, self.neighbor_edge[e, k]) > (e, k):
                    fl_e.append(e); fl_k.append(k)
                    fr_e.append(j); fr_k.append(self.neighbor_edge[e, k])
                    tags.append(INTERIOR)
        self.face_elem_l = np.array(fl_e, dtype=np.int64)
        self.face_edge_l = np.array(fl_k, dtype=np.int64)
        self.face_elem_r = np.array(fr_e, dtype=np.int64)
        self.face_edge_r = np.array(fr_k, dtype=np.int64)
        self.face_tag = np.array(tags, dtype=np.int64)
        self.n_faces = len(self.face_elem_l)
        # trace evaluation assumes the right side walks its edge backwards
        for f in np.nonzero(self.face_elem_r >= 0)[0]:
            al = self.tris[self.face_elem_l[f], EDGE_VERTS[self.face_edge_l[f], 0]]
            br = self.tris[self.face_elem_r[f], EDGE_VERTS[self.face_edge_r[f], 1]]
            if self._canon[al] != self._canon[br]:
                raise MeshError("inconsistent edge orientation across face "
                                f"{f} (elements {self.face_elem_l[f]}, {self.face_elem_r[f]})")

    # -- reference mapping ---------------------------------------------------

    def map_ref_to_phys(self, elem, xieta, level="n"):
        geom = self.geom if level == "n" else self._require_new()
        xieta = np.asarray(xieta, dtype=float)
        return geom.tri_coords[elem, 0] + xieta @ geom.jac[elem].T

    def _require_new(self):
        if self.geom_new is None:
            raise MeshError("geometry at t^{n+1} not available; call move_vertices first")
        return self.geom_new

    # -- stencils -------------------------------------------------------------

    def build_stencils(self, M):
        if M in self._stencil_cache:
            return self._stencil_cache[M]
        n_e = 2 * dof_count(M)
        members = np.empty((self.n_elems, 7, n_e), dtype=np.int64)
        shifts = np.zeros((self.n_elems, 7, n_e, 2))
        starved = 0
        bary = self.geom.bary
        tc = self.geom.tri_coords
        for i in range(self.n_elems):
            central, cshift = self._grow(i, n_e, None)
            members[i, 0, :], shifts[i, 0] = central, cshift
            for s in range(1, 7):
                v = (s - 1) % 3
                d1 = tc[i, (v + 1) % 3] - tc[i, v]
                d2 = tc[i, (v + 2) % 3] - tc[i, v]
                if s >= 4:
                    d1, d2 = -d1, -d2
                det = d1[0] * d2[1] - d1[1] * d2[0]
                tol = -1e-9 * np.sqrt(abs(det))

                def admit(j, shift, d1=d1, d2=d2, det=det, tol=tol, bi=bary[i]):
                    r = bary[j] + shift - bi
                    alpha = (r[0] * d2[1] - r[1] * d2[0]) / det
                    beta = (d1[0] * r[1] - d1[1] * r[0]) / det
                    return alpha >= tol and beta >= tol

                mem, msh = self._grow(i, n_e, admit)
                if len(mem) < n_e:
                    starved += 1
                    have = set(mem)
                    for j, sh in zip(central, cshift):
                        if j not in have:
                            mem.append(j); msh.append(sh); have.add(j)
                            if len(mem) == n_e:
                                break
                if len(mem) < n_e:
                    raise MeshError(f"mesh too small for {n_e}-element stencils (element {i})")
                members[i, s, :] = mem
                shifts[i, s] = msh
        out = StencilSet(M=M, n_e=n_e, members=members, shifts=shifts, starved=starved)
        self._stencil_cache[M] = out
        return out

    def _grow(self, i, n_e, admit):
        """Breadth-first over Neumann adjacency, index-sorted per ring."""
        members = [i]
        shifts = [np.zeros(2)]
        seen = {i}
        frontier = [(i, np.zeros(2))]
        while len(members) < n_e and frontier:
            ring = []
            for e, sh in frontier:
                for k in range(3):
                    j = self.neighbor[e, k]
                    if j < 0 or j in seen:
                        continue
                    jsh = sh + self.neighbor_shift[e, k]
                    if admit is None or admit(j, jsh):
                        seen.add(j)
                        ring.append((j, jsh))
            ring.sort(key=lambda t: t[0])
            for j, jsh in ring:
                if len(members) < n_e:
                    members.append(j)
                    shifts.append(jsh)
            frontier = ring
        return members, shifts

    # -- motion ---------------------------------------------------------------

    def move_vertices(self, vbar, dt):
        """Stage geometry at t^{n+1} = t^n + dt; both levels stay available."""
        new_nodes = self.geom.nodes + dt * np.asarray(vbar)
        geom = compute_geometry(new_nodes, self.tris)
        if np.any(geom.area <= 0):
            bad = int(np.argmin(geom.area))
            raise TangledMeshError(
                f"mesh tangled: triangle {bad} has area {geom.area[bad]:.3e} after motion")
        self.geom_new = geom
        return geom

    def commit(self):
        """Promote the staged geometry to the current level."""
        self.geom = self._require_new()
        self.geom_new = None

    def total_area(self, level="n"):
        geom = self.geom if level == "n" else self._require_new()
        return geom.area.sum()


# -- generators ---------------------------------------------------------------

def generate_structured_mesh(nx, ny=None, domain=(-10.0, 10.0, -10.0, 10.0),
                             periodic=(True, True), tag_x=TRANSMISSIVE, tag_y=TRANSMISSIVE):
    """nx-by-ny squares split into 2 triangles each (N_E = 2*nx*ny)."""
    if ny is None:
        ny = nx
    x0, x1, y0, y1 = domain
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    c = 0
    for j in range(ny):
        for i in range(nx):
            a, b = nid(i, j), nid(i + 1, j)
            cc, d = nid(i + 1, j + 1), nid(i, j + 1)
            tris[c] = (a, b, cc); tris[c + 1] = (a, cc, d)
            c += 2

    pairs = []
    tags = {}
    if periodic[0]:
        pairs += [(nid(0, j), nid(nx, j)) for j in range(ny + 1)]
    else:
        for j in range(ny):
            tags[(nid(0, j), nid(0, j + 1))] = tag_x
            tags[(nid(nx, j), nid(nx, j + 1))] = tag_x
    if periodic[1]:
        pairs += [(nid(i, 0), nid(i, ny)) for i in range(nx + 1)]
    else:
        for i in range(nx):
            tags[(nid(i, 0), nid(i + 1, 0))] = tag_y
            tags[(nid(i, ny), nid(i + 1, ny))] = tag_y
    return MovingMesh(nodes, tris, boundary_edge_tags=tags, periodic_pairs=pairs)


def generate_disc_mesh(h, radius=1.0, tag=TRANSMISSIVE):
    """Disc triangulation with characteristic spacing h: concentric rings
    of nodes, Delaunay-connected."""
    from scipy.spatial import Delaunay

    n_rings = max(2, int(round(radius / h)))
    pts = [(0.0, 0.0)]
    for k in range(1, n_rings + 1):
        r = radius * k / n_rings
        n = max(6, int(round(2 * np.pi * r / h)))
        off = 0.5 * (k % 2)  # stagger alternate rings for better quality
        ang = 2 * np.pi * (np.arange(n) + off) / n
        pts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    nodes = np.array(pts)
    dela = Delaunay(nodes)
    tris = dela.simplices.astype(np.int64)
    tc = nodes[tris]
    u, v = tc[:, 1] - tc[:, 0], tc[:, 2] - tc[:, 0]
    det = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    tris[det < 0] = tris[det < 0][:, ::-1]
    # drop slivers on the hull (collinear ring points)
    keep = 0.5 * np.abs(det) > 1e-12 * h * h
    tris = tris[keep]
    tags = {}
    boundary_start = len(nodes) - max(6, int(round(2 * np.pi * radius / h)))
    nb = len(nodes) - boundary_start
    for i in range(nb):
        a = boundary_start + i
        b = boundary_start + (i + 1) % nb
        tags[(a, b)] = tag
    return MovingMesh(nodes, tris, boundary_edge_tags=tags)


# -- plain-text import/export ---------------------------------------------------

def write_mesh(path, mesh):
    """Header counts, node coordinates, 1-based triangles, tagged boundary edges."""
    lines = []
    bedges = []
    for e in range(mesh.n_elems):
        for k in range(3):
            if mesh.neighbor[e, k] < 0:
                a, b = mesh.tris[e, EDGE_VERTS[k]]
                bedges.append((a + 1, b + 1, TAG_NAMES[mesh.boundary_tag[e, k]]))
    lines.append(f"{mesh.n_nodes} {mesh.n_elems} {len(bedges)}")
    for x, y in mesh.geom.nodes:
        lines.append(f"{float(x)!r} {float(y)!r}")
    for t in mesh.tris:
        lines.append(f"{t[0] + 1} {t[1] + 1} {t[2] + 1}")
    for a, b, tag in bedges:
        lines.append(f"{a} {b} {tag}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_mesh(path):
    with open(path) as f:
        tokens = f.read().split("\n")
    rows = [t.split() for t in tokens if t.strip()]
    nn, ne, nb = (int(v) for v in rows[0])
    nodes = np.array([[float(v) for v in r] for r in rows[1:1 + nn]])
    tris = np.array([[int(v) - 1 for v in r] for r in rows[1 + nn:1 + nn + ne]], dtype=np.int64)
    tags = {}
    for r in rows[1 + nn + ne:1 + nn + ne + nb]:
        a, b = int(r[0]) - 1, int(r[1]) - 1
        tags[(a, b)] = TAG_CODES[r[2]]
    return MovingMesh(nodes, tris, boundary_edge_tags=tags)
