"""Deterministic triangulation of the void region of the unit cell.

For r < 1 the void is the square [-1,1]^2 minus a centred disc; for
r >= 1 it degenerates into four congruent corner segments of which only
the one at corner (1,1) is meshed (the solver recovers the rest by
symmetry).  Meshes are built by relaxing interior points between fixed,
size-graded boundary points (a spring/Delaunay iteration), but only on
a fundamental wedge of the symmetry group; the full mesh is assembled
by exact coordinate reflections.  This makes every mesh bit-for-bit
reproducible and exactly symmetric under the coordinate swap
(y1, y2) -> (y2, y1), which the corrector solver relies on.

Quality contract: minimum triangle angle >= 20 degrees away from sharp
domain corners.  Configuration A meets the cell edges tangentially, so
the void has genuine zero-angle cusps there; no triangulation can reach
20 degrees inside such a cusp.  Triangles inside a small disc around a
sharp corner (interior angle < 20 degrees) are therefore exempt from
the angle bound and only checked for positive area; their count and the
exempt radius are recorded on the mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import GeometryDomainError, MeshingError
from .geometry import SQRT2, MicroConfig, tangent_radius

TAG_GRAIN = 1
TAG_OUTER = 2
TAG_NAMES = {TAG_GRAIN: "grain", TAG_OUTER: "outer"}
TAG_VALUES = {v: k for k, v in TAG_NAMES.items()}

#: Angle bound (degrees) that regular triangles must satisfy.
MIN_ANGLE_DEG = 20.0
#: Sanity bound for triangles inside a sharp-corner exemption zone.
MIN_ANGLE_EXEMPT_DEG = 0.02

_TTOL = 0.1
_FSCALE = 1.2
_DELTAT = 0.2
_DPTOL = 0.001
_MAXITER = 90


@dataclass(frozen=True)
class BoundaryLoops:
    """Tagged polygonal outline of the void region at radius r.

    kind is 'square' (hole-free cell), 'cell' (square with hole) or
    'segment' (single corner segment, r >= 1).  Each loop is a closed
    polyline (last point connects back to the first); edge_tags[i][k]
    tags the edge from loops[i][k] to loops[i][k+1].
    """

    r: float
    config: MicroConfig
    h: float
    kind: str
    loops: tuple
    edge_tags: tuple


@dataclass
class CellMesh:
    """Conforming triangle mesh of the void region.

    vertices are 2D points; triangles index into them counterclockwise;
    boundary_edges carry a tag (grain interface or outer cell edge).
    sharp_corners lists (x, y, radius) exemption discs around domain
    corners whose interior angle falls below the quality bound.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    h: float
    r: float
    config: MicroConfig
    kind: str
    arc_center: tuple = (0.0, 0.0)
    arc_radius: float = 0.0
    sharp_corners: tuple = ()

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int32)
        self.boundary_tags = np.ascontiguousarray(self.boundary_tags, dtype=np.int8)
        for arr in (self.vertices, self.triangles,
                    self.boundary_edges, self.boundary_tags):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(np.sum(self.triangle_areas()))

    def min_angles_deg(self) -> np.ndarray:
        """Smallest interior angle of each triangle, in degrees."""
        p = self.vertices[self.triangles]
        angles = np.empty((self.n_triangles, 3))
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            cosv = np.einsum("ij,ij->i", a, b) / np.maximum(na * nb, 1e-300)
            angles[:, k] = np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0)))
        return angles.min(axis=1)

    def exempt_triangle_mask(self) -> np.ndarray:
        """True for triangles touching a sharp-corner exemption disc."""
        mask = np.zeros(self.n_triangles, dtype=bool)
        if not self.sharp_corners:
            return mask
        p = self.vertices[self.triangles]
        for (cx, cy, rad) in self.sharp_corners:
            d = np.linalg.norm(p - np.array([cx, cy]), axis=2)
            mask |= np.any(d <= rad, axis=1)
        return mask


# --------------------------------------------------------------------------
# boundary construction
# --------------------------------------------------------------------------

def _circle_count(r: float, h: float) -> int:
    """Vertex count of the hole polygon, rounded up to a multiple of 8
    so the polygon closes under the dihedral symmetry of the cell."""
    n = max(32, int(math.ceil(2.0 * math.pi * r / h)))
    return ((n + 7) // 8) * 8


def _arc_count(arc_len: float, h: float) -> int:
    return max(16, int(math.ceil(arc_len / h)))


def _segment_geometry(r: float, config: MicroConfig):
    """Arc centre/radius and corners of the (1,1) corner segment.

    Returns (center, arc_radius, A, B, phi_a): A is where the arc meets
    the edge x=1, phi_a its angle seen from the centre, B the cell
    corner (1,1).  The third corner C on y=1 mirrors A across y=x.
    """
    if config is MicroConfig.A:
        rd = float(tangent_radius(r))
        center = (1.0 - rd, 1.0 - rd)
        ra = rd
        a = np.array([1.0, 1.0 - rd])
        phi_a = 0.0
    else:
        center = (0.0, 0.0)
        ra = float(r)
        s = math.sqrt(max(r * r - 1.0, 0.0))
        a = np.array([1.0, s])
        phi_a = math.atan2(s, 1.0)
    return center, ra, a, np.array([1.0, 1.0]), phi_a


def _corner_angle_deg(r: float, config: MicroConfig) -> float:
    """Interior angle of the void where the arc meets a cell edge."""
    if config is MicroConfig.A:
        return 0.0  # tangential contact
    return math.degrees(math.acos(min(1.0, 1.0 / r)))


def _subdivide_by_size(p0, p1, size_fn, n_min: int = 1) -> np.ndarray:
    """Points from p0 toward p1 (p1 itself excluded) spaced by size_fn.

    Walks the segment in steps of the local target size, then rescales
    arc length affinely so the implied closing step lands exactly on p1.
    """
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0.0:
        return p0[None, :]
    direction = (p1 - p0) / length
    ts = [0.0]
    t = 0.0
    for _ in range(500000):
        s = max(float(size_fn((p0 + t * direction)[None, :])[0]), 1e-9)
        t += s
        if t >= length:
            break
        ts.append(t)
    arr = np.asarray(ts)
    if len(arr) < n_min:
        arr = np.linspace(0.0, length, n_min + 1)[:-1]
    if len(arr) > 1:
        close = arr[-1] + max(
            float(size_fn((p0 + arr[-1] * direction)[None, :])[0]), 1e-9
        )
        arr = arr * (length / close)
    return p0[None, :] + arr[:, None] * direction[None, :]


def _walk_arc(center, ra, phi0, phi1, size_fn, n_min: int) -> np.ndarray:
    """Arc points from phi0 to phi1 (both included) graded by size_fn."""
    cx, cy = center
    phis = [phi0]
    phi = phi0
    for _ in range(500000):
        p = np.array([[cx + ra * math.cos(phi), cy + ra * math.sin(phi)]])
        phi += max(float(size_fn(p)[0]) / ra, 1e-9)
        if phi >= phi1:
            break
        phis.append(phi)
    arr = np.asarray(phis)
    if len(arr) < n_min:
        arr = np.linspace(phi0, phi1, n_min + 1)[:-1]
    if len(arr) > 1:
        p_last = np.array(
            [[cx + ra * math.cos(arr[-1]), cy + ra * math.sin(arr[-1])]]
        )
        close = arr[-1] + max(float(size_fn(p_last)[0]) / ra, 1e-9)
        arr = phi0 + (arr - phi0) * ((phi1 - phi0) / (close - phi0))
    angles = np.append(arr, phi1)
    return np.column_stack([cx + ra * np.cos(angles), cy + ra * np.sin(angles)])


def build_cell_boundary(r: float, config: MicroConfig, h: float) -> BoundaryLoops:
    """Tagged boundary loops of the void region at radius r.

    r = 0 yields the hole-free square (used for trivial-solution checks).
    For 0 < r <= 1: outer square loop plus a hole polygon with vertices
    on the exact circle.  For r > 1: the single corner segment in the
    quadrant [0,1]^2, its arc plus two straight edges.
    """
    if not (0.0 < h <= 0.5):
        raise GeometryDomainError(f"mesh size h={h} outside (0, 0.5]")
    if r < 0.0 or r > SQRT2 - 1e-3 + 1e-12:
        raise GeometryDomainError(
            f"radius {r} outside the meshable range [0, sqrt(2)-1e-3]"
        )
    config = MicroConfig.parse(config)
    if r == 0.0:
        square = _square_loop(h)
        return BoundaryLoops(
            r=0.0, config=config, h=h, kind="square",
            loops=(square,),
            edge_tags=(np.full(len(square), TAG_OUTER, np.int8),),
        )
    # r = 1.0 is treated as a segment: the disc touches the cell edges
    # there, pinching the void into four corner regions
    if r < 1.0:
        n = _circle_count(r, h)
        theta = 2.0 * math.pi * np.arange(n) / n
        hole = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        square = _square_loop(h)
        return BoundaryLoops(
            r=float(r), config=config, h=h, kind="cell",
            loops=(square, hole),
            edge_tags=(
                np.full(len(square), TAG_OUTER, np.int8),
                np.full(n, TAG_GRAIN, np.int8),
            ),
        )
    center, ra, a, b, phi_a = _segment_geometry(r, config)
    scale = float(np.linalg.norm(b - a))
    if scale * scale < 2e-8:
        raise GeometryDomainError(
            f"corner segment at r={r} is degenerate (scale {scale:.3e})"
        )
    span = math.pi / 2.0 - 2.0 * phi_a
    n_arc = _arc_count(ra * span, h)
    phis = phi_a + span * np.arange(n_arc + 1) / n_arc
    arc = np.column_stack(
        [center[0] + ra * np.cos(phis), center[1] + ra * np.sin(phis)]
    )
    # loop runs A -> (arc) -> C -> B -> back to A; arc edges grain
    loop = np.vstack([arc, b[None, :]])
    tags = np.full(len(loop), TAG_OUTER, np.int8)
    tags[:n_arc] = TAG_GRAIN
    return BoundaryLoops(
        r=float(r), config=config, h=h, kind="segment",
        loops=(loop,), edge_tags=(tags,),
    )


def _square_loop(h: float) -> np.ndarray:
    k = max(2, int(math.ceil(2.0 / h)))
    side = np.linspace(-1.0, 1.0, k + 1)[:-1]
    return np.vstack([
        np.column_stack([side, np.full(k, -1.0)]),
        np.column_stack([np.full(k, 1.0), side]),
        np.column_stack([-side, np.full(k, 1.0)]),
        np.column_stack([np.full(k, -1.0), -side]),
    ])


# --------------------------------------------------------------------------
# point relaxation core
# --------------------------------------------------------------------------

def _hash01(points: np.ndarray) -> np.ndarray:
    """Deterministic per-point values in [0,1) for density thinning."""
    s = np.sin(points[:, 0] * 12.9898 + points[:, 1] * 78.233) * 43758.5453
    return np.abs(s) - np.floor(np.abs(s))


def _hex_lattice(bbox, spacing):
    (x0, x1), (y0, y1) = bbox
    dx = spacing
    dy = spacing * math.sqrt(3.0) / 2.0
    nx = max(int(math.ceil((x1 - x0) / dx)) + 1, 2)
    ny = max(int(math.ceil((y1 - y0) / dy)) + 1, 2)
    gx, gy = np.meshgrid(x0 + np.arange(nx) * dx, y0 + np.arange(ny) * dy)
    gx[1::2] += dx / 2.0
    return np.column_stack([gx.ravel(), gy.ravel()])


def _make_inside(polygon):
    """Even-odd ray-cast inclusion test against a closed polygon.

    The mesh keeps a triangle iff its centroid lies inside the polygon
    spanned by the fixed boundary points; testing against the exact
    domain instead would misclassify the hair-thin ladder triangles at
    a tangency cusp, whose centroids sit between chord and arc.
    """
    px, py = polygon[:, 0], polygon[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    dy = qy - py
    slope = (qx - px) / np.where(dy == 0.0, 1.0, dy)

    def inside(pts):
        out = np.empty(len(pts), bool)
        for lo in range(0, len(pts), 4096):
            chunk = pts[lo:lo + 4096]
            x = chunk[:, 0][:, None]
            y = chunk[:, 1][:, None]
            spans = (py[None, :] > y) != (qy[None, :] > y)
            xint = px[None, :] + (y - py[None, :]) * slope[None, :]
            hits = spans & (x < xint)
            out[lo:lo + 4096] = (np.count_nonzero(hits, axis=1) % 2).astype(bool)
        return out

    return inside


def _relax_points(fd, fh, inside, lattice_h, bbox, fixed, seeds=None,
                  lattice_fd=None, maxiter=_MAXITER):
    """Spring/Delaunay relaxation; fixed points pinned, the rest move.

    fd drives projection and seeding distances; inside (polygon test)
    decides which Delaunay triangles belong to the domain.  lattice_fd,
    when given, restricts where lattice candidates are sown (ring-seeded
    collars are excluded from the uniform lattice).
    """
    cand = _hex_lattice(bbox, lattice_h)
    cand = cand[(lattice_fd or fd)(cand) < -0.45 * fh(cand)]
    if len(cand):
        sizes = fh(cand)
        keep = _hash01(cand) < (lattice_h / np.maximum(sizes, 1e-12)) ** 2
        cand = cand[keep]
    if seeds is not None and len(seeds):
        cand = np.vstack([seeds, cand]) if len(cand) else np.asarray(seeds)
    if len(cand) and len(fixed):
        tree = cKDTree(fixed)
        dist, _ = tree.query(cand)
        cand = cand[dist > 0.6 * fh(cand)]
    pts = np.vstack([fixed, cand]) if len(cand) else fixed.copy()
    nfix = len(fixed)
    last = pts + 100.0
    edges = None
    for it in range(maxiter):
        if np.max(np.linalg.norm(pts - last, axis=1)) > _TTOL * lattice_h:
            last = pts.copy()
            tris = _interior_triangles(pts, inside)
            edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
            edges.sort(axis=1)
            edges = np.unique(edges, axis=0)
        vec = pts[edges[:, 1]] - pts[edges[:, 0]]
        L = np.linalg.norm(vec, axis=1)
        mid = 0.5 * (pts[edges[:, 0]] + pts[edges[:, 1]])
        hbar = fh(mid)
        L0 = hbar * _FSCALE * math.sqrt(np.sum(L ** 2) / np.sum(hbar ** 2))
        force = np.maximum(L0 - L, 0.0)
        fvec = (force / np.maximum(L, 1e-12))[:, None] * vec
        move = np.zeros_like(pts)
        np.add.at(move, edges[:, 0], -fvec)
        np.add.at(move, edges[:, 1], fvec)
        move[:nfix] = 0.0
        pts = pts + _DELTAT * move
        out = fd(pts) > 0.0
        out[:nfix] = False
        if np.any(out):
            pts[out] = _project(pts[out], fd, lattice_h)
        if it % 14 == 13 and len(pts) > nfix:
            # density control: drop movable points crowding a short edge
            # or hugging the boundary closer than half a local cell
            tris = _interior_triangles(pts, inside)
            ed = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
            ed.sort(axis=1)
            ed = np.unique(ed, axis=0)
            L = np.linalg.norm(pts[ed[:, 1]] - pts[ed[:, 0]], axis=1)
            mid = 0.5 * (pts[ed[:, 0]] + pts[ed[:, 1]])
            short = L < 0.5 * fh(mid)
            dropmask = np.zeros(len(pts), bool)
            dropmask[np.unique(ed[short].max(axis=1))] = True
            dropmask |= fd(pts) > -0.35 * fh(pts)
            dropmask[:nfix] = False
            if np.any(dropmask):
                pts = pts[~dropmask]
            last = pts + 100.0
            continue
        if len(pts) > nfix:
            inner = float(np.max(np.linalg.norm(_DELTAT * move[nfix:], axis=1)))
        else:
            inner = 0.0
        if it > 4 and inner < 8 * _DPTOL * lattice_h:
            break
    near = fd(pts) > -0.35 * fh(pts)
    near[:nfix] = False
    if np.any(near):
        pts = pts[~near]
    tris = _interior_triangles(pts, inside)
    used = np.zeros(len(pts), bool)
    used[tris.ravel()] = True
    if not used[:nfix].all():
        raise MeshingError("fixed boundary point left out of the triangulation")
    remap = -np.ones(len(pts), np.int64)
    remap[used] = np.arange(int(np.count_nonzero(used)))
    return pts[used], remap[tris]


def _interior_triangles(pts, inside):
    simplices = Delaunay(pts).simplices
    cent = pts[simplices].mean(axis=1)
    t = simplices[inside(cent)]
    p = pts[t]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = signed < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return t


def _project(pts, fd, scale):
    eps = 1e-7 * max(scale, 1e-3)
    for _ in range(3):
        d = fd(pts)
        gx = (fd(pts + [eps, 0.0]) - d) / eps
        gy = (fd(pts + [0.0, eps]) - d) / eps
        g2 = np.maximum(gx * gx + gy * gy, 1e-14)
        pts = pts - np.column_stack([d * gx / g2, d * gy / g2])
    return pts


# --------------------------------------------------------------------------
# exact reflections
# --------------------------------------------------------------------------

def _mirror_mesh(pts, tris, transform, seam_mask):
    """Glue the mesh to its reflection; seam vertices are shared."""
    n = len(pts)
    new_index = -np.ones(n, np.int64)
    new_index[seam_mask] = np.flatnonzero(seam_mask)
    free = ~seam_mask
    new_index[free] = n + np.arange(int(np.count_nonzero(free)))
    mirrored_pts = transform(pts[free])
    all_pts = np.vstack([pts, mirrored_pts])
    mtris = new_index[tris][:, [0, 2, 1]]  # reflection flips orientation
    all_tris = np.vstack([tris, mtris])
    return all_pts, all_tris


def _swap(p):
    return p[:, ::-1].copy()


def _flip_x(p):
    q = p.copy()
    q[:, 0] = -q[:, 0]
    return q


def _flip_y(p):
    q = p.copy()
    q[:, 1] = -q[:, 1]
    return q


# --------------------------------------------------------------------------
# triangulate
# --------------------------------------------------------------------------

def triangulate(boundary: BoundaryLoops, h: float | None = None) -> CellMesh:
    """Mesh the void region outlined by the boundary loops.

    The target edge length defaults to the one the boundary was built
    with.  Raises MeshingError with diagnostics if the assembled mesh
    violates the quality contract.
    """
    h_eff = float(h) if h is not None else boundary.h
    if boundary.kind in ("square", "cell"):
        mesh = _mesh_full_cell(boundary.r, boundary.config, h_eff)
    else:
        mesh = _mesh_segment(boundary.r, boundary.config, h_eff)
    validate_mesh(mesh)
    return mesh


def build_mesh(r: float, config: MicroConfig, h: float) -> CellMesh:
    """Convenience wrapper: boundary construction plus triangulation."""
    return triangulate(build_cell_boundary(r, config, h))


def _mesh_full_cell(r: float, config: MicroConfig, h: float) -> CellMesh:
    """Square cell (optionally with the centred hole), via the 1/8 wedge."""
    if r > 0.0:
        n_circle = _circle_count(r, h)
        circ_spacing = 2.0 * math.pi * r / n_circle
    else:
        n_circle = 0
        circ_spacing = h
    grade_gap = r > 0.85

    def slit_width(y):
        # horizontal gap between the circle and the edge x=1 at height y
        dy = np.clip(np.abs(np.asarray(y, float)), 0.0, r)
        return 1.0 - np.sqrt(np.maximum(r * r - dy * dy, 0.0))

    def fh(p):
        s = np.full(len(p), h)
        if r > 0.0:
            rho = np.linalg.norm(p, axis=1)
            s = np.minimum(s, circ_spacing + 0.35 * np.maximum(rho - r, 0.0))
            if grade_gap:
                # resolve the narrow gap between circle and cell edge
                s = np.minimum(
                    s, np.clip(0.42 * slit_width(p[:, 1]), h / 14.0, h)
                )
        return np.maximum(s, 1e-4 * h)

    def fd(p):
        x, y = p[:, 0], p[:, 1]
        d = np.maximum(x - 1.0, np.maximum(-y, y - x))
        if r > 0.0:
            d = np.maximum(d, r - np.linalg.norm(p, axis=1))
        return d

    # ordered boundary polygon of the wedge: axis seam, outer edge,
    # diagonal seam, then the arc traversed back toward the axis
    diag_in = np.array([r / SQRT2, r / SQRT2])
    diag_pts = _subdivide_by_size(np.array([1.0, 1.0]), diag_in, fh)
    slit_fix = None
    if r > 0.0 and grade_gap and (1.0 - r) < 1.2 * h:
        # structured ladder across the slit: every row reuses the same
        # column fractions, so independently walked chains cannot drift
        # out of phase and pinch a sliver against the axis seam
        w0 = 1.0 - r
        s0 = float(np.clip(0.42 * w0, h / 14.0, 0.9 * h))
        ncol = max(1, int(round(w0 / s0)))
        rows = [0.0]
        y = 0.0
        while True:
            s = (1.0 - math.sqrt(r * r - y * y)) / ncol
            y2 = y + s
            if s >= 0.85 * h or y2 > 0.45 * math.sqrt(max(r * r - y2 * y2, 1e-12)):
                break
            y = y2
            rows.append(y)
        frac = np.arange(ncol + 1) / ncol
        grid = []
        for yr in rows:
            xc = math.sqrt(r * r - yr * yr)
            grid.append(
                np.column_stack([xc + (1.0 - xc) * frac, np.full(ncol + 1, yr)])
            )
        seam_pts = grid[0][:-1]
        y_top = rows[-1]
        rung_edge = np.array([g[-1] for g in grid[1:]]).reshape(-1, 2)
        rung_arc = np.array([g[0] for g in grid[1:]]).reshape(-1, 2)
        edge_pts = np.vstack([
            [[1.0, 0.0]], rung_edge,
            _subdivide_by_size(np.array([1.0, y_top]), np.array([1.0, 1.0]), fh)[1:],
        ])
        phi_top = math.asin(min(y_top / r, 1.0))
        walk = _walk_arc(
            (0.0, 0.0), r, phi_top, math.pi / 4.0, fh,
            max(2, n_circle // 8 - 1 - len(rung_arc)),
        )
        wedge_arc = np.vstack([[[r, 0.0]], rung_arc, walk[1:]])
        if ncol > 1 and len(grid) > 1:
            slit_fix = np.vstack([g[1:-1] for g in grid[1:]])
    else:
        seam_pts = _subdivide_by_size(np.array([r, 0.0]), np.array([1.0, 0.0]), fh)
        edge_pts = _subdivide_by_size(np.array([1.0, 0.0]), np.array([1.0, 1.0]), fh)
        if r > 0.0:
            wedge_arc = _walk_arc(
                (0.0, 0.0), r, 0.0, math.pi / 4.0, fh, n_circle // 8
            )
    if r > 0.0:
        n_circle = 8 * (len(wedge_arc) - 1)
        polygon = np.vstack([seam_pts, edge_pts, diag_pts, wedge_arc[::-1][:-1]])
    else:
        polygon = np.vstack([seam_pts, edge_pts, diag_pts])
    ring = _snap_full_cell(_dedupe(polygon), r, tol=1e-12)
    inside = _make_inside(ring)
    pfix = ring if slit_fix is None or not len(slit_fix) else np.vstack(
        [ring, slit_fix]
    )

    # graded rings seed the refined collar around a small hole; the far
    # field is seeded by the uniform lattice at ~h
    seeds = None
    ring_outer = r
    if r > 0.0 and circ_spacing < 0.95 * h:
        rings = []
        rho = r + circ_spacing
        for _ in range(10000):
            s_loc = min(circ_spacing + 0.35 * (rho - r), h)
            m = max(4, int(math.ceil((math.pi / 4.0) * rho / s_loc)))
            th = (math.pi / 4.0) * (np.arange(m) + 0.5) / m
            rings.append(np.column_stack([rho * np.cos(th), rho * np.sin(th)]))
            rho += s_loc
            if s_loc >= 0.95 * h or rho > SQRT2:
                break
        ring_outer = rho
        seeds = np.vstack(rings)
        seeds = seeds[fd(seeds) < -0.2 * fh(seeds)]

    lattice_h = h
    if grade_gap:
        probe = _hex_lattice(((0.0, 1.0), (0.0, 1.0)), h / 3.0)
        probe = probe[fd(probe) < -0.1 * h]
        if len(probe):
            lattice_h = max(float(np.min(fh(probe))), h / 15.0)

    lattice_fd = None
    if seeds is not None:
        def lattice_fd(p):
            return np.maximum(
                fd(p), ring_outer + 0.2 * h - np.linalg.norm(p, axis=1)
            )

    pts, tris = _relax_points(
        fd, fh, inside, lattice_h, ((0.0, 1.0), (0.0, 1.0)), pfix,
        seeds=seeds, lattice_fd=lattice_fd,
    )
    pts = _snap_full_cell(pts, r, tol=1e-9)

    seam = pts[:, 1] == pts[:, 0]
    pts, tris = _mirror_mesh(pts, tris, _swap, seam)
    pts, tris = _mirror_mesh(pts, tris, _flip_x, pts[:, 0] == 0.0)
    pts, tris = _mirror_mesh(pts, tris, _flip_y, pts[:, 1] == 0.0)

    edges, tags = _boundary_edges_full_cell(pts, tris, r)
    return CellMesh(
        vertices=pts, triangles=tris, boundary_edges=edges, boundary_tags=tags,
        h=h, r=r, config=config, kind="cell" if r > 0.0 else "square",
        arc_center=(0.0, 0.0), arc_radius=r, sharp_corners=(),
    )


def _snap_full_cell(pts, r, tol):
    pts = pts.copy()
    pts[np.abs(pts[:, 1]) < tol, 1] = 0.0
    pts[np.abs(pts[:, 0] - 1.0) < tol, 0] = 1.0
    ond = np.abs(pts[:, 1] - pts[:, 0]) < tol
    pts[ond] = (0.5 * (pts[ond, 0] + pts[ond, 1]))[:, None]
    if r > 0.0:
        rho = np.linalg.norm(pts, axis=1)
        onc = np.abs(rho - r) < max(tol, 1e-7 * max(r, 1e-3))
        if np.any(onc):
            pts[onc] = pts[onc] * (r / rho[onc])[:, None]
    return pts


def _mesh_segment(r: float, config: MicroConfig, h: float) -> CellMesh:
    """Corner segment at (1,1) via its half below the diagonal y=x."""
    center, ra, a, b, phi_a = _segment_geometry(r, config)
    cx, cy = center
    scale = float(np.linalg.norm(b - a))
    if scale * scale < 2e-8:
        raise GeometryDomainError(f"corner segment at r={r} is degenerate")
    phi_d = math.pi / 4.0
    # the arc-count floor is folded into the target size so chain and
    # interior spacing stay consistent
    h_seg = min(h, scale / 3.0, ra * (phi_d - phi_a) / 9.0)
    floor = max(h_seg / 9.0, 2e-4 * scale)
    # below ~40 deg a corner wedge tends to relax into two sub-20 deg
    # triangles, so such corners get exemption discs as well
    sharp = _corner_angle_deg(r, config) < 40.0
    ya = float(a[1])

    def arc_x(y):
        dy = np.clip(np.asarray(y, float) - cy, 0.0, ra)
        return cx + np.sqrt(np.maximum(ra * ra - dy * dy, 0.0))

    def width_at(y):
        return 1.0 - arc_x(y)

    def fh(p):
        return np.clip(0.75 * width_at(p[:, 1]), floor, h_seg)

    def fd(p):
        x, y = p[:, 0], p[:, 1]
        d = np.maximum(x - 1.0, y - x)
        d = np.maximum(d, ra - np.linalg.norm(p - [cx, cy], axis=1))
        d = np.maximum(d, ya - y)  # stay inside the (1,1) corner segment
        return d

    dpt = np.array([cx + ra * math.cos(phi_d), cy + ra * math.sin(phi_d)])

    # Narrow strip between the edge x=1 and the arc: build it as an
    # aligned ladder, edge and arc points sharing y-levels, so the strip
    # triangulates into right trapezoids with no chain phase mismatch.
    ys = []
    y = ya
    for _ in range(200000):
        s = float(np.clip(0.75 * width_at(y), floor, 0.9 * h_seg))
        y2 = y + s
        if width_at(y2) >= 0.85 * h_seg:
            break
        if y2 >= float(dpt[1]) - 0.4 * s:
            break
        ys.append(y2)
        y = y2
    if ys:
        lev = np.asarray(ys)
        ladder_edge = np.column_stack([np.ones(len(lev)), lev])
        ladder_arc = np.column_stack([arc_x(lev), lev])
        y_top = float(lev[-1])
        phi_top = math.asin(min(max((y_top - cy) / ra, -1.0), 1.0))
        arc_top = np.array([ladder_arc[-1]])
    else:
        ladder_edge = np.empty((0, 2))
        ladder_arc = np.empty((0, 2))
        y_top = ya
        phi_top = phi_a
        arc_top = np.array([a])

    edge_pts = np.vstack([
        [a], ladder_edge,
        _subdivide_by_size((1.0, y_top), b, fh)[1:],
    ])
    diag_pts = _subdivide_by_size(b, dpt, fh)
    arc_pts = np.vstack([
        [a], ladder_arc,
        _walk_arc((cx, cy), ra, phi_top, phi_d, fh, 2)[1:],
    ])
    polygon = np.vstack([edge_pts, diag_pts, arc_pts[::-1][:-1]])
    pfix = _snap_segment(_dedupe(polygon), center, ra, tol=1e-12)
    inside = _make_inside(pfix)

    lattice_h = max(float(np.min(fh(pfix))), floor)
    bbox = (
        (float(np.min(pfix[:, 0])), 1.0),
        (float(np.min(pfix[:, 1])), 1.0),
    )
    pts, tris = _relax_points(fd, fh, inside, lattice_h, bbox, pfix)
    pts = _snap_segment(pts, center, ra, tol=1e-9)

    seam = pts[:, 1] == pts[:, 0]
    pts, tris = _mirror_mesh(pts, tris, _swap, seam)

    edges, tags = _boundary_edges_segment(pts, tris, center, ra)
    corners = ()
    if sharp:
        # ladder triangles thinner than the 20 degree bound persist out
        # to where the strip width reaches about half the size floor
        y_star = ya
        step = 0.25 * floor
        lim = float(cy + ra)
        for _ in range(200000):
            if width_at(y_star) >= 0.5 * floor or y_star >= lim:
                break
            y_star += step
        rho_ex = 1.3 * (y_star - ya) + 3.0 * floor
        if _corner_angle_deg(r, config) > 5.0:
            # open wedge corners stay fragile through the ladder-to-relax
            # transition, about one target size beyond the clamped zone
            rho_ex += h_seg
        apx, apy = float(a[0]), float(a[1])
        corners = ((apx, apy, rho_ex), (apy, apx, rho_ex))
    return CellMesh(
        vertices=pts, triangles=tris, boundary_edges=edges, boundary_tags=tags,
        h=h, r=r, config=config, kind="segment",
        arc_center=center, arc_radius=ra, sharp_corners=corners,
    )


def _snap_segment(pts, center, ra, tol):
    pts = pts.copy()
    pts[np.abs(pts[:, 0] - 1.0) < tol, 0] = 1.0
    pts[np.abs(pts[:, 1] - 1.0) < tol, 1] = 1.0
    ond = np.abs(pts[:, 1] - pts[:, 0]) < tol
    pts[ond] = (0.5 * (pts[ond, 0] + pts[ond, 1]))[:, None]
    ctr = np.asarray(center)
    rho = np.linalg.norm(pts - ctr, axis=1)
    onc = np.abs(rho - ra) < max(tol, 1e-7)
    if np.any(onc):
        pts[onc] = ctr + (pts[onc] - ctr) * (ra / rho[onc])[:, None]
    return pts


def _dedupe(pts):
    if len(pts) < 2:
        return pts
    tree = cKDTree(pts)
    pairs = tree.query_pairs(1e-11, output_type="ndarray")
    drop = np.zeros(len(pts), bool)
    if len(pairs):
        drop[pairs.max(axis=1)] = True
    return pts[~drop]


# --------------------------------------------------------------------------
# boundary extraction and validation
# --------------------------------------------------------------------------

def _extract_boundary(tris):
    edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    keys = np.sort(edges, axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    return uniq[counts == 1]


def _boundary_edges_full_cell(pts, tris, r):
    bedges = _extract_boundary(tris)
    tags = np.empty(len(bedges), np.int8)
    rho = np.linalg.norm(pts, axis=1)
    on_arc = np.abs(rho - r) < 1e-7 if r > 0.0 else np.zeros(len(pts), bool)
    on_sq = (np.abs(np.abs(pts[:, 0]) - 1.0) < 1e-12) | (
        np.abs(np.abs(pts[:, 1]) - 1.0) < 1e-12
    )
    for k, (i, j) in enumerate(bedges):
        if on_arc[i] and on_arc[j]:
            tags[k] = TAG_GRAIN
        elif on_sq[i] and on_sq[j]:
            tags[k] = TAG_OUTER
        else:
            raise MeshingError(
                f"boundary edge {pts[i]}-{pts[j]} lies on no tagged feature"
            )
    return bedges, tags


def _boundary_edges_segment(pts, tris, center, ra):
    bedges = _extract_boundary(tris)
    tags = np.empty(len(bedges), np.int8)
    rho = np.linalg.norm(pts - np.asarray(center), axis=1)
    on_arc = np.abs(rho - ra) < 1e-7
    for k, (i, j) in enumerate(bedges):
        if on_arc[i] and on_arc[j]:
            tags[k] = TAG_GRAIN
        elif (pts[i, 0] == 1.0 and pts[j, 0] == 1.0) or (
            pts[i, 1] == 1.0 and pts[j, 1] == 1.0
        ):
            tags[k] = TAG_OUTER
        else:
            raise MeshingError(
                f"boundary edge {pts[i]}-{pts[j]} lies on no tagged feature"
            )
    return bedges, tags


def validate_mesh(mesh: CellMesh) -> dict:
    """Check all mesh invariants; raise MeshingError on violation.

    Returns a diagnostics dict (counts, area, worst angles) on success.
    """
    pts, tris = mesh.vertices, mesh.triangles
    if len(pts) < 3 or len(tris) < 1:
        raise MeshingError("mesh is empty")
    tree = cKDTree(pts)
    pairs = tree.query_pairs(1e-12)
    if pairs:
        raise MeshingError(f"duplicate vertices within 1e-12: {sorted(pairs)[:3]}")
    areas = mesh.triangle_areas()
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise MeshingError(f"non-positive triangle {bad}: area {areas[bad]:.3e}")
    edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    keys = np.sort(edges, axis=1)
    _, counts = np.unique(keys, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshingError("non-manifold edge (shared by more than 2 triangles)")
    n_bound = int(np.count_nonzero(counts == 1))
    if n_bound != len(mesh.boundary_edges):
        raise MeshingError(
            f"boundary bookkeeping mismatch: {n_bound} free edges, "
            f"{len(mesh.boundary_edges)} recorded"
        )
    angles = mesh.min_angles_deg()
    exempt = mesh.exempt_triangle_mask()
    regular_min = float(angles[~exempt].min()) if np.any(~exempt) else 90.0
    exempt_min = float(angles[exempt].min()) if np.any(exempt) else 90.0
    if regular_min < MIN_ANGLE_DEG:
        worst = int(np.flatnonzero(~exempt)[np.argmin(angles[~exempt])])
        raise MeshingError(
            f"quality target unreachable: min angle {regular_min:.2f} deg "
            f"< {MIN_ANGLE_DEG} at triangle {worst} "
            f"(centroid {pts[tris[worst]].mean(axis=0)}, h={mesh.h}, r={mesh.r})"
        )
    if exempt_min < MIN_ANGLE_EXEMPT_DEG:
        raise MeshingError(
            f"degenerate sliver in corner exemption zone: {exempt_min:.4f} deg"
        )
    gedges = mesh.boundary_edges[mesh.boundary_tags == TAG_GRAIN]
    if len(gedges):
        gverts = np.unique(gedges)
        cx, cy = mesh.arc_center
        dev = np.abs(
            np.linalg.norm(pts[gverts] - [cx, cy], axis=1) - mesh.arc_radius
        )
        if float(dev.max()) > mesh.h ** 2:
            raise MeshingError(f"grain vertex off the arc by {dev.max():.2e}")
    return {
        "n_vertices": len(pts),
        "n_triangles": len(tris),
        "area": float(np.sum(areas)),
        "min_angle_regular": regular_min,
        "min_angle_exempt": exempt_min,
        "n_exempt": int(np.count_nonzero(exempt)),
    }


# --------------------------------------------------------------------------
# plain-text dump
# --------------------------------------------------------------------------

def save_mesh(mesh: CellMesh, path, extra_column=None):
    """Write the mesh (optionally with one nodal value column) as text.

    Format: header 'vertices <n> triangles <m>', then n vertex lines
    'x y [value]', m triangle lines 'i j k', and one line per boundary
    edge 'i j tag' with tag in {grain, outer}.
    """
    lines = [f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}"]
    if extra_column is None:
        lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.vertices)
    else:
        vals = np.asarray(extra_column, float)
        lines.extend(
            f"{x:.17g} {y:.17g} {w:.17g}"
            for (x, y), w in zip(mesh.vertices, vals)
        )
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles)
    lines.extend(
        f"{i} {j} {TAG_NAMES[int(t)]}"
        for (i, j), t in zip(mesh.boundary_edges, mesh.boundary_tags)
    )
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def load_mesh(path):
    """Read a mesh dump written by save_mesh.

    Returns (mesh, values) where values is the optional nodal column
    (None when absent).  Geometric metadata is reconstructed from the
    vertex data, which suffices for re-solving and inspection.
    """
    with open(path) as handle:
        raw = handle.read().split("\n")
    head = raw[0].split()
    if len(head) != 4 or head[0] != "vertices" or head[2] != "triangles":
        raise MeshingError(f"malformed mesh header: {raw[0]!r}")
    nv, nt = int(head[1]), int(head[3])
    vrows = [ln.split() for ln in raw[1:1 + nv]]
    if any(len(row) not in (2, 3) for row in vrows):
        raise MeshingError("malformed vertex line in mesh dump")
    verts = np.array([[float(row[0]), float(row[1])] for row in vrows])
    values = (
        np.array([float(row[2]) for row in vrows])
        if vrows and len(vrows[0]) == 3 else None
    )
    tris = np.array(
        [[int(v) for v in ln.split()] for ln in raw[1 + nv:1 + nv + nt]],
        dtype=np.int32,
    )
    bed, btags = [], []
    for ln in raw[1 + nv + nt:]:
        if not ln.strip():
            continue
        i, j, name = ln.split()
        if name not in TAG_VALUES:
            raise MeshingError(f"unknown boundary tag {name!r}")
        bed.append((int(i), int(j)))
        btags.append(TAG_VALUES[name])
    bed = np.asarray(bed, np.int32).reshape(-1, 2)
    btags = np.asarray(btags, np.int8)
    kind = "cell" if float(verts.min()) < -0.5 else "segment"
    gverts = np.unique(bed[btags == TAG_GRAIN]) if len(bed) else np.array([], int)
    if len(gverts) == 0:
        center, ra, r_guess = (0.0, 0.0), 0.0, 0.0
        kind = "square" if kind == "cell" else kind
    elif kind == "cell":
        ra = float(np.linalg.norm(verts[gverts], axis=1).mean())
        center, r_guess = (0.0, 0.0), ra
    else:
        g = verts[gverts]
        # arc centre lies on the diagonal; fit by minimising radial spread
        cands = np.linspace(-1.5, 1.0, 5001)
        d = np.linalg.norm(
            g[None, :, :] - np.stack([cands, cands], axis=1)[:, None, :], axis=2
        )
        spread = d.max(axis=1) - d.min(axis=1)
        kbest = int(np.argmin(spread))
        bc = float(cands[kbest])
        ra = float(d[kbest].mean())
        if abs(bc) < 2e-4:
            center, r_guess = (0.0, 0.0), ra
        else:
            center = (bc, bc)
            r_guess = SQRT2 - (1.0 - bc) * (SQRT2 - 1.0)
    mesh = CellMesh(
        vertices=verts, triangles=tris, boundary_edges=bed, boundary_tags=btags,
        h=float("nan"), r=float(r_guess), config=MicroConfig.A, kind=kind,
        arc_center=center, arc_radius=float(ra), sharp_corners=(),
    )
    return mesh, values
