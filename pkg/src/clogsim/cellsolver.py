"""Linear-triangle solver for the pore-scale corrector problems.

The corrector w_j satisfies a Laplace equation on the void region with
prescribed normal flux -n_j on the grain interface and a zero trace on
the outer cell boundary, i.e. the total potential y_j + w_j is pinned
to its affine profile on the edges shared with neighboring cells.  The
reported field is mean-normalized.

The affine pinning gives the tortuosity multiplier an energy form,
tau = (1/A) integral |grad(y_1 + w_1)|^2, so 0 < tau <= 1 for every
void shape, and it stays continuous through the touching transition at
r = 1 where the void splits into four corner segments: the segment
problem is the same Dirichlet problem restricted to one component.  A
pure zero-flux variant instead produces tau = |Y|/A >= 1 (the total
potential is then forced to carry the full unit flux through a
shrinking void), which is unusable as a clogging coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cellmesh import TAG_GRAIN, TAG_OUTER, CellMesh, save_mesh
from .errors import CellSolveError
from .geometry import MicroConfig

SOLVER_TOL = 1e-10

__all__ = [
    "SOLVER_TOL",
    "CorrectorField",
    "EffectiveCoeff",
    "assemble_laplace",
    "boundary_load",
    "boundary_normals",
    "solve_corrector",
    "solve_cell",
    "tortuosity",
    "dump_corrector",
]


@dataclass
class CorrectorField:
    """Nodal corrector values for one coordinate direction."""

    mesh: CellMesh
    values: np.ndarray
    direction: int
    residual: float


@dataclass(frozen=True)
class EffectiveCoeff:
    """Tortuosity multiplier at one radius."""

    r: float
    config: MicroConfig
    h: float
    tau_hat: float
    tau_offdiag: float


def _gradients(mesh: CellMesh):
    """Per-triangle shape gradients and areas.

    Returns (bx, by, area): bx[e, i] is the x-derivative of the hat
    function of local vertex i on element e.
    """
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    bx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], 1)
    by = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], 1)
    area2 = x[:, 0] * bx[:, 0] + x[:, 1] * bx[:, 1] + x[:, 2] * bx[:, 2]
    if np.any(area2 < 2e-14):
        raise CellSolveError(
            f"degenerate element: area {float(np.min(area2)) / 2.0:.3e}"
        )
    return bx / area2[:, None], by / area2[:, None], 0.5 * area2


def assemble_laplace(mesh: CellMesh):
    """Stiffness matrix and lumped node masses (integrals of hats)."""
    bx, by, area = _gradients(mesh)
    ke = (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :])
    ke *= area[:, None, None]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    stiff = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mass = np.zeros(n)
    np.add.at(mass, tri.ravel(), np.repeat(area / 3.0, 3))
    return stiff, mass


def boundary_normals(mesh: CellMesh, tag: int):
    """Outward unit normals and lengths of the boundary edges of one tag.

    Outward means away from the meshed void, i.e. into the grain for
    interface edges.  Orientation comes from the adjacent triangle.
    """
    sel = np.flatnonzero(mesh.boundary_tags == tag)
    edges = mesh.boundary_edges[sel]
    if len(edges) == 0:
        return edges, np.empty((0, 2)), np.empty(0)
    # locate the unique triangle owning each boundary edge
    tri = mesh.triangles
    owner_third = np.full(len(edges), -1, np.int64)
    ekey = {tuple(sorted(e)): k for k, e in enumerate(map(tuple, edges))}
    for t in tri:
        for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            k = ekey.get(tuple(sorted((t[a], t[b]))))
            if k is not None:
                owner_third[k] = t[c]
    if np.any(owner_third < 0):
        raise CellSolveError("boundary edge without an owning triangle")
    p0 = mesh.vertices[edges[:, 0]]
    p1 = mesh.vertices[edges[:, 1]]
    tangent = p1 - p0
    lengths = np.linalg.norm(tangent, axis=1)
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
    flip = np.einsum(
        "ij,ij->i", normals, 0.5 * (p0 + p1) - mesh.vertices[owner_third]
    ) < 0.0
    normals[flip] *= -1.0
    return edges, normals, lengths


def boundary_load(mesh: CellMesh, g_edges: np.ndarray, tag: int) -> np.ndarray:
    """Nodal load vector for edgewise-constant flux data g on one tag."""
    sel = np.flatnonzero(mesh.boundary_tags == tag)
    edges = mesh.boundary_edges[sel]
    p0 = mesh.vertices[edges[:, 0]]
    p1 = mesh.vertices[edges[:, 1]]
    w = 0.5 * np.linalg.norm(p1 - p0, axis=1) * np.asarray(g_edges)
    b = np.zeros(mesh.n_vertices)
    np.add.at(b, edges[:, 0], w)
    np.add.at(b, edges[:, 1], w)
    return b


def _outer_nodes(mesh: CellMesh) -> np.ndarray:
    """Boolean mask of vertices on the outer (cell-edge) boundary."""
    fixed = np.zeros(mesh.n_vertices, bool)
    sel = mesh.boundary_tags == TAG_OUTER
    fixed[mesh.boundary_edges[sel].ravel()] = True
    return fixed


def solve_corrector(mesh: CellMesh, direction: int) -> CorrectorField:
    """Solve one corrector problem, direction 1 or 2.

    Interface flux -n_j on the grain edges, w_j = 0 on the outer
    boundary, direct sparse factorization, mean-normalized result.  A
    hole-free mesh short-circuits to the exact zero field.
    """
    if direction not in (1, 2):
        raise CellSolveError(f"direction must be 1 or 2, got {direction}")
    edges, normals, _ = boundary_normals(mesh, TAG_GRAIN)
    if len(edges) == 0:
        return CorrectorField(mesh, np.zeros(mesh.n_vertices), direction, 0.0)
    stiff, mass = assemble_laplace(mesh)
    load = boundary_load(mesh, -normals[:, direction - 1], TAG_GRAIN)
    if mesh.kind != "segment" and abs(float(load.sum())) > 1e-10:
        # a closed interface polygon carries zero net flux exactly
        raise CellSolveError(
            f"closed interface carries net flux {float(load.sum()):.3e}"
        )
    fixed = _outer_nodes(mesh)
    keep = (~fixed).astype(float)
    sys = sp.diags(keep) @ stiff + sp.diags(fixed.astype(float))
    load = load * keep
    w = spla.splu(sys.tocsc()).solve(load)
    res = sys @ w - load
    rel = float(np.linalg.norm(res) / max(np.linalg.norm(load), 1e-300))
    if rel > SOLVER_TOL:
        raise CellSolveError(f"corrector residual {rel:.3e} above tolerance")
    mean = float(mass @ w) / float(mass.sum())
    return CorrectorField(mesh, w - mean, direction, rel)


def tortuosity(field: CorrectorField) -> EffectiveCoeff:
    """Tortuosity multiplier from a corrector field.

    For the corner segment the void consists of four congruent pieces;
    the diagonal derivative dw_j/dy_j is invariant under both axis
    reflections, so the per-segment mean equals the cell mean, while
    the cross derivative is odd under one of them, so its cell mean
    vanishes identically and is reported as exactly zero.
    """
    mesh = field.mesh
    bx, by, area = _gradients(mesh)
    w = field.values[mesh.triangles]
    gx = float(np.sum(area * np.sum(bx * w, axis=1)))
    gy = float(np.sum(area * np.sum(by * w, axis=1)))
    total = float(area.sum())
    if field.direction == 1:
        tau = 1.0 + gx / total
        off = gy / total
    else:
        tau = 1.0 + gy / total
        off = gx / total
    if mesh.kind == "segment":
        off = 0.0
    return EffectiveCoeff(
        r=mesh.r, config=mesh.config, h=mesh.h,
        tau_hat=tau, tau_offdiag=off,
    )


def solve_cell(mesh: CellMesh) -> EffectiveCoeff:
    """Corrector solve plus tortuosity in one call (direction 1)."""
    return tortuosity(solve_corrector(mesh, 1))


def dump_corrector(field: CorrectorField, path) -> None:
    """Write the mesh with the nodal corrector as an extra column."""
    save_mesh(field.mesh, path, extra_column=field.values)
