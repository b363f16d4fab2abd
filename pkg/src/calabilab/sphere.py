"""
Icosphere discretization of the unit sphere: cotangent stiffness, lumped mass and P1 gradients.

The lumped mass is rescaled so that the total background area is exactly 4*pi; with that
normalization the discrete Gauss-Bonnet identity holds to round-off.
"""
import inspect
import logging
import math
from functools import cached_property
from typing import Tuple

import numpy as np
from attr import attrib, attrs, validators
from scipy import sparse
from scipy.sparse import linalg as splinalg
from scipy.spatial import cKDTree

from .errors import StepFailure

logger = logging.getLogger(__name__)

IMPLICIT_RESIDUAL = 1e-10
_CG_TOLERANCE = "rtol" if "rtol" in inspect.signature(splinalg.cg).parameters else "tol"

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

ICOSAHEDRON_VERTICES = np.array(
    [
        [-1.0, _GOLDEN, 0.0],
        [1.0, _GOLDEN, 0.0],
        [-1.0, -_GOLDEN, 0.0],
        [1.0, -_GOLDEN, 0.0],
        [0.0, -1.0, _GOLDEN],
        [0.0, 1.0, _GOLDEN],
        [0.0, -1.0, -_GOLDEN],
        [0.0, 1.0, -_GOLDEN],
        [_GOLDEN, 0.0, -1.0],
        [_GOLDEN, 0.0, 1.0],
        [-_GOLDEN, 0.0, -1.0],
        [-_GOLDEN, 0.0, 1.0],
    ]
)

ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [5, 4, 9],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ]
)


def subdivide(vertices: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Splits every triangle into four, projecting the new edge midpoints onto the unit sphere."""
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    unique_edges, inverse = np.unique(np.sort(edges, axis=1), axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    midpoints = vertices[unique_edges].mean(axis=1)
    midpoints /= np.linalg.norm(midpoints, axis=1)[:, None]
    nf = len(faces)
    m01, m12, m20 = (len(vertices) + inverse[i * nf : (i + 1) * nf] for i in range(3))
    a, b, c = faces.T
    new_faces = np.concatenate(
        [
            np.column_stack([a, m01, m20]),
            np.column_stack([b, m12, m01]),
            np.column_stack([c, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return np.vstack([vertices, midpoints]), new_faces


def icosphere(level: int) -> Tuple[np.ndarray, np.ndarray]:
    vertices = ICOSAHEDRON_VERTICES / np.linalg.norm(ICOSAHEDRON_VERTICES, axis=1)[:, None]
    faces = ICOSAHEDRON_FACES.copy()
    for _ in range(level):
        vertices, faces = subdivide(vertices, faces)
    return vertices, _orient_outwards(vertices, faces)


def _orient_outwards(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[faces[:, i]] for i in range(3))
    inward = np.einsum("ij,ij->i", np.cross(p1 - p0, p2 - p0), p0 + p1 + p2) < 0
    faces = faces.copy()
    faces[inward] = faces[inward][:, [0, 2, 1]]
    return faces


@attrs(frozen=True)
class SphereMesh:
    level: int = attrib(validator=[validators.instance_of(int), validators.ge(0)])

    @cached_property
    def _tables(self) -> Tuple[np.ndarray, np.ndarray]:
        return icosphere(self.level)

    @property
    def vertices(self) -> np.ndarray:
        return self._tables[0]

    @property
    def faces(self) -> np.ndarray:
        return self._tables[1]

    @property
    def points(self) -> np.ndarray:
        return self.vertices

    @property
    def node_count(self) -> int:
        return len(self.vertices)

    @cached_property
    def edges(self) -> np.ndarray:
        f = self.faces
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        return np.unique(edges, axis=0)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def mesh_size(self) -> float:
        """Mean chord length of the edges."""
        v = self.vertices
        return float(np.mean(np.linalg.norm(v[self.edges[:, 0]] - v[self.edges[:, 1]], axis=1)))

    @property
    def euler_characteristic(self) -> int:
        return self.node_count - self.edge_count + len(self.faces)

    @cached_property
    def face_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)

    @cached_property
    def _face_to_vertex(self) -> sparse.csr_matrix:
        rows = self.faces.ravel()
        cols = np.repeat(np.arange(len(self.faces)), 3)
        return sparse.csr_matrix(
            (np.full(rows.shape, 1.0 / 3.0), (rows, cols)),
            shape=(self.node_count, len(self.faces)),
        )

    @cached_property
    def raw_mass(self) -> np.ndarray:
        return self._face_to_vertex @ self.face_areas

    @cached_property
    def weights(self) -> np.ndarray:
        raw = self.raw_mass
        return raw * (4 * np.pi / raw.sum())

    @property
    def area(self) -> float:
        return 4 * np.pi

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """Cotangent matrix ``S`` with ``f^T S f`` the Dirichlet energy of the P1 interpolant."""
        v, f = self.vertices, self.faces
        rows, cols, vals = [], [], []
        for k in range(3):
            i, j, o = f[:, (k + 1) % 3], f[:, (k + 2) % 3], f[:, k]
            a, b = v[i] - v[o], v[j] - v[o]
            cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-0.5 * cot, -0.5 * cot, 0.5 * cot, 0.5 * cot]
        s = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.node_count, self.node_count),
        )
        return s.tocsr()

    @cached_property
    def _gradients(self) -> Tuple[sparse.csr_matrix, ...]:
        """Face-wise gradient operators, one sparse matrix per ambient coordinate."""
        v, f = self.vertices, self.faces
        p = [v[f[:, k]] for k in range(3)]
        normal = np.cross(p[1] - p[0], p[2] - p[0])
        double_area = np.linalg.norm(normal, axis=1)
        normal /= double_area[:, None]
        face_index = np.arange(len(f))
        grads = []
        for k in range(3):
            opposite = p[(k + 2) % 3] - p[(k + 1) % 3]
            grads.append(np.cross(normal, opposite) / double_area[:, None])
        operators = []
        for c in range(3):
            data = np.concatenate([g[:, c] for g in grads])
            rows = np.tile(face_index, 3)
            cols = np.concatenate([f[:, k] for k in range(3)])
            operators.append(
                sparse.csr_matrix((data, (rows, cols)), shape=(len(f), self.node_count))
            )
        return tuple(operators)

    @cached_property
    def _poisson_factor(self):
        return splinalg.splu(self.stiffness[1:, 1:].tocsc())

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.vertices[self.faces].mean(axis=1))

    @cached_property
    def vertex_tree(self) -> cKDTree:
        return cKDTree(self.vertices)

    def filter(self, values: np.ndarray) -> np.ndarray:
        return values

    def laplace0(self, values: np.ndarray) -> np.ndarray:
        return -0.5 * (self.stiffness @ values) / self.weights

    def grad_inner(self, f: np.ndarray, h: np.ndarray) -> np.ndarray:
        per_face = sum((g @ f) * (g @ h) for g in self._gradients)
        return (self._face_to_vertex @ (self.face_areas * per_face)) / self.weights

    def solve_laplace0(self, rhs: np.ndarray) -> np.ndarray:
        """Zero-mean solution of ``laplace0(phi) = rhs - mean(rhs)``."""
        w = self.weights
        rhs = rhs - np.dot(w, rhs) / w.sum()
        phi = np.zeros(self.node_count)
        phi[1:] = self._poisson_factor.solve(-2.0 * (w * rhs)[1:])
        return phi - np.dot(w, phi) / w.sum()

    def bilaplace_real(self, values: np.ndarray) -> np.ndarray:
        w = self.weights
        return self.stiffness @ ((self.stiffness @ values) / w) / w

    def solve_implicit_bilaplace(self, rhs: np.ndarray, coefficient: float) -> np.ndarray:
        """
        Solves ``(1 + coefficient * lap_real^2) u = rhs`` in its symmetric form ``(M + c S M^-1 S) u = M rhs``.
        The sparse factorization is refined by preconditioned conjugate gradients whenever its residual is
        above ``IMPLICIT_RESIDUAL``.
        """
        w = self.weights
        s = self.stiffness
        system = (sparse.diags(w) + coefficient * (s @ sparse.diags(1.0 / w) @ s)).tocsc()
        b = w * rhs
        try:
            factor = splinalg.splu(system)
        except RuntimeError as e:
            raise StepFailure(f"implicit factorization failed: {e}") from e
        u = factor.solve(b)
        b_norm = np.linalg.norm(b) or 1.0
        if np.linalg.norm(system @ u - b) <= IMPLICIT_RESIDUAL * b_norm:
            return u
        preconditioner = splinalg.LinearOperator(system.shape, matvec=factor.solve)
        u, info = splinalg.cg(
            system, b, x0=u, M=preconditioner, maxiter=50, **{_CG_TOLERANCE: IMPLICIT_RESIDUAL}
        )
        if info != 0:
            raise StepFailure(f"conjugate gradients did not converge (info={info})")
        logger.debug("implicit solve refined by conjugate gradients")
        return u

    def distance_from(self, point) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        point = point / np.linalg.norm(point)
        return np.arccos(np.clip(self.vertices @ point, -1.0, 1.0))

    @property
    def injectivity_radius(self) -> float:
        return np.pi

    def locate(self, points: np.ndarray, candidates: int = 8) -> Tuple[np.ndarray, np.ndarray]:
        """
        Finds, for each point on the unit sphere, the containing face and its barycentric coordinates
        after radial projection onto the face plane.
        """
        points = np.asarray(points, dtype=float)
        _, nearest = self._centroid_tree.query(points, k=min(candidates, len(self.faces)))
        best_faces = nearest[:, 0].copy()
        best_coords = np.full((len(points), 3), np.nan)
        best_score = np.full(len(points), -np.inf)
        for column in nearest.T:
            coords = self._barycentric(points, column)
            score = coords.min(axis=1)
            better = score > best_score
            best_faces[better] = column[better]
            best_coords[better] = coords[better]
            best_score[better] = score[better]
        best_coords = np.clip(best_coords, 0.0, None)
        best_coords /= best_coords.sum(axis=1)[:, None]
        return best_faces, best_coords

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        faces, coords = self.locate(points)
        return np.einsum("ij,ij->i", values[self.faces[faces]], coords)

    def _barycentric(self, points: np.ndarray, faces: np.ndarray) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[faces, k]] for k in range(3))
        normal = np.cross(b - a, c - a)
        scale = np.einsum("ij,ij->i", normal, a) / np.einsum("ij,ij->i", normal, points)
        q = points * scale[:, None]
        total = np.einsum("ij,ij->i", normal, normal)
        wa = np.einsum("ij,ij->i", np.cross(c - b, q - b), normal) / total
        wb = np.einsum("ij,ij->i", np.cross(a - c, q - c), normal) / total
        return np.column_stack([wa, wb, 1.0 - wa - wb])
