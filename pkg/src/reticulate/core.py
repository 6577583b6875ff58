"""Domain types for conductive media carried by periodic networks on the flat
torus, plus exact symmetric-matrix analysis (mass tensors, kernels, realizable
dimension, projection mixtures).

Conventions
-----------
Points live on the unit flat torus: every coordinate is reduced into [0, 1).
An edge from node ``u`` to node ``v`` with integer shift ``z`` is the straight
segment from ``x_u`` to ``x_v + z`` in the universal cover; the shift records
how the edge wraps around the torus.  All functions here are pure and safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Edges lighter than this carry no support: they are invisible to topology
# and to the cell solver (the coercivity convention makes support computation
# deterministic).
SUPPORT_THRESHOLD = 1e-12

# Tolerances for matrix classification on desk-scale double precision inputs.
TOL_PSD_REL = 1e-10
TOL_MIX = 1e-9
TOL_RANK_DEFAULT = 1e-8


class ZeroMatrix(ValueError):
    """Raised when an operation requires a nonzero PSD matrix."""


class NotPSD(ValueError):
    """Raised when a matrix has an eigenvalue below the PSD tolerance."""


class BadTrace(ValueError):
    """Raised when a mixture target does not have unit trace."""


class NotRealizable(ValueError):
    """Raised when a trace-1 PSD matrix cannot be written as a mixture of
    scaled k-plane projections (its top eigenvalue exceeds 1/k)."""

    def __init__(self, k: int, lambda_max: float):
        self.k = k
        self.lambda_max = lambda_max
        super().__init__(
            f"top eigenvalue {lambda_max:.17g} exceeds 1/{k}; "
            f"not a mixture of {k}-plane projections"
        )


def reduce_mod_1(coords) -> np.ndarray:
    """Reduce coordinates into [0, 1), guarding against the float artifact
    where ``x - floor(x)`` rounds up to exactly 1.0 for tiny negative x."""
    x = np.asarray(coords, dtype=float)
    r = x - np.floor(x)
    r[r >= 1.0] -= 1.0
    return r


@dataclass(frozen=True)
class TorusPoint:
    """A point on the n-torus; coordinates are reduced mod 1 on construction."""

    coords: tuple

    def __init__(self, coords):
        object.__setattr__(self, "coords", tuple(reduce_mod_1(coords)))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def __len__(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class Edge:
    """Weighted straight edge with an integer crossing vector.

    ``shift`` is the integer translate applied to the head ``v`` when the edge
    is lifted starting at the representative of ``u`` in [0,1)^n.
    """

    u: int
    v: int
    shift: tuple
    weight: float

    def __init__(self, u: int, v: int, shift, weight: float):
        object.__setattr__(self, "u", int(u))
        object.__setattr__(self, "v", int(v))
        object.__setattr__(self, "shift", tuple(int(z) for z in shift))
        object.__setattr__(self, "weight", float(weight))

    def reversed(self) -> "Edge":
        return Edge(self.v, self.u, tuple(-z for z in self.shift), self.weight)


@dataclass
class PeriodicNetwork:
    """Nodes on the torus plus weighted straight edges with crossing vectors.

    Invariants checked on construction: node indices in range, weights finite
    and nonnegative, and every lifted displacement has positive length (a
    self-loop therefore needs a nonzero shift).
    """

    dimension: int
    nodes: list
    edges: list

    def __post_init__(self):
        n = int(self.dimension)
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = n
        self.nodes = [p if isinstance(p, TorusPoint) else TorusPoint(p) for p in self.nodes]
        for p in self.nodes:
            if len(p) != n:
                raise ValueError(f"node {p} does not have dimension {n}")
        edges = []
        for i, e in enumerate(self.edges):
            if not isinstance(e, Edge):
                e = Edge(*e)
            if not (0 <= e.u < len(self.nodes) and 0 <= e.v < len(self.nodes)):
                raise ValueError(f"edge {i}: node index out of range")
            if len(e.shift) != n:
                raise ValueError(f"edge {i}: shift has wrong dimension")
            if not math.isfinite(e.weight) or e.weight < 0:
                raise ValueError(f"edge {i}: weight must be finite and >= 0")
            edges.append(e)
        self.edges = edges
        lengths = self.lengths()
        if np.any(lengths <= 0):
            bad = int(np.argmin(lengths))
            raise ValueError(f"edge {bad} has zero length (self-loop needs a nonzero shift)")

    # -- derived geometry -------------------------------------------------

    def node_positions(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros((0, self.dimension))
        return np.array([p.coords for p in self.nodes], dtype=float)

    def displacements(self) -> np.ndarray:
        """Lifted displacement d_e = x_v + z_e - x_u per edge, shape (E, n)."""
        if not self.edges:
            return np.zeros((0, self.dimension))
        pos = self.node_positions()
        u = np.array([e.u for e in self.edges])
        v = np.array([e.v for e in self.edges])
        z = np.array([e.shift for e in self.edges], dtype=float)
        return pos[v] + z - pos[u]

    def lengths(self) -> np.ndarray:
        d = self.displacements()
        return np.linalg.norm(d, axis=1) if len(d) else np.zeros(0)

    def tangents(self) -> np.ndarray:
        d = self.displacements()
        ln = np.linalg.norm(d, axis=1)
        return d / ln[:, None] if len(d) else d

    def weights(self) -> np.ndarray:
        return np.array([e.weight for e in self.edges], dtype=float)

    def support(self, threshold: float = SUPPORT_THRESHOLD) -> "PeriodicNetwork":
        """The subnetwork carrying the medium: edges at or above the weight
        threshold.  Nodes are kept (components() drops isolated ones)."""
        kept = [e for e in self.edges if e.weight >= threshold]
        return PeriodicNetwork(self.dimension, list(self.nodes), kept)

    def with_weights(self, weights) -> "PeriodicNetwork":
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(self.edges),):
            raise ValueError("weight vector length mismatch")
        edges = [Edge(e.u, e.v, e.shift, wi) for e, wi in zip(self.edges, w)]
        return PeriodicNetwork(self.dimension, list(self.nodes), edges)


class Mode(Enum):
    """Anisotropy of the medium carried by the network.

    ISOTROPIC spreads each edge's conductance over all directions (sigma =
    I/n); TANGENTIAL concentrates it along the edge (sigma = T (x) T), the
    efficient reduction that removes normal components without changing the
    effective tensor.
    """

    ISOTROPIC = "isotropic"
    TANGENTIAL = "tangential"


@dataclass
class NetworkMedium:
    network: PeriodicNetwork
    mode: Mode = Mode.TANGENTIAL

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode.lower())


# -- symmetric matrix helpers ---------------------------------------------

def symmetrize(A) -> np.ndarray:
    """Exactly symmetric copy of A: entry (i,j) and (j,i) are computed by the
    same floating operation, so the result is bitwise symmetric."""
    A = np.asarray(A, dtype=float)
    return (A + A.T) / 2.0


def eigh_sorted(A):
    """Eigenvalues ascending plus orthonormal eigenvectors (columns)."""
    return np.linalg.eigh(symmetrize(A))


def check_psd(A, tol_rel: float = TOL_PSD_REL) -> np.ndarray:
    """Return eigenvalues (ascending); raise NotPSD below -tol_rel*lambda_max."""
    vals = np.linalg.eigvalsh(symmetrize(A))
    lam_max = vals[-1] if len(vals) else 0.0
    if len(vals) and vals[0] < -tol_rel * max(lam_max, 0.0):
        raise NotPSD(f"eigenvalue {vals[0]:.17g} below PSD tolerance")
    return vals


# -- operations ------------------------------------------------------------

def mass_tensor(medium: NetworkMedium) -> np.ndarray:
    """Total tensor mass of the medium: sum over edges of a_e*l_e*I in
    isotropic mode, or a_e*l_e*(T_e (x) T_e) in tangential mode.  This is the
    upper envelope of the effective tensor."""
    net = medium.network
    n = net.dimension
    if not net.edges:
        return np.zeros((n, n))
    w = net.weights()
    ln = net.lengths()
    if medium.mode is Mode.ISOTROPIC:
        return float(np.dot(w, ln)) * np.eye(n)
    T = net.tangents()
    M = np.einsum("e,ei,ej->ij", w * ln, T, T)
    return symmetrize(M)


def realizable_dimension(A) -> float:
    """tr(A)/lambda_max(A) for a nonzero PSD matrix.

    Lies in [1, rank(A)], with the top value attained exactly on scalar
    multiples of orthogonal projections; it is the sharp threshold for
    writing A (normalized to trace 1) as a mixture of scaled k-plane
    projections.
    """
    vals = check_psd(A)
    lam_max = vals[-1]
    if lam_max <= 0.0:
        raise ZeroMatrix("realizable dimension of the zero matrix is undefined")
    return float(np.sum(np.clip(vals, 0.0, None)) / lam_max)


def kernel_basis(A, tol_rank: float = TOL_RANK_DEFAULT, floor_scale: float = 1.0) -> np.ndarray:
    """Orthonormal basis (rows) of the numerical kernel of a PSD matrix.

    Eigenvectors with eigenvalue <= tol_rank * max(lambda_max, floor_scale)
    span the kernel; the absolute floor makes the zero matrix (and solver
    noise around it) return the full standard basis.
    """
    vals, vecs = eigh_sorted(A)
    lam_max = max(float(vals[-1]), 0.0) if len(vals) else 0.0
    thresh = tol_rank * max(lam_max, floor_scale)
    keep = vals <= thresh
    return vecs[:, keep].T.copy()


@dataclass(frozen=True)
class MixtureAtom:
    """One scaled projection: weight lam and an orthonormal basis (k rows)
    of the k-dimensional subspace projected onto."""

    lam: float
    basis: np.ndarray

    def projection(self) -> np.ndarray:
        return self.basis.T @ self.basis


@dataclass
class ProjectionMixture:
    """A finite convex combination of scaled k-plane projections
    (1/k) * sum_i lam_i P_i reconstructing a trace-1 PSD matrix."""

    k: int
    atoms: list = field(default_factory=list)

    def reconstruction(self) -> np.ndarray:
        n = self.atoms[0].basis.shape[1]
        M = np.zeros((n, n))
        for a in self.atoms:
            M += a.lam * a.projection()
        return symmetrize(M / self.k)

    def validate(self, tol: float = TOL_MIX) -> None:
        total = sum(a.lam for a in self.atoms)
        if abs(total - 1.0) > tol:
            raise ValueError(f"atom weights sum to {total}, not 1")
        for a in self.atoms:
            G = a.basis @ a.basis.T
            if a.basis.shape[0] != self.k or np.max(np.abs(G - np.eye(self.k))) > tol:
                raise ValueError("atom basis is not orthonormal of rank k")
        check_psd(self.reconstruction())


def realize_as_mixture(A, k: int, tol: float = TOL_MIX) -> ProjectionMixture:
    """Write a trace-1 PSD matrix as a mixture of scaled k-plane projections.

    Feasible exactly when every eigenvalue is <= 1/k (sharp criterion); the
    decomposition is a greedy walk on the eigenvalue simplex
    F = {0 <= lam_i <= 1/k, sum lam_i = 1}: each step moves toward the
    extreme point supported on the k largest residual coordinates until some
    coordinate hits 0 or its cap, so at most n atoms are produced.  Atoms are
    spanned by the eigenvectors of A.

    Raises NotRealizable when lambda_max > 1/k + tol and BadTrace when
    |tr(A) - 1| > tol.
    """
    A = symmetrize(A)
    n = A.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"k must be in [1, {n}]")
    tr = float(np.trace(A))
    if abs(tr - 1.0) > tol:
        raise BadTrace(f"trace {tr:.17g} differs from 1 beyond tolerance")
    vals, vecs = eigh_sorted(A)
    check_psd(A)
    order = np.argsort(-vals, kind="stable")
    lam = np.clip(vals[order], 0.0, None)
    V = vecs[:, order]
    if lam[0] > 1.0 / k + tol:
        raise NotRealizable(k, float(lam[0]))

    atoms = []
    resid = lam.copy()
    remaining = 1.0
    for _ in range(n):
        if remaining <= tol:
            break
        # k largest residual coordinates, ties broken by index
        sel = np.argsort(-resid, kind="stable")[:k]
        sel.sort()
        w = remaining
        w = min(w, float(k * resid[sel].min()))
        others = np.ones(n, dtype=bool)
        others[sel] = False
        if others.any():
            w = min(w, float(remaining - k * resid[others].max()))
        w = max(w, 0.0)
        if w <= tol * 1e-3:
            # numerical stall: dump the rest on the current face
            w = remaining
        basis = V[:, sel].T.copy()
        atoms.append(MixtureAtom(float(w), basis))
        resid[sel] -= w / k
        np.clip(resid, 0.0, None, out=resid)
        remaining -= w
        if remaining <= tol:
            break
    # absorb any residual mass into the last atom weight so weights sum to 1
    total = sum(a.lam for a in atoms)
    if atoms and abs(total - 1.0) > 1e-15:
        last = atoms[-1]
        atoms[-1] = MixtureAtom(last.lam + (1.0 - total), last.basis)
    return ProjectionMixture(k=k, atoms=atoms)
