"""Exact effective conductance tensors via the periodic cell problem on the
quotient graph, plus the subdivision oracle and windowed homogenization.

The cell problem on a network reduces to one real potential per node: for a
pressure gradient p the energy is

    E_p(phi) = sum_e (a_e / l_e) * (phi_v - phi_u + p . d_e)^2

whose per-edge minimizers are affine along the edge, so this is the exact
continuum infimum (subdivision invariance is the guard).  Writing S for the
signed incidence matrix, c for edge conductances and D for lifted
displacements, the minimum-energy quadratic form is

    Q = C - B^T L^+ B,   C = D^T diag(c) D,  B = S^T diag(c) D,  L = S^T diag(c) S.

C equals the tangential mass tensor and the rows of B are the weighted
node-balance residuals, so Q = mass exactly when the network is balanced.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Edge,
    NetworkMedium,
    PeriodicNetwork,
    TorusPoint,
    symmetrize,
)
from .topology import component_labels

TOL_SOLVE = 1e-11
CG_TARGET = 1e-13  # inner CG target, one order tighter than the contract
DENSE_LIMIT = 600  # below this node count the Laplacian stays dense


class SolveFailure(RuntimeError):
    """Raised when the normal-equation residual stays above tolerance."""


class BudgetExceeded(RuntimeError):
    def __init__(self, R: int, nodes: int, budget: int):
        self.R = R
        super().__init__(f"window R={R} needs {nodes} nodes, budget is {budget}")


@dataclass
class EffectiveTensor:
    Q: np.ndarray
    residual: float
    component_count: int


@dataclass
class WindowTensor:
    R: int
    Q: np.ndarray
    node_count: int
    solve_time: float


@dataclass
class HomogenizationTrace:
    windows: list = field(default_factory=list)


# -- conjugate gradient on the (possibly singular) weighted Laplacian --------

def _cg(matvec, b, rtol, maxiter, project=None):
    """Plain CG with optional kernel projection; returns (x, rel_residual)."""
    if project is not None:
        b = project(b)
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0.0
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for _ in range(maxiter):
        if np.sqrt(rs) <= rtol * bnorm:
            break
        Ap = matvec(p)
        denom = float(p @ Ap)
        if denom <= 0.0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * Ap
        if project is not None:
            r = project(r)
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    if project is not None:
        x = project(x)
    true_r = b - matvec(x)
    if project is not None:
        true_r = project(true_r)
    return x, float(np.linalg.norm(true_r)) / bnorm


class _GraphSystem:
    """Normal equations of the edge energy over free node potentials.

    Segments may end at pinned nodes (potential fixed to the affine data);
    those ends simply drop out of the incidence rows.
    """

    def __init__(self, n_free, tails, heads, conduct, disp, labels=None):
        self.n_free = int(n_free)
        self.tails = np.asarray(tails)  # -1 marks a pinned end
        self.heads = np.asarray(heads)
        self.c = np.asarray(conduct, dtype=float)
        self.D = np.asarray(disp, dtype=float)
        self.labels = labels  # free-node component labels for kernel projection
        if labels is not None:
            groups = {}
            for i, lab in enumerate(labels):
                if lab is None:
                    continue  # component touches a pinned node: nonsingular
                groups.setdefault(int(lab), []).append(i)
            self._groups = [np.array(ix) for ix in groups.values()]
        else:
            self._groups = []
        nE = len(self.c)
        if self.n_free <= DENSE_LIMIT:
            L = np.zeros((self.n_free, self.n_free))
            for e in range(nE):
                t, h, ce = self.tails[e], self.heads[e], self.c[e]
                if t >= 0:
                    L[t, t] += ce
                if h >= 0:
                    L[h, h] += ce
                if t >= 0 and h >= 0:
                    L[t, h] -= ce
                    L[h, t] -= ce
            self._L = L
            self._S = None
        else:
            from scipy import sparse

            rows, cols, vals = [], [], []
            for e in range(nE):
                if self.heads[e] >= 0:
                    rows.append(e)
                    cols.append(self.heads[e])
                    vals.append(1.0)
                if self.tails[e] >= 0:
                    rows.append(e)
                    cols.append(self.tails[e])
                    vals.append(-1.0)
            S = sparse.coo_matrix((vals, (rows, cols)), shape=(nE, self.n_free)).tocsr()
            self._S = S
            self._ST = S.T.tocsr()
            self._L = None

    def matvec(self, x):
        if self._L is not None:
            return self._L @ x
        return self._ST @ (self.c * (self._S @ x))

    def project(self, x):
        if not self._groups:
            return x
        y = x.copy()
        for ix in self._groups:
            y[ix] -= y[ix].mean()
        return y

    def edge_drop(self, phi):
        """phi_head - phi_tail per segment, pinned ends contributing 0."""
        drop = np.zeros(len(self.c))
        hmask = self.heads >= 0
        tmask = self.tails >= 0
        drop[hmask] += phi[self.heads[hmask]]
        drop[tmask] -= phi[self.tails[tmask]]
        return drop

    def rhs_for(self, p):
        """-B p with B = S^T diag(c) D."""
        w = self.c * (self.D @ p)
        b = np.zeros(self.n_free)
        hmask = self.heads >= 0
        tmask = self.tails >= 0
        np.add.at(b, self.heads[hmask], -w[hmask])
        np.add.at(b, self.tails[tmask], w[tmask])
        return b

    def quadratic_form(self, rtol=CG_TARGET, maxiter=None):
        """Minimized-energy matrix Q, worst relative residual, potentials."""
        n = self.D.shape[1]
        maxiter = maxiter or max(20 * self.n_free, 50)
        C = self.D.T @ (self.c[:, None] * self.D)
        Q = C.copy()
        worst = 0.0
        project = self.project if self._groups else None
        # an RHS this far below the natural scale of B is pure roundoff
        # (exactly balanced nets); solving it would only polish noise
        b_floor = 1e-14 * float(np.sqrt(np.sum((self.c * np.linalg.norm(self.D, axis=1)) ** 2)))
        for i in range(n):
            p = np.zeros(n)
            p[i] = 1.0
            b = self.rhs_for(p)
            if float(np.linalg.norm(b)) <= b_floor:
                continue
            phi, rel = _cg(self.matvec, b, rtol, maxiter, project)
            worst = max(worst, rel)
            # column correction B^T phi = D^T diag(c) S phi
            Q[:, i] += self.D.T @ (self.c * self.edge_drop(phi))
        return symmetrize(Q), worst


def _support_arrays(medium: NetworkMedium):
    net = medium.network.support()
    tails = np.array([e.u for e in net.edges], dtype=int)
    heads = np.array([e.v for e in net.edges], dtype=int)
    lens = net.lengths()
    c = net.weights() / lens if len(net.edges) else np.zeros(0)
    D = net.displacements()
    return net, tails, heads, c, D


def effective_tensor(medium: NetworkMedium) -> EffectiveTensor:
    """Effective conductance tensor of the medium.

    Solves the weighted-Laplacian normal equations for each coordinate
    direction and recovers Q by polarization.  Isotropic and tangential
    modes give the same Q (normal components cost nothing to remove); they
    differ only in the mass tensor.
    """
    net, tails, heads, c, D = _support_arrays(medium)
    n = net.dimension
    if not net.edges:
        return EffectiveTensor(Q=np.zeros((n, n)), residual=0.0, component_count=0)
    labels = component_labels(net)
    edge_nodes = set(tails) | set(heads)
    comp_count = len({int(labels[i]) for i in edge_nodes})
    sys = _GraphSystem(len(net.nodes), tails, heads, c, D, labels=labels)
    Q, residual = sys.quadratic_form()
    if residual > TOL_SOLVE:
        raise SolveFailure(f"relative residual {residual:.3e} above {TOL_SOLVE}")
    return EffectiveTensor(Q=Q, residual=residual, component_count=comp_count)


def effective_bilinear(medium: NetworkMedium, p, q) -> float:
    """p . Q q through minimizers, by polarization of the energy form."""
    net, tails, heads, c, D = _support_arrays(medium)
    if not net.edges:
        return 0.0
    labels = component_labels(net)
    sys = _GraphSystem(len(net.nodes), tails, heads, c, D, labels=labels)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)

    def energy(vec):
        b = sys.rhs_for(vec)
        phi, rel = _cg(sys.matvec, b, CG_TARGET, max(20 * sys.n_free, 50), sys.project)
        if rel > TOL_SOLVE:
            raise SolveFailure(f"relative residual {rel:.3e} above {TOL_SOLVE}")
        drop = sys.edge_drop(phi) + sys.D @ vec
        return float(np.sum(sys.c * drop * drop))

    return 0.5 * (energy(p + q) - energy(p) - energy(q))


# -- subdivision oracle -------------------------------------------------------

def subdivide(net: PeriodicNetwork, parts) -> PeriodicNetwork:
    """Split edges into collinear sub-edges with interpolated nodes.

    ``parts`` maps edge index to the number of pieces (missing edges keep 1).
    Interior nodes are placed at the reduced lift positions; each sub-edge
    carries the integer shift that keeps its lifted displacement equal to
    d_e/m, so the shifts telescope to the original crossing vector and total
    length, mass tensor and homotopy classes are unchanged.
    """
    if isinstance(parts, int):
        parts = {i: parts for i in range(len(net.edges))}
    pos = net.node_positions()
    disp = net.displacements()
    nodes = [p for p in net.nodes]
    edges = []
    for i, e in enumerate(net.edges):
        m = int(parts.get(i, 1))
        if m <= 1:
            edges.append(e)
            continue
        A = pos[e.u]
        chain = [(e.u, np.zeros(net.dimension, dtype=int))]
        for j in range(1, m):
            lift = A + (j / m) * disp[i]
            k = np.floor(lift).astype(int)
            red = lift - k
            red[red >= 1.0] -= 1.0
            k = np.round(lift - red).astype(int)
            nodes.append(TorusPoint(red))
            chain.append((len(nodes) - 1, k))
        chain.append((e.v, np.array(e.shift, dtype=int)))
        for (a, ka), (b, kb) in zip(chain, chain[1:]):
            edges.append(Edge(a, b, tuple(int(x) for x in (kb - ka)), e.weight))
    return PeriodicNetwork(net.dimension, nodes, edges)


# -- windowed homogenization --------------------------------------------------

def homogenize_window(
    medium: NetworkMedium,
    R_list,
    node_budget: int = 500_000,
) -> HomogenizationTrace:
    """Dirichlet cell problems on growing windows (-R, R)^n of the periodic
    extension, normalized by window volume.

    The network is tiled over translates in {-R, ..., R-1}^n; nodes touching
    the window boundary are pinned to the affine data u = p.x, and edges
    leaving the window are truncated at the boundary with a pinned cut node
    (dropping them would change the medium inside the window).
    """
    net, tails, heads, c, D = _support_arrays(medium)
    n = net.dimension
    trace = HomogenizationTrace()
    pos = net.node_positions()
    lens = net.lengths()
    for R in sorted(int(r) for r in R_list):
        if R < 1:
            raise ValueError("window half-width R must be >= 1")
        est = max(len(net.nodes), 1) * (2 * R) ** n
        if est > node_budget:
            raise BudgetExceeded(R, est, node_budget)
        t0 = time.perf_counter()
        Q_R, total_nodes = _window_tensor(net, pos, lens, c, D, R)
        trace.windows.append(
            WindowTensor(R=R, Q=Q_R, node_count=total_nodes, solve_time=time.perf_counter() - t0)
        )
    return trace


def _window_tensor(net, pos, lens, c, D, R):
    n = net.dimension
    N = len(net.nodes)
    translates = list(itertools.product(range(-R, R), repeat=n))
    tindex = {t: k for k, t in enumerate(translates)}
    eps = 1e-12

    # free / pinned status of tiled nodes; boundary-touching nodes are pinned
    n_tiled = N * len(translates)
    free_id = -np.ones(n_tiled, dtype=int)
    n_free = 0
    for k, t in enumerate(translates):
        base = k * N
        for i in range(N):
            y = pos[i] + np.array(t, dtype=float)
            if np.all(np.abs(np.abs(y) - R) > eps):
                free_id[base + i] = n_free
                n_free += 1

    seg_tails, seg_heads, seg_c, seg_D = [], [], [], []

    if len(net.edges):
        for k, t in enumerate(translates):
            tvec = np.array(t, dtype=float)
            for e_idx, e in enumerate(net.edges):
                A = pos[e.u] + tvec
                d = D[e_idx]
                H = A + d
                tail = free_id[k * N + e.u]
                th = tuple(int(ti) + int(zi) for ti, zi in zip(t, e.shift))
                inside = np.all(H >= -R - eps) and np.all(H <= R + eps)
                if th in tindex and free_id[tindex[th] * N + e.v] >= 0:
                    head = free_id[tindex[th] * N + e.v]
                    seg_tails.append(tail)
                    seg_heads.append(head)
                    seg_c.append(c[e_idx])
                    seg_D.append(d)
                elif inside:
                    # head exists but is pinned (in range or exactly on the boundary)
                    seg_tails.append(tail)
                    seg_heads.append(-1)
                    seg_c.append(c[e_idx])
                    seg_D.append(d)
                else:
                    # truncate at the window boundary; the cut node is pinned
                    s = 1.0
                    for ax in range(n):
                        if d[ax] > eps:
                            s = min(s, (R - A[ax]) / d[ax])
                        elif d[ax] < -eps:
                            s = min(s, (-R - A[ax]) / d[ax])
                    if s <= eps:
                        continue  # tail sits on the boundary pointing out
                    seg_tails.append(tail)
                    seg_heads.append(-1)
                    seg_c.append(c[e_idx] / s)  # a_e / (s * l_e)
                    seg_D.append(s * d)

    if not seg_c:
        return np.zeros((n, n)), n_tiled

    labels = _floating_labels(n_free, seg_tails, seg_heads)
    sys = _GraphSystem(
        n_free,
        np.array(seg_tails),
        np.array(seg_heads),
        np.array(seg_c),
        np.array(seg_D),
        labels=labels,
    )
    Q, residual = sys.quadratic_form()
    if residual > TOL_SOLVE:
        raise SolveFailure(f"window residual {residual:.3e} above {TOL_SOLVE}")
    return Q / float((2 * R) ** n), n_tiled


def _floating_labels(n_free, seg_tails, seg_heads):
    """Labels of free-node components with no pinned end (the kernel of the
    reduced Laplacian is constants on exactly those); None if none exist."""
    if n_free == 0:
        return None
    parent = list(range(n_free))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, h in zip(seg_tails, seg_heads):
        if t >= 0 and h >= 0:
            ra, rb = find(int(t)), find(int(h))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    pinned_touch = set()
    for t, h in zip(seg_tails, seg_heads):
        if (t >= 0) != (h >= 0):
            pinned_touch.add(find(int(max(t, h))))
    labels = [None] * n_free
    floating = {}
    for i in range(n_free):
        r = find(i)
        if r in pinned_touch:
            continue
        floating.setdefault(r, len(floating))
        labels[i] = floating[r]
    if not floating:
        return None
    return labels

