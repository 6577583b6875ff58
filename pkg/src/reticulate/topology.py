"""Topology of the support: planarization, connected components, the integer
lattice of homotopy classes of closed paths, and the loopy / reticulate /
quasi-laminate classification with its predicted kernel.

The lattice of a connected component is generated by the fundamental cycles
of a spanning tree of the quotient graph: each non-tree edge contributes the
oriented sum of crossing vectors around its cycle.  All lattice arithmetic is
exact over Python integers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import Edge, PeriodicNetwork, SUPPORT_THRESHOLD, TorusPoint

EPS_GEOM_DEFAULT = 1e-9


class DimensionUnsupported(ValueError):
    """Raised by geometric operations that only make sense in the plane."""


# -- integer lattice arithmetic --------------------------------------------

def hermite_normal_form(rows) -> list:
    """Row-style Hermite normal form of an integer row span.

    Returns the canonical basis as a list of integer lists: pivots positive,
    strictly increasing pivot columns, entries above each pivot reduced into
    [0, pivot).  Exact integer arithmetic throughout.
    """
    vecs = [[int(x) for x in r] for r in rows if any(int(x) for x in r)]
    if not vecs:
        return []
    ncols = len(vecs[0])
    pivot_row = {}  # column -> basis row with that pivot
    for vec in vecs:
        vec = list(vec)
        for j in range(ncols):
            if vec[j] == 0:
                continue
            row = pivot_row.get(j)
            if row is None:
                pivot_row[j] = vec
                break
            # euclid-combine: both rows are supported on columns >= j, so the
            # combination never pollutes earlier pivots
            a, b = row[j], vec[j]
            while b:
                q = a // b
                row2 = [x - q * y for x, y in zip(row, vec)]
                row[:], vec[:] = vec, row2
                a, b = row[j], vec[j]
    basis = [pivot_row[j] for j in sorted(pivot_row)]
    # normalize pivots positive, then reduce entries above each pivot in
    # ascending pivot order (later passes cannot disturb earlier columns)
    for row in basis:
        j = next(i for i, x in enumerate(row) if x)
        if row[j] < 0:
            row[:] = [-x for x in row]
    for idx in range(len(basis)):
        row = basis[idx]
        j = next(i for i, x in enumerate(row) if x)
        for upper in basis[:idx]:
            q = upper[j] // row[j]
            if q:
                upper[:] = [x - q * y for x, y in zip(upper, row)]
    return basis


@dataclass
class CycleLattice:
    """Integer generator set of the homotopy classes of closed paths in the
    support, with its rank and Hermite-normal-form basis."""

    generators: list
    rank: int
    basis: list

    @staticmethod
    def from_generators(generators) -> "CycleLattice":
        gens = [tuple(int(x) for x in g) for g in generators]
        basis = hermite_normal_form(gens)
        return CycleLattice(generators=gens, rank=len(basis), basis=basis)

    def real_span_matrix(self) -> np.ndarray:
        if not self.basis:
            return np.zeros((0, 0))
        return np.array(self.basis, dtype=float)


# -- components and spanning-tree cycles ------------------------------------

def _adjacency(net: PeriodicNetwork):
    adj = [[] for _ in net.nodes]
    for idx, e in enumerate(net.edges):
        adj[e.u].append((idx, e.v, +1))
        if e.u != e.v:
            adj[e.v].append((idx, e.u, -1))
    return adj


def component_labels(net: PeriodicNetwork) -> np.ndarray:
    """Connected-component label per node of the quotient graph (all nodes,
    including isolated ones, get a label)."""
    n = len(net.nodes)
    labels = -np.ones(n, dtype=int)
    adj = _adjacency(net)
    comp = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = comp
        while stack:
            w = stack.pop()
            for _, other, _ in adj[w]:
                if labels[other] < 0:
                    labels[other] = comp
                    stack.append(other)
        comp += 1
    return labels


def components(net: PeriodicNetwork) -> list:
    """Partition of the support into connected subnetworks.

    Edges below the support threshold are discarded first; isolated nodes are
    dropped (singleton components carry no medium).  Node order inside each
    component follows the original ordering.
    """
    sup = net.support()
    labels = component_labels(sup)
    used = sorted({labels[e.u] for e in sup.edges})
    out = []
    for comp in used:
        node_ids = [i for i in range(len(sup.nodes)) if labels[i] == comp]
        has_edge = {e.u for e in sup.edges if labels[e.u] == comp}
        has_edge |= {e.v for e in sup.edges if labels[e.v] == comp}
        node_ids = [i for i in node_ids if i in has_edge]
        remap = {old: new for new, old in enumerate(node_ids)}
        nodes = [sup.nodes[i] for i in node_ids]
        edges = [
            Edge(remap[e.u], remap[e.v], e.shift, e.weight)
            for e in sup.edges
            if labels[e.u] == comp
        ]
        out.append(PeriodicNetwork(sup.dimension, nodes, edges))
    return out


def _component_generators(net: PeriodicNetwork):
    """Fundamental-cycle crossing classes per connected component.

    A BFS spanning tree assigns each node an integer lift offset; every
    non-tree edge (u, v, z) then yields the generator z + k(u) - k(v).
    Returns a list of (component label, [generators]) in label order.
    """
    n = len(net.nodes)
    dim = net.dimension
    adj = _adjacency(net)
    labels = component_labels(net)
    offset = [None] * n
    in_tree = [False] * len(net.edges)
    for start in range(n):
        if offset[start] is not None:
            continue
        offset[start] = (0,) * dim
        queue = [start]
        while queue:
            w = queue.pop(0)
            for eidx, other, sign in adj[w]:
                if offset[other] is None:
                    z = net.edges[eidx].shift
                    kw = offset[w]
                    offset[other] = tuple(k + sign * zi for k, zi in zip(kw, z))
                    in_tree[eidx] = True
                    queue.append(other)
    gens_by_comp = {}
    for eidx, e in enumerate(net.edges):
        if in_tree[eidx]:
            continue
        g = tuple(z + ku - kv for z, ku, kv in zip(e.shift, offset[e.u], offset[e.v]))
        gens_by_comp.setdefault(int(labels[e.u]), []).append(g)
    for e in net.edges:
        gens_by_comp.setdefault(int(labels[e.u]), [])
    return sorted(gens_by_comp.items())


def cycle_lattice(net: PeriodicNetwork) -> CycleLattice:
    """The lattice of homotopy classes of closed paths in the support.

    Generators of all components are concatenated; the basis is their integer
    Hermite normal form.  Invariant under edge subdivision and choice of
    spanning tree.
    """
    sup = net.support()
    gens = []
    for _, gs in _component_generators(sup):
        gens.extend(gs)
    return CycleLattice.from_generators(gens)


# -- classification ----------------------------------------------------------

def _orthonormal_complement(basis_rows: list, dim: int) -> np.ndarray:
    """Orthonormal rows spanning the orthogonal complement of integer rows."""
    if not basis_rows:
        return np.eye(dim)
    B = np.array(basis_rows, dtype=float)
    if dim == 2 and len(basis_rows) == 1:
        a, b = basis_rows[0]
        v = np.array([-b, a], dtype=float)
        return (v / np.linalg.norm(v)).reshape(1, 2)
    _, s, vt = np.linalg.svd(B)
    rank = int(np.sum(s > 1e-12 * (s[0] if len(s) else 1.0)))
    return vt[rank:].copy()


def _primitive(vec) -> tuple:
    import math as _math

    g = 0
    for x in vec:
        g = _math.gcd(g, abs(int(x)))
    g = g or 1
    out = tuple(int(x) // g for x in vec)
    for x in out:
        if x != 0:
            return out if x > 0 else tuple(-y for y in out)
    return out


@dataclass
class Classification:
    """Topological verdict of a network support.

    kind is one of 'trivial' (no nonzero classes), 'quasi_laminate' (lattice
    rank 1, with the primitive direction), 'loopy' (full rank) or
    'intermediate'; reticulate means some single component is loopy by itself.
    predicted_kernel contains orthonormal rows spanning the complement of the
    class lattice, the predicted kernel of the effective tensor.
    """

    kind: str
    direction: tuple | None
    per_component: list
    predicted_kernel: np.ndarray
    reticulate: bool
    lattice: CycleLattice = field(default=None)


def classify(net: PeriodicNetwork) -> Classification:
    sup = net.support()
    dim = sup.dimension
    per_comp = []
    all_gens = []
    reticulate = False
    for comp_id, gens in _component_generators(sup):
        lat = CycleLattice.from_generators(gens)
        per_comp.append((comp_id, lat))
        all_gens.extend(gens)
        if lat.rank == dim:
            reticulate = True
    total = CycleLattice.from_generators(all_gens)
    kernel = _orthonormal_complement(total.basis, dim)
    if total.rank == 0:
        kind, direction = "trivial", None
    elif total.rank == dim:
        kind, direction = "loopy", None
    elif total.rank == 1:
        kind, direction = "quasi_laminate", _primitive(total.basis[0])
    else:
        kind, direction = "intermediate", None
    return Classification(
        kind=kind,
        direction=direction,
        per_component=per_comp,
        predicted_kernel=kernel,
        reticulate=reticulate,
        lattice=total,
    )


# -- planarization -----------------------------------------------------------

def _seg_point_param(A, D, P, eps):
    """Parameter of P on segment A + s*D if it lies on it within eps, else None."""
    L2 = float(D @ D)
    if L2 <= 0:
        return None
    s = float((P - A) @ D) / L2
    if s < -0.5 or s > 1.5:
        return None
    closest = A + s * D
    if np.linalg.norm(P - closest) > eps:
        return None
    return s


def _translate_range(Amin, Amax, Bmin, Bmax):
    """Integer translates t with [Bmin+t, Bmax+t] overlapping [Amin, Amax]."""
    lo = int(np.ceil(Amin - Bmax - 1e-9))
    hi = int(np.floor(Amax - Bmin + 1e-9))
    return range(lo, hi + 1)


def planarize(net: PeriodicNetwork, eps_geom: float = EPS_GEOM_DEFAULT) -> PeriodicNetwork:
    """Insert nodes at geometric crossings so graph connectivity equals the
    topological connectivity of the support as a point set (n = 2 only).

    Transversal interior crossings of edge lifts become shared nodes, nodes
    within eps_geom are merged, collinear overlapping portions are split at
    shared endpoints with weights adding, and nodes lying on the interior of
    an edge split it.  The result is canonical: nodes sorted
    lexicographically, edges sorted, independent of input order; sub-threshold
    edges are dropped (they carry no support).  Idempotent up to eps_geom.
    """
    if net.dimension != 2:
        raise DimensionUnsupported("planarize requires dimension 2")
    sup = net.support()
    pos = sup.node_positions()
    E = len(sup.edges)
    starts = np.array([pos[e.u] for e in sup.edges]) if E else np.zeros((0, 2))
    disps = sup.displacements()
    lens = sup.lengths()

    # split parameters and the torus positions of the cut points
    cuts = [dict() for _ in range(E)]  # eidx -> {rounded s: (s, point)}

    def record_cut(eidx, s, point=None):
        ln = lens[eidx]
        margin = max(eps_geom / ln, 1e-13)
        if s <= margin or s >= 1.0 - margin:
            return
        if point is None:
            point = starts[eidx] + s * disps[eidx]
        key = round(s * ln / eps_geom)  # cluster parameters within eps along the edge
        cuts[eidx].setdefault(key, (s, np.asarray(point, dtype=float)))

    # (i) pairwise crossings and (iii) collinear overlaps, over all relevant lifts
    for i in range(E):
        Ai, Di = starts[i], disps[i]
        ibox_min, ibox_max = np.minimum(Ai, Ai + Di), np.maximum(Ai, Ai + Di)
        for j in range(i, E):
            Aj, Dj = starts[j], disps[j]
            jbox_min, jbox_max = np.minimum(Aj, Aj + Dj), np.maximum(Aj, Aj + Dj)
            tx = _translate_range(ibox_min[0] - eps_geom, ibox_max[0] + eps_geom,
                                  jbox_min[0], jbox_max[0])
            ty = _translate_range(ibox_min[1] - eps_geom, ibox_max[1] + eps_geom,
                                  jbox_min[1], jbox_max[1])
            for t0, t1 in itertools.product(tx, ty):
                if j == i and t0 == 0 and t1 == 0:
                    continue
                t = np.array([t0, t1], dtype=float)
                B = Aj + t
                cross = Di[0] * Dj[1] - Di[1] * Dj[0]
                rel = B - Ai
                if abs(cross) > eps_geom * lens[i] * lens[j]:
                    s = (rel[0] * Dj[1] - rel[1] * Dj[0]) / cross
                    u = (rel[0] * Di[1] - rel[1] * Di[0]) / cross
                    mi = max(eps_geom / lens[i], 1e-13)
                    mj = max(eps_geom / lens[j], 1e-13)
                    if -mi < s < 1 + mi and -mj < u < 1 + mj:
                        P = Ai + s * Di
                        record_cut(i, s, P)
                        record_cut(j, u, P - t)
                else:
                    # parallel: same line within eps?
                    off = rel[0] * Di[1] - rel[1] * Di[0]
                    if abs(off) > eps_geom * lens[i]:
                        continue
                    L2 = float(Di @ Di)
                    a = float(rel @ Di) / L2
                    b = a + float(Dj @ Di) / L2
                    lo, hi = min(a, b), max(a, b)
                    lo, hi = max(lo, 0.0), min(hi, 1.0)
                    if hi - lo <= eps_geom / lens[i]:
                        continue
                    for s in (lo, hi):
                        P = Ai + s * Di
                        record_cut(i, s, P)
                        sj = _seg_point_param(B, Dj, P, 2 * eps_geom)
                        if sj is not None:
                            record_cut(j, sj, P - t)

    # nodes lying on edge interiors also split them
    for i in range(E):
        Ai, Di = starts[i], disps[i]
        ibox_min, ibox_max = np.minimum(Ai, Ai + Di), np.maximum(Ai, Ai + Di)
        for p in pos:
            tx = _translate_range(ibox_min[0] - eps_geom, ibox_max[0] + eps_geom, p[0], p[0])
            ty = _translate_range(ibox_min[1] - eps_geom, ibox_max[1] + eps_geom, p[1], p[1])
            for t0, t1 in itertools.product(tx, ty):
                P = p + np.array([t0, t1], dtype=float)
                s = _seg_point_param(Ai, Di, P, eps_geom)
                if s is not None:
                    record_cut(i, s)

    # rebuild: new nodes live at reduced cut positions; shifts telescope
    new_points = [p.copy() for p in pos]

    def intern_point(pt):
        new_points.append(np.asarray(pt, dtype=float))
        return len(new_points) - 1

    new_edges = []
    for i, e in enumerate(sup.edges):
        ss = sorted(v for v in cuts[i].values())
        if not ss:
            new_edges.append((e.u, e.v, e.shift, e.weight))
            continue
        A = starts[i]
        chain = [(e.u, (0,) * 2)]
        for s, _pt in ss:
            lift = A + s * disps[i]
            k = np.floor(lift).astype(int)
            red = lift - k
            red[red >= 1.0] -= 1.0
            k = (lift - red).astype(int)
            chain.append((intern_point(red), tuple(int(x) for x in k)))
        chain.append((e.v, tuple(int(z) for z in e.shift)))
        for (a, ka), (b, kb) in zip(chain, chain[1:]):
            shift = tuple(int(x - y) for x, y in zip(kb, ka))
            new_edges.append((a, b, shift, e.weight))

    # merge nodes within eps_geom (torus metric) via union-find
    m = len(new_points)
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order = sorted(range(m), key=lambda i: tuple(new_points[i]))
    for ai in range(m):
        for bi in range(ai + 1, m):
            a, b = order[ai], order[bi]
            diff = new_points[a] - new_points[b]
            diff -= np.round(diff)
            if float(np.abs(diff).max()) <= eps_geom:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    # representative position: lexicographically smallest member of the cluster
    cluster_members = {}
    for idx in range(m):
        cluster_members.setdefault(find(idx), []).append(idx)
    rep_point = {}
    for root, members in cluster_members.items():
        rep_point[root] = min((tuple(new_points[i]) for i in members))

    # merging a node across the wrap (e.g. 1-eps with 0) changes lift offsets
    wrap_fix = {}
    for idx in range(m):
        root = find(idx)
        diff = np.asarray(rep_point[root]) - new_points[idx]
        wrap_fix[idx] = np.round(diff).astype(int)

    merged_edges = []
    for (a, b, shift, w) in new_edges:
        ra, rb = find(a), find(b)
        z = tuple(int(s) + int(fb) - int(fa)
                  for s, fa, fb in zip(shift, wrap_fix[a], wrap_fix[b]))
        merged_edges.append((ra, rb, z, w))

    # canonical node ordering
    roots = sorted(set(find(i) for i in range(m)), key=lambda r: rep_point[r])
    renum = {r: i for i, r in enumerate(roots)}
    nodes = [TorusPoint(rep_point[r]) for r in roots]

    # canonical edge orientation + dedup (weights of coincident portions add)
    agg = {}
    for (a, b, z, w) in merged_edges:
        a2, b2 = renum[a], renum[b]
        if (b2, a2) < (a2, b2) or (a2 == b2 and _flip_shift(z)):
            a2, b2, z = b2, a2, tuple(-x for x in z)
        if a2 == b2 and all(x == 0 for x in z):
            continue  # degenerate remnant below merge tolerance
        key = (a2, b2, z)
        agg[key] = agg.get(key, 0.0) + w
    edges = [Edge(a, b, z, w) for (a, b, z), w in sorted(agg.items())]
    return PeriodicNetwork(2, nodes, edges)


def _flip_shift(z) -> bool:
    for x in z:
        if x != 0:
            return x < 0
    return False
