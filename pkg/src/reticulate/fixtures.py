"""Canonical networks used throughout the tests, the CLI demos and the
acceptance suite.

All constructions are exact where the geometry allows: the honeycomb junction
height and the diamond-pattern proportions are chosen so that every node
balance Sum_e a_e T_e = 0 holds to machine precision with the stated weights.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Edge, Mode, NetworkMedium, PeriodicNetwork


def square_grid(weight: float = 1.0, mode: Mode = Mode.TANGENTIAL) -> NetworkMedium:
    """One node with two axis loops: the unit square grid."""
    net = PeriodicNetwork(
        2,
        [(0.0, 0.0)],
        [Edge(0, 0, (1, 0), weight), Edge(0, 0, (0, 1), weight)],
    )
    return NetworkMedium(net, mode)


def axis_loop(weight: float = 1.0, offset: float = 0.0, axis: int = 0) -> NetworkMedium:
    """A single straight loop around one axis at the given transverse offset."""
    point = (0.0, offset) if axis == 0 else (offset, 0.0)
    shift = (1, 0) if axis == 0 else (0, 1)
    net = PeriodicNetwork(2, [point], [Edge(0, 0, shift, weight)])
    return NetworkMedium(net, Mode.TANGENTIAL)


def diagonal_loop(weight: float = 1.0) -> NetworkMedium:
    """A single loop of homotopy class (1, 1)."""
    net = PeriodicNetwork(2, [(0.0, 0.0)], [Edge(0, 0, (1, 1), weight)])
    return NetworkMedium(net, Mode.TANGENTIAL)


def open_segment(weight: float = 1.0) -> NetworkMedium:
    """A contractible segment: no cycles, trivial effective tensor."""
    net = PeriodicNetwork(2, [(0.0, 0.0), (0.5, 0.0)], [Edge(0, 1, (0, 0), weight)])
    return NetworkMedium(net, Mode.TANGENTIAL)


def t_junction(weight: float = 1.0) -> NetworkMedium:
    """A horizontal loop with a dead-end stem: the canonical unbalanced net.

    At the junction the outgoing tangents are e1, -e1 and e2, leaving the
    residual (0, weight); the stem tip is unbalanced too.
    """
    net = PeriodicNetwork(
        2,
        [(0.5, 0.5), (0.5, 0.75)],
        [Edge(0, 0, (1, 0), weight), Edge(0, 1, (0, 0), weight)],
    )
    return NetworkMedium(net, Mode.TANGENTIAL)


def y_junction(weight: float = 1.0, spoke: float = 0.2) -> NetworkMedium:
    """Three spokes at 120 degrees from a central node (tips unbalanced)."""
    cx, cy = 0.5, 0.5
    nodes = [(cx, cy)]
    edges = []
    for ang_deg in (90.0, 210.0, 330.0):
        a = math.radians(ang_deg)
        nodes.append((cx + spoke * math.cos(a), cy + spoke * math.sin(a)))
        edges.append(Edge(0, len(nodes) - 1, (0, 0), weight))
    net = PeriodicNetwork(2, nodes, edges)
    return NetworkMedium(net, Mode.TANGENTIAL)


def honeycomb(weight: float = 1.0) -> NetworkMedium:
    """A 120-degree honeycomb on the unit torus: 4 nodes, 6 edges, balanced.

    Two vertical stems at x = 1/4 and x = 3/4 (offset by half a period) joined
    by slanted edges; the slant rise g = 1/(2*sqrt(3)) makes every junction an
    exact 120-degree tripod, so equal weights are stationary.
    """
    g = 1.0 / (2.0 * math.sqrt(3.0))
    s = 0.5 - g  # stem length
    p1 = (0.25, 0.0)
    p2 = (0.25, s)
    p3 = (0.75, 0.5)
    p4 = (0.75, 0.5 + s)
    edges = [
        Edge(0, 1, (0, 0), weight),   # stem 1
        Edge(2, 3, (0, 0), weight),   # stem 2
        Edge(1, 2, (0, 0), weight),   # slant up-right
        Edge(1, 2, (-1, 0), weight),  # slant up-left
        Edge(3, 0, (1, 1), weight),   # slant up-right (wraps)
        Edge(3, 0, (0, 1), weight),   # slant up-left (wraps)
    ]
    net = PeriodicNetwork(2, [p1, p2, p3, p4], edges)
    return NetworkMedium(net, Mode.TANGENTIAL)


def diamond_pattern(k: int = 7, weight: float = 1.0) -> NetworkMedium:
    """A chain of k rhombi (inner angles pi/3 and 2*pi/3) along y = 1/2 with
    their long diagonals on the midline, tip to tip, plus a vertical stem
    wrapping the torus from each rhombus top to its own bottom.

    Tips are 4-valent straight crossings and tops/bottoms are 120-degree
    tripods, so unit weights are stationary; the maximal valency is 4.
    """
    if k < 1:
        raise ValueError("need at least one rhombus")
    w = 1.0 / k                 # long diagonal = tip spacing
    side = w / math.sqrt(3.0)
    h = side / 2.0              # half of the short diagonal
    nodes = []
    tips = []
    tops = []
    bots = []
    for i in range(k):
        tips.append(len(nodes))
        nodes.append((i * w, 0.5))
    for i in range(k):
        tops.append(len(nodes))
        nodes.append(((i + 0.5) * w, 0.5 + h))
    for i in range(k):
        bots.append(len(nodes))
        nodes.append(((i + 0.5) * w, 0.5 - h))
    edges = []
    for i in range(k):
        right_tip = tips[(i + 1) % k]
        wrap = (1, 0) if i + 1 == k else (0, 0)
        edges.append(Edge(tips[i], tops[i], (0, 0), weight))
        edges.append(Edge(tops[i], right_tip, wrap, weight))
        edges.append(Edge(tips[i], bots[i], (0, 0), weight))
        edges.append(Edge(bots[i], right_tip, wrap, weight))
        edges.append(Edge(tops[i], bots[i], (0, 1), weight))  # stem, the long way
    net = PeriodicNetwork(2, nodes, edges)
    return NetworkMedium(net, Mode.TANGENTIAL)


def triangulated_grid(m: int = 8, weight: float = 1.0) -> NetworkMedium:
    """m x m torus grid with one diagonal per cell (right, up and up-right
    edges at every node)."""
    nodes = [(i / m, j / m) for i in range(m) for j in range(m)]

    def idx(i, j):
        return (i % m) * m + (j % m)

    edges = []
    for i in range(m):
        for j in range(m):
            a = idx(i, j)
            edges.append(Edge(a, idx(i + 1, j), (1 if i + 1 == m else 0, 0), weight))
            edges.append(Edge(a, idx(i, j + 1), (0, 1 if j + 1 == m else 0), weight))
            edges.append(
                Edge(a, idx(i + 1, j + 1),
                     (1 if i + 1 == m else 0, 1 if j + 1 == m else 0), weight)
            )
    net = PeriodicNetwork(2, nodes, edges)
    return NetworkMedium(net, Mode.TANGENTIAL)


def line_union(lines, mode: Mode = Mode.TANGENTIAL) -> NetworkMedium:
    """Union of straight closed loops, one per (class, offset, weight) triple.

    ``class`` is a primitive integer direction (p, q); the loop through the
    anchor point wraps the torus once per class.  Crossings are not resolved
    here; run planarize for the stationary version with shared nodes.
    """
    nodes = []
    edges = []
    for (pq, anchor, weight) in lines:
        nodes.append(tuple(anchor))
        edges.append(Edge(len(nodes) - 1, len(nodes) - 1, tuple(pq), weight))
    net = PeriodicNetwork(2, nodes, edges)
    return NetworkMedium(net, mode)


def gap_loop(delta: float, weight: float = 1.0) -> NetworkMedium:
    """An axis loop with a dead sub-edge of length delta: the support has a
    gap for every delta > 0, and closes only at delta = 0."""
    if delta <= 0:
        return axis_loop(weight)
    net = PeriodicNetwork(
        2,
        [(0.0, 0.0), (1.0 - delta, 0.0)],
        [Edge(0, 1, (0, 0), weight), Edge(1, 0, (1, 0), 0.0)],
    )
    return NetworkMedium(net, Mode.TANGENTIAL)


def two_parallel_loops(offsets=(0.25, 0.75), weight: float = 1.0) -> NetworkMedium:
    """Two disjoint horizontal loops (a two-component medium)."""
    nodes = [(0.0, offsets[0]), (0.0, offsets[1])]
    edges = [Edge(0, 0, (1, 0), weight), Edge(1, 1, (1, 0), weight)]
    return NetworkMedium(PeriodicNetwork(2, nodes, edges), Mode.TANGENTIAL)


NAMED_FIXTURES = {
    "square-grid": lambda: square_grid(),
    "square-grid-isotropic": lambda: square_grid(mode=Mode.ISOTROPIC),
    "diagonal-loop": lambda: diagonal_loop(),
    "open-segment": lambda: open_segment(),
    "t-junction": lambda: t_junction(),
    "y-junction": lambda: y_junction(),
    "honeycomb": lambda: honeycomb(),
    "diamond-7": lambda: diamond_pattern(7),
    "triangulated-grid-8": lambda: triangulated_grid(8),
    "two-parallel-loops": lambda: two_parallel_loops(),
}


# -- seeded random families ---------------------------------------------------

def random_network(seed: int, mode: Mode = Mode.TANGENTIAL,
                   n_nodes=(3, 12), n_edges=(4, 20), weight_range=(0.1, 2.0)) -> NetworkMedium:
    """Seeded random planar network with single-cell crossing vectors."""
    rng = np.random.default_rng(seed)
    N = int(rng.integers(n_nodes[0], n_nodes[1] + 1))
    E = int(rng.integers(n_edges[0], n_edges[1] + 1))
    nodes = [tuple(rng.random(2)) for _ in range(N)]
    edges = []
    while len(edges) < E:
        u = int(rng.integers(N))
        v = int(rng.integers(N))
        shift = tuple(int(z) for z in rng.integers(-1, 2, size=2))
        if u == v and shift == (0, 0):
            continue
        w = float(rng.uniform(*weight_range))
        edges.append(Edge(u, v, shift, w))
    return NetworkMedium(PeriodicNetwork(2, nodes, edges), mode)


_LINE_CLASSES = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2)]


def random_line_union(seed: int, n_lines=(2, 4), weight_range=(0.5, 2.0)) -> NetworkMedium:
    """Seeded union of straight loops; planarized, it is stationary for
    per-line constant weights (crossings contribute opposite tangent pairs)."""
    rng = np.random.default_rng(seed)
    k = int(rng.integers(n_lines[0], n_lines[1] + 1))
    chosen = rng.choice(len(_LINE_CLASSES), size=k, replace=False)
    lines = []
    for ci in chosen:
        pq = _LINE_CLASSES[int(ci)]
        anchor = tuple(rng.random(2))
        weight = float(rng.uniform(*weight_range))
        lines.append((pq, anchor, weight))
    return line_union(lines)
