"""Command-line surface: network JSON files in, deterministic reports and
CSV out.  This is the only module with I/O.

Exit codes: 0 success / verdict holds, 2 input or solver error, 3 theorem
verdict mismatch or an unrealizable matrix.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import fixtures
from .adaptation import FluctuationModel, adapt, thread_count
from .analysis import (
    balance_report,
    maximality_check,
    monotonicity_check,
    wiener_tolerance,
)
from .cellsolver import (
    BudgetExceeded,
    SolveFailure,
    effective_tensor,
    homogenize_window,
)
from .core import (
    BadTrace,
    Edge,
    Mode,
    NetworkMedium,
    NotRealizable,
    PeriodicNetwork,
    kernel_basis,
    mass_tensor,
    realize_as_mixture,
    symmetrize,
)
from .topology import classify, components, planarize

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_MISMATCH = 3


class NetworkFileError(ValueError):
    pass


# -- NetworkFile JSON ----------------------------------------------------------

def medium_from_dict(doc) -> NetworkMedium:
    def need(key, ctx="document"):
        if key not in doc:
            raise NetworkFileError(f"{ctx}: missing field '{key}'")
        return doc[key]

    n = need("dimension")
    if not isinstance(n, int) or n < 1:
        raise NetworkFileError("field 'dimension': expected a positive integer")
    mode = need("mode")
    if mode not in ("isotropic", "tangential"):
        raise NetworkFileError("field 'mode': expected 'isotropic' or 'tangential'")
    nodes_raw = need("nodes")
    edges_raw = need("edges")
    nodes = []
    for i, coords in enumerate(nodes_raw):
        if not isinstance(coords, list) or len(coords) != n:
            raise NetworkFileError(f"nodes[{i}]: expected {n} coordinates")
        nodes.append(tuple(float(x) for x in coords))
    edges = []
    for i, e in enumerate(edges_raw):
        for key in ("u", "v", "shift", "weight"):
            if key not in e:
                raise NetworkFileError(f"edges[{i}]: missing field '{key}'")
        if not isinstance(e["shift"], list) or len(e["shift"]) != n:
            raise NetworkFileError(f"edges[{i}].shift: expected {n} integers")
        edges.append(Edge(e["u"], e["v"], tuple(int(z) for z in e["shift"]), float(e["weight"])))
    try:
        net = PeriodicNetwork(n, nodes, edges)
    except ValueError as ex:
        raise NetworkFileError(str(ex)) from ex
    return NetworkMedium(net, Mode(mode))


def load_network_file(path) -> NetworkMedium:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as ex:
        raise NetworkFileError(f"{path}: {ex.strerror or ex}") from ex
    except json.JSONDecodeError as ex:
        raise NetworkFileError(f"{path}:{ex.lineno}:{ex.colno}: {ex.msg}") from ex
    if not isinstance(doc, dict):
        raise NetworkFileError(f"{path}: top level must be an object")
    try:
        return medium_from_dict(doc)
    except NetworkFileError as ex:
        raise NetworkFileError(f"{path}: {ex}") from ex


def _num(x: float) -> float:
    # canonical 17-significant-digit serialization, value-identical round trip
    return float(f"{float(x):.17g}")


def dump_network_file(medium: NetworkMedium) -> str:
    """Canonical serialization: stored order, 17 significant digits, one node
    or edge per line; value-identical round trip."""
    net = medium.network
    lines = [
        "{",
        f'  "dimension": {net.dimension},',
        f'  "mode": "{medium.mode.value}",',
        '  "nodes": [',
    ]
    node_rows = [
        "    [" + ", ".join(f"{x:.17g}" for x in p.coords) + "]" for p in net.nodes
    ]
    lines.append(",\n".join(node_rows))
    lines.append("  ],")
    lines.append('  "edges": [')
    edge_rows = [
        '    {"u": %d, "v": %d, "shift": [%s], "weight": %s}'
        % (e.u, e.v, ", ".join(str(z) for z in e.shift), f"{e.weight:.17g}")
        for e in net.edges
    ]
    lines.append(",\n".join(edge_rows))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- formatting ----------------------------------------------------------------

def fmt(x: float) -> str:
    return f"{float(x): .12e}"


def fmt_matrix(M, indent="  ") -> str:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return indent + "(empty)"
    return "\n".join(indent + " ".join(fmt(x) for x in row) for row in np.atleast_2d(M))


def fmt_vec(v) -> str:
    return "(" + ", ".join(str(int(x)) for x in v) + ")"


def principal_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle between two subspaces given by orthonormal
    rows; pi/2 when dimensions differ."""
    if A.shape[0] != B.shape[0]:
        return math.pi / 2.0
    if A.shape[0] == 0:
        return 0.0
    s = np.linalg.svd(A @ B.T, compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    return float(np.arccos(s.min()))


# -- subcommands ---------------------------------------------------------------

def cmd_analyze(args) -> int:
    medium = load_network_file(args.path)
    net = medium.network
    if net.dimension == 2 and not args.no_planarize:
        net = planarize(net)
        medium = NetworkMedium(net, medium.mode)
    M = mass_tensor(medium)
    et = effective_tensor(medium)
    vals = np.linalg.eigvalsh(symmetrize(et.Q))
    kern = kernel_basis(et.Q, tol_rank=args.tol_rank)
    cls = classify(net)
    print("mass tensor:")
    print(fmt_matrix(M))
    print("effective tensor Q:")
    print(fmt_matrix(et.Q))
    print(f"solver residual: {fmt(et.residual)}")
    print("eigenvalues: " + " ".join(fmt(v) for v in vals))
    print("numerical kernel (rows):")
    print(fmt_matrix(kern))
    for comp_id, lat in cls.per_component:
        gens = ", ".join(fmt_vec(g) for g in lat.generators) or "none"
        basis = ", ".join(fmt_vec(b) for b in lat.basis) or "none"
        print(f"component {comp_id}: rank {lat.rank}; generators {gens}; basis {basis}")
    kind = cls.kind
    if kind == "quasi_laminate":
        kind = f"quasi-laminate in direction {fmt_vec(cls.direction)}"
    print(f"classification: {kind}; reticulate: {'yes' if cls.reticulate else 'no'}")
    print("predicted kernel (rows):")
    print(fmt_matrix(cls.predicted_kernel))
    angle = principal_angle(kern, cls.predicted_kernel)
    match = angle <= 1e-6
    print(f"kernel match: {'yes' if match else 'no'} (angle={fmt(angle)})")
    return EXIT_OK if match else EXIT_MISMATCH


def cmd_stationarity(args) -> int:
    medium = load_network_file(args.path)
    rep = balance_report(medium)
    print(f"mode: {medium.mode.value}")
    unbalanced = [nb for nb in rep.per_node if nb.norm > 0.0]
    print(f"balance: max residual {fmt(rep.max_residual)} "
          f"({'balanced' if rep.balanced else 'unbalanced'})")
    for nb in unbalanced[:10]:
        print(f"  node {nb.node}: residual norm {fmt(nb.norm)}")
    mr = maximality_check(medium)
    print(f"mass gap norm: {fmt(mr.gap_norm)} "
          f"({'maximal' if mr.is_maximal else 'not maximal'})")
    equivalence_maximal = mr.is_maximal
    if medium.mode is Mode.ISOTROPIC:
        print("note: " + rep.mode_note)
        tangential = NetworkMedium(medium.network, Mode.TANGENTIAL)
        mr_t = maximality_check(tangential)
        print(f"tangential mass gap norm: {fmt(mr_t.gap_norm)} "
              f"({'maximal' if mr_t.is_maximal else 'not maximal'})")
        equivalence_maximal = mr_t.is_maximal
    agree = rep.balanced == equivalence_maximal
    print(f"verdicts agree: {'yes' if agree else 'no'}")
    return EXIT_OK if agree else EXIT_MISMATCH


def cmd_homogenize(args) -> int:
    medium = load_network_file(args.path)
    R_list = [int(r) for r in args.R.split(",") if r.strip()]
    Qp = effective_tensor(medium).Q
    trace = homogenize_window(medium, R_list)
    n = medium.network.dimension
    header = ["R"] + [f"Q{i + 1}{j + 1}" for i in range(n) for j in range(n)] + ["error_F"]
    print(",".join(header))
    for w in trace.windows:
        err = float(np.linalg.norm(w.Q - Qp))
        cells = [str(w.R)] + [f"{x:.12e}" for x in w.Q.ravel()] + [f"{err:.12e}"]
        print(",".join(cells))
    return EXIT_OK


def _sample_support_centers(net: PeriodicNetwork, count: int, seed: int):
    """Edge-length-weighted centers on the support, seeded."""
    sup = net.support()
    lens = sup.lengths()
    if not len(lens):
        return []
    rng = np.random.default_rng(seed)
    pos = sup.node_positions()
    disp = sup.displacements()
    probs = lens / lens.sum()
    picks = rng.choice(len(lens), size=count, p=probs)
    ts = rng.random(count)
    centers = []
    for e_idx, t in zip(picks, ts):
        e = sup.edges[int(e_idx)]
        centers.append(tuple(pos[e.u] + t * disp[int(e_idx)]))
    return centers


def cmd_monotonicity(args) -> int:
    medium = load_network_file(args.path)
    centers = _sample_support_centers(medium.network, args.centers, args.seed)
    if not centers:
        print("empty support; nothing to check")
        return EXIT_OK
    radii = np.linspace(0.4 / args.radii, 0.4, args.radii)
    try:
        result = monotonicity_check(medium, centers, radii, args.alpha)
    except ValueError as ex:
        raise NetworkFileError(str(ex)) from ex
    print(f"alpha: {args.alpha}")
    print(f"centers: {len(centers)}; radii: {len(radii)} in (0, 0.4]")
    print(f"monotone: {'yes' if result.passed else 'no'} "
          f"(worst violation {fmt(result.worst_violation)})")
    print("center,r,mass")
    from .analysis import ball_mass_profile

    for ci, c in enumerate(centers):
        prof = ball_mass_profile(medium, c, radii)
        for r, m in zip(prof.radii, prof.masses):
            print(f"{ci},{r:.12e},{m:.12e}")
    return EXIT_OK if result.passed else EXIT_MISMATCH


def cmd_adapt(args) -> int:
    medium = load_network_file(args.path)
    if args.mode == "random":
        mode, sink = "random", None
    elif args.mode.startswith("fixed:"):
        mode, sink = "fixed", int(args.mode.split(":", 1)[1])
    else:
        raise NetworkFileError("--mode must be 'random' or 'fixed:NODE'")
    model = FluctuationModel(
        source_node=args.source,
        patch_count=args.patches,
        patch_strength=args.strength,
        mode=mode,
        sink_node=sink,
        seed=args.seed,
    )
    trace = adapt(
        medium,
        model,
        steps=args.steps,
        samples_per_step=args.samples,
        dt=args.dt,
        trace_stride=args.stride,
        threads=thread_count(),
    )
    lines = ["step,lambda_min,lambda_max,ratio,dissipation,total_mass"]
    for s in trace.steps:
        vals = np.linalg.eigvalsh(s.Q)
        lines.append(
            f"{s.step},{vals[0]:.12e},{vals[-1]:.12e},{s.lambda_min_ratio:.12e},"
            f"{s.dissipation:.12e},{s.total_mass:.12e}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    final = trace.steps[-1]
    print(f"final lambda_min ratio: {fmt(final.lambda_min_ratio)}")
    if trace.underflow_events:
        print(f"weight underflow events: {len(trace.underflow_events)}")
    return EXIT_OK


def cmd_realize(args) -> int:
    entries = [float(x) for x in args.matrix.split(",") if x.strip()]
    # infer n from the upper-triangle length n(n+1)/2
    n = int((math.isqrt(8 * len(entries) + 1) - 1) // 2)
    if n * (n + 1) // 2 != len(entries):
        raise NetworkFileError(
            f"--matrix needs n(n+1)/2 upper-triangle entries, got {len(entries)}")
    A = np.zeros((n, n))
    it = iter(entries)
    for i in range(n):
        for j in range(i, n):
            val = next(it)
            A[i, j] = val
            A[j, i] = val
    try:
        mix = realize_as_mixture(A, args.k)
    except NotRealizable as ex:
        print(f"not realizable with k={args.k}: top eigenvalue {fmt(ex.lambda_max)} "
              f"exceeds 1/k = {fmt(1.0 / args.k)}")
        return EXIT_MISMATCH
    except BadTrace as ex:
        raise NetworkFileError(str(ex)) from ex
    err = float(np.linalg.norm(mix.reconstruction() - symmetrize(A)))
    print(f"k: {args.k}; atoms: {len(mix.atoms)}")
    for idx, atom in enumerate(mix.atoms):
        print(f"atom {idx}: weight {fmt(atom.lam)}; basis rows:")
        print(fmt_matrix(atom.basis, indent="    "))
    print(f"reconstruction error: {fmt(err)}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    medium = load_network_file(args.path)
    total = effective_tensor(medium).Q
    comps = components(medium.network)
    print(f"components: {len(comps)}")
    acc = np.zeros_like(total)
    for idx, comp in enumerate(comps):
        Q = effective_tensor(NetworkMedium(comp, medium.mode)).Q
        acc += Q
        print(f"component {idx}: nodes {len(comp.nodes)}, edges {len(comp.edges)}, Q:")
        print(fmt_matrix(Q))
    err = float(np.linalg.norm(acc - total))
    tol = wiener_tolerance(mass_tensor(medium))
    ok = err <= tol
    print(f"sum of component tensors vs total: error {fmt(err)} "
          f"({'additive' if ok else 'MISMATCH'})")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_fixture(args) -> int:
    maker = fixtures.NAMED_FIXTURES.get(args.name)
    if maker is None:
        names = ", ".join(sorted(fixtures.NAMED_FIXTURES))
        raise NetworkFileError(f"unknown fixture '{args.name}'; available: {names}")
    sys.stdout.write(dump_network_file(maker()))
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="reticulate",
        description="effective conductance tensors of periodic networks on the torus",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="tensor, lattice and kernel-match report")
    p.add_argument("path")
    p.add_argument("--tol-rank", type=float, default=1e-8)
    p.add_argument("--no-planarize", action="store_true",
                   help="skip crossing resolution (debugging; n=2 only)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("stationarity", help="balance vs maximality report")
    p.add_argument("path")
    p.set_defaults(func=cmd_stationarity)

    p = sub.add_parser("homogenize", help="windowed tensors as CSV")
    p.add_argument("path")
    p.add_argument("--R", required=True, help="comma-separated half-widths")
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("monotonicity", help="ball-mass ratio check")
    p.add_argument("path")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--centers", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radii", type=int, default=50)
    p.set_defaults(func=cmd_monotonicity)

    p = sub.add_parser("adapt", help="fluctuation-driven conductance flow")
    p.add_argument("path")
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--samples", type=int, default=6)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", default="random", help="random | fixed:NODE")
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--patches", type=int, default=4)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", default=None, help="trace CSV path (default stdout)")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("realize", help="projection-mixture decomposition")
    p.add_argument("--matrix", required=True,
                   help="row-major upper triangle, comma separated")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("decompose", help="per-component tensors and additivity")
    p.add_argument("path")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("fixture", help="emit a named example network as JSON")
    p.add_argument("name")
    p.set_defaults(func=cmd_fixture)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NetworkFileError, BudgetExceeded, SolveFailure, ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
