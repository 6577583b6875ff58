"""Darcy flow under random source/sink fluctuations and the dissipation
gradient flow on edge conductances, with reticulation metrics over time.

Each step draws injection patterns, solves the weighted-Laplacian Neumann
problem per sample, and moves every edge weight along the per-edge derivative
of the expected dissipation, E[(dphi_e / l_e)^2]; weights are then rescaled
so the total mass Sum a_e l_e is conserved (the raw flow only grows
conductance, renormalizing isolates the geometric reorganization).  The torus
has no boundary, so the source is a designated node.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cellsolver import CG_TARGET, TOL_SOLVE, SolveFailure, _cg, _GraphSystem, effective_tensor
from .core import Mode, NetworkMedium, PeriodicNetwork
from .topology import component_labels

WEIGHT_FLOOR = 1e-14


class UnbalancedInjection(ValueError):
    """Injected mass must sum to zero on every connected component."""


def thread_count() -> int:
    env = os.environ.get("RETICULATE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass
class FluctuationModel:
    """Source node plus a sink model: 'random' scatters patch_count unit
    sinks uniformly (without replacement, source excluded); 'fixed' sends all
    withdrawn mass to sink_node.  Total injected mass is zero in every
    sample."""

    source_node: int
    patch_count: int = 4
    patch_strength: float = 1.0
    mode: str = "random"  # 'random' | 'fixed'
    sink_node: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "fixed"):
            raise ValueError("mode must be 'random' or 'fixed'")
        if self.mode == "fixed" and self.sink_node is None:
            raise ValueError("fixed mode needs a sink node")
        if self.patch_count < 1 or self.patch_strength <= 0:
            raise ValueError("need patch_count >= 1 and positive strength")

    def draw(self, n_nodes: int, step: int, sample: int) -> np.ndarray:
        """Injection vector for one sample; the sub-generator is a stateless
        mix of (seed, step, sample) so parallel sampling reproduces."""
        m = np.zeros(n_nodes)
        m[self.source_node] += self.patch_count * self.patch_strength
        if self.mode == "fixed":
            m[self.sink_node] -= self.patch_count * self.patch_strength
            return m
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(step, sample)))
        candidates = np.array([i for i in range(n_nodes) if i != self.source_node])
        sinks = rng.choice(candidates, size=self.patch_count, replace=False)
        np.subtract.at(m, sinks, self.patch_strength)
        return m


def _flow_system(net: PeriodicNetwork):
    tails = np.array([e.u for e in net.edges], dtype=int)
    heads = np.array([e.v for e in net.edges], dtype=int)
    lens = net.lengths()
    c = net.weights() / lens
    D = net.displacements()
    labels = component_labels(net)
    sys = _GraphSystem(len(net.nodes), tails, heads, c, D, labels=labels)
    return sys, labels, lens


def darcy_solve(net: PeriodicNetwork, injection) -> np.ndarray:
    """Node potentials of the flow problem L(a) phi = m with per-component
    zero-mean normalization.  Raises UnbalancedInjection when some component's
    net mass is nonzero (beyond 1e-12 of the total injected scale)."""
    m = np.asarray(injection, dtype=float)
    if m.shape != (len(net.nodes),):
        raise ValueError("injection vector length mismatch")
    sys, labels, _ = _flow_system(net)
    scale = max(float(np.abs(m).sum()), 1e-300)
    for lab in np.unique(labels):
        if abs(float(m[labels == lab].sum())) > 1e-12 * scale:
            raise UnbalancedInjection(f"component {lab} has net injected mass")
    phi, rel = _cg(sys.matvec, m, CG_TARGET, max(20 * sys.n_free, 50), sys.project)
    if rel > TOL_SOLVE:
        raise SolveFailure(f"flow residual {rel:.3e} above {TOL_SOLVE}")
    return phi


@dataclass
class TraceStep:
    step: int
    weights: np.ndarray
    Q: np.ndarray
    lambda_min_ratio: float
    dissipation: float
    total_mass: float


@dataclass
class AdaptationTrace:
    steps: list = field(default_factory=list)
    underflow_events: list = field(default_factory=list)  # (step, edge index)


def _eig_ratio(Q: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(Q)
    if vals[-1] <= 0:
        return 0.0
    return float(max(vals[0], 0.0) / vals[-1])


def adapt(
    medium: NetworkMedium,
    model: FluctuationModel,
    steps: int,
    samples_per_step: int,
    dt: float,
    trace_stride: int = 1,
    threads: int | None = None,
) -> AdaptationTrace:
    """Run the renormalized explicit-Euler conductance flow.

    Per step: draw samples_per_step injections, solve the flow problem for
    each (sub-seeded by (seed, step, sample)), average the squared tangential
    gradients into g_e, update a_e += dt * g_e, rescale to conserve total
    mass, and record the effective tensor every trace_stride steps.  Identical
    inputs give bit-identical trajectories for any thread count: samples are
    reduced in index order.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    net = medium.network
    if np.any(net.weights() <= 0):
        raise ValueError("initial weights must be strictly positive")
    n_workers = threads if threads is not None else thread_count()
    lens = net.lengths()
    weights = net.weights().copy()
    total_mass = float(weights @ lens)
    trace = AdaptationTrace()

    def record(step_idx, w, dissipation):
        current = net.with_weights(w)
        Q = effective_tensor(NetworkMedium(current, medium.mode)).Q
        trace.steps.append(
            TraceStep(
                step=step_idx,
                weights=w.copy(),
                Q=Q,
                lambda_min_ratio=_eig_ratio(Q),
                dissipation=dissipation,
                total_mass=float(w @ lens),
            )
        )

    for step in range(1, steps + 1):
        current = net.with_weights(weights)
        sys, labels, _ = _flow_system(current)

        def solve_sample(sample):
            m = model.draw(len(net.nodes), step, sample)
            for lab in np.unique(labels):
                if abs(float(m[labels == lab].sum())) > 1e-12 * max(float(np.abs(m).sum()), 1e-300):
                    raise UnbalancedInjection(f"component {lab} has net injected mass")
            phi, rel = _cg(sys.matvec, m, CG_TARGET, max(20 * sys.n_free, 50), sys.project)
            if rel > TOL_SOLVE:
                raise SolveFailure(f"flow residual {rel:.3e} above {TOL_SOLVE}")
            drop = sys.edge_drop(phi)
            return drop

        if n_workers > 1 and samples_per_step > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                drops = list(pool.map(solve_sample, range(samples_per_step)))
        else:
            drops = [solve_sample(s) for s in range(samples_per_step)]

        g = np.zeros(len(weights))
        dissipation = 0.0
        conduct = weights / lens
        for drop in drops:  # fixed reduction order: deterministic
            g += (drop / lens) ** 2
            dissipation += float(conduct @ (drop * drop))
        g /= samples_per_step
        dissipation /= samples_per_step

        weights = weights + dt * g
        weights *= total_mass / float(weights @ lens)
        low = weights < WEIGHT_FLOOR
        if np.any(low):
            for idx in np.nonzero(low)[0]:
                trace.underflow_events.append((step, int(idx)))
            weights[low] = WEIGHT_FLOOR

        if step % trace_stride == 0 or step == steps:
            record(step, weights, dissipation)
    if not trace.steps:
        record(0, weights, 0.0)
    return trace
