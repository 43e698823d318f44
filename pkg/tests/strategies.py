"""Seeded random scenario generator for the property suites."""

from __future__ import annotations

from math import prod

import numpy as np

from lwfs.scenario import AgentSpec, Channel, LWFSpec
from lwfs.tensor import DensityOperator, RegisterLayout, StateVector

SEED = 20240917
N_SCENARIOS = 200
MAX_TOTAL_DIM = 96
MAX_MEASURED_DIM = 4


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_basis(rng: np.random.Generator, d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) if rng.random() < 0.3 else haar_unitary(rng, d)


def random_kraus(rng: np.random.Generator, d: int) -> tuple[np.ndarray, ...]:
    """A unitary, or a two-operator channel cut from a random isometry."""
    if rng.random() < 0.5:
        return (haar_unitary(rng, d),)
    v = haar_unitary(rng, 2 * d)[:, :d]
    return (v[:d], v[d:])


def random_pure(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def _pick(rng, labels, dims, cap):
    """One or two distinct labels with product dimension <= cap."""
    order = list(rng.permutation(len(labels)))
    first = labels[order[0]]
    chosen = [first]
    if len(labels) > 1 and rng.random() < 0.35:
        second = labels[order[1]]
        if dims[first] * dims[second] <= cap:
            chosen.append(second)
    return chosen


def random_scenario(rng: np.random.Generator, untouched: bool = False, max_agents: int = 4) -> LWFSpec:
    """Random well-formed scenario; ``untouched`` keeps every memory away from later agents."""
    while True:
        n_sys = int(rng.integers(1, 3))
        systems = [(f"S{k}", int(rng.integers(2, 4))) for k in range(n_sys)]
        dims = dict(systems)
        layout = RegisterLayout.of(*systems)
        n_agents = int(rng.integers(1, max_agents + 1))
        agents = []
        for i in range(1, n_agents + 1):
            pool = [lb for lb, _ in systems]
            if not untouched:
                pool += [a.memory for a in agents if dims[a.memory] <= 3]
            measures = _pick(rng, pool, dims, MAX_MEASURED_DIM)
            d = prod(dims[lb] for lb in measures)
            memory = f"M{i}"
            dims[memory] = d
            channel = None
            if rng.random() < 0.4:
                ch_pool = [lb for lb, _ in systems]
                if not untouched:
                    ch_pool += [a.memory for a in agents] + [memory]
                support = _pick(rng, ch_pool, dims, 6)
                channel = Channel(tuple(support), random_kraus(rng, prod(dims[lb] for lb in support)))
            agents.append(AgentSpec(i, f"a{i}", tuple(measures), random_basis(rng, d), memory,
                                    channel=channel, pinned=bool(rng.random() < 0.2)))
        total = layout.total_dim * prod(a.dim for a in agents)
        if total > MAX_TOTAL_DIM:
            continue
        dsys = layout.total_dim
        if rng.random() < 0.7:
            initial = StateVector(layout, random_pure(rng, dsys))
        else:
            vs = [random_pure(rng, dsys) for _ in range(2)]
            w = rng.random()
            rho = w * np.outer(vs[0], vs[0].conj()) + (1 - w) * np.outer(vs[1], vs[1].conj())
            initial = DensityOperator(layout, rho)
        return LWFSpec(layout, tuple(agents), initial, name="random")


def scenario_corpus(n: int = N_SCENARIOS, seed: int = SEED) -> list[LWFSpec]:
    """Fixed corpus: every fourth scenario keeps its memories untouched."""
    rng = np.random.default_rng(seed)
    return [random_scenario(rng, untouched=(k % 4 == 3)) for k in range(n)]


def random_settings(rng: np.random.Generator, spec: LWFSpec) -> tuple[int, ...]:
    return tuple(1 if a.pinned else int(rng.integers(0, 2)) for a in spec.agents)
