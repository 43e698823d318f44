"""Born-rule predictions on augmented circuits.

Evaluation walks the circuit forward and branches only on agents whose
setting is 1. The resulting joint table over those agents is cached per
(prefix length, settings prefix) on the circuit; every conditional is a
ratio of sums over that table.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .compiler import AugmentedCircuit, ReducedCircuit
from .errors import (
    ConditioningOnNullEvent,
    InvalidPrior,
    PriorSupportInsufficient,
    SettingOutcomeMismatch,
    UnknownOutcome,
)
from .scenario import LWFSpec, check_settings, parse_assignment
from .tensor import (
    EPS,
    DensityOperator,
    LinearOperator,
    StateVector,
    apply,
    apply_local,
    born_probability,
    clamp_probability,
)

Assignment = tuple[tuple[int, int], ...]
AssignmentLike = Union[Mapping[str, Union[str, int]], Iterable[tuple[int, int]]]

_PRUNE = 1e-30


def as_assignment(spec: LWFSpec, obj: AssignmentLike) -> Assignment:
    """Normalize ``{name: label}`` or ``[(index, outcome)]`` to sorted index pairs."""
    if isinstance(obj, Mapping):
        if all(isinstance(k, str) for k in obj):
            return parse_assignment(spec, obj)
        obj = obj.items()
    pairs = {}
    for i, v in obj:
        a = spec.agent(int(i))
        pairs[a.index] = a.outcome_index(int(v))
    return tuple(sorted(pairs.items()))


@dataclass(frozen=True)
class PredictionQuery:
    targets: Assignment
    givens: Assignment = ()
    settings: Optional[tuple[int, ...]] = None

    @property
    def involved(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.targets) | frozenset(i for i, _ in self.givens)


def minimal_prefix(query: Union[PredictionQuery, Assignment], givens: Assignment = ()) -> int:
    """Largest agent index among targets and givens (0 when both are empty)."""
    if isinstance(query, PredictionQuery):
        involved = query.involved
    else:
        involved = {i for i, _ in query} | {i for i, _ in givens}
    return max(involved, default=0)


# ---------------------------------------------------------------- evolution

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LWFS_THREADS", "1")))
    except ValueError:
        return 1


def _evolve(circ: AugmentedCircuit, x: tuple[int, ...], k: int) -> np.ndarray:
    dims = circ.layout.dims
    m = len(dims)
    pure = circ.is_pure
    init = circ.initial_state
    if pure:
        t0 = init.amplitudes.reshape(dims)
    else:
        mat = init.matrix if isinstance(init, DensityOperator) else np.outer(init.amplitudes, init.amplitudes.conj())
        t0 = mat.reshape(dims * 2)
    n = circ.layout.total_dim

    def act(t, mat, axes, sub):
        t = apply_local(t, mat, axes, sub)
        if not pure:
            t = apply_local(t, mat.conj(), [m + a for a in axes], sub)
        return t

    def weight(t):
        if pure:
            v = t.reshape(-1)
            return float(np.vdot(v, v).real)
        return float(np.trace(t.reshape(n, n)).real)

    def channel(t, st):
        if st.channel is None:
            return t
        sub = st.channel[0].support.dims
        if len(st.channel) == 1:
            return act(t, st.channel[0].matrix, st.channel_axes, sub)
        return sum(act(t, op.matrix, st.channel_axes, sub) for op in st.channel)

    shape = tuple(len(circ.stages[i].outcomes) for i in range(k) if x[i])
    out = np.zeros(shape)

    def rec(i, t, idx):
        if i == k:
            out[idx] = weight(t)
            return
        st = circ.stages[i]
        sub = st.copy.support.dims
        t = act(t, st.copy.matrix, st.axes, sub)
        if x[i]:
            for a, op in st.families[1]:
                ta = act(t, op.matrix, st.axes, sub)
                if weight(ta) <= _PRUNE:
                    continue
                rec(i + 1, channel(ta, st), idx + (a,))
        else:
            rec(i + 1, channel(t, st), idx)

    rec(0, t0, ())
    return out


def distribution(circ: AugmentedCircuit, x: Sequence[int], k: Optional[int] = None) -> np.ndarray:
    """Joint table over agents ``i <= k`` with ``x_i = 1`` (axes in agent order).

    The returned array is read-only and shared through the circuit cache.
    """
    x = check_settings(circ.spec, x)
    k = circ.n_agents if k is None else k
    key = (k, x[:k])
    table = circ._cache.get(key)
    if table is None:
        table = _evolve(circ, x, k)
        table.setflags(write=False)
        circ._cache[key] = table
    return table


def warm(circ: AugmentedCircuit, xs: Iterable[Sequence[int]], k: Optional[int] = None) -> None:
    """Fill the cache for several setting vectors, in parallel when LWFS_THREADS > 1."""
    xs = list(xs)
    n = _threads()
    if n <= 1 or len(xs) < 2:
        for x in xs:
            distribution(circ, x, k)
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        list(pool.map(lambda x: distribution(circ, x, k), xs))


def _mass(table: np.ndarray, measured: list[int], constraint: dict[int, int]) -> float:
    idx = tuple(constraint.get(i, slice(None)) for i in measured)
    return float(np.sum(table[idx]))


def _require_measured(spec: LWFSpec, x, pairs: Assignment, role: str) -> None:
    for i, _ in pairs:
        if x[i - 1] != 1:
            raise SettingOutcomeMismatch(
                f"{role} mention {spec.agents[i - 1].name} whose setting is 0 (outcome ⊥)"
            )


# ---------------------------------------------------------------- probabilities

def joint_probability(circ: AugmentedCircuit, x: Sequence[int], outcomes: Sequence[Optional[Union[int, str]]]) -> float:
    """Elementary-event probability; ``outcomes[i]`` is None exactly where ``x_i = 0``."""
    spec = circ.spec
    x = check_settings(spec, x)
    if len(outcomes) != spec.n_agents:
        raise SettingOutcomeMismatch(f"need {spec.n_agents} outcomes, got {len(outcomes)}")
    idx = []
    for a, xi, v in zip(spec.agents, x, outcomes):
        if (v is None) != (xi == 0):
            raise SettingOutcomeMismatch(f"agent {a.name}: outcome must be ⊥ iff setting is 0")
        if v is not None:
            idx.append(a.outcome_index(v))
    return clamp_probability(float(distribution(circ, x)[tuple(idx)]))


def event_probability(circ: AugmentedCircuit, event: AssignmentLike, x: Sequence[int]) -> float:
    """P(event | x) with all other measured outcomes summed."""
    spec = circ.spec
    x = check_settings(spec, x)
    ev = as_assignment(spec, event)
    _require_measured(spec, x, ev, "event")
    k = minimal_prefix(ev)
    measured = [i for i in range(1, k + 1) if x[i - 1]]
    return clamp_probability(_mass(distribution(circ, x, k), measured, dict(ev)))


def setting_conditioned(circ: AugmentedCircuit, targets: AssignmentLike, givens: AssignmentLike,
                        x: Sequence[int], truncate: bool = True) -> float:
    """P(targets | givens, x). ``truncate`` evaluates only the minimal prefix."""
    spec = circ.spec
    x = check_settings(spec, x)
    t = as_assignment(spec, targets)
    g = as_assignment(spec, givens)
    _require_measured(spec, x, t, "targets")
    _require_measured(spec, x, g, "givens")
    k = minimal_prefix(t, g) if truncate else spec.n_agents
    table = distribution(circ, x, k)
    measured = [i for i in range(1, k + 1) if x[i - 1]]
    gd = dict(g)
    den = _mass(table, measured, gd)
    if den <= EPS:
        raise ConditioningOnNullEvent(f"P(givens | x) = {den:.3g} <= eps")
    both = dict(gd)
    for i, v in t:
        if both.get(i, v) != v:
            return 0.0
        both[i] = v
    return clamp_probability(_mass(table, measured, both) / den)


# ---------------------------------------------------------------- priors

@dataclass(frozen=True)
class SettingPrior:
    """Weights over full setting vectors."""

    weights: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def point(cls, x: Sequence[int]) -> "SettingPrior":
        return cls(((tuple(int(v) for v in x), 1.0),))

    @classmethod
    def independent(cls, spec: LWFSpec, p_one: Mapping[str, float]) -> "SettingPrior":
        """Product prior; ``p_one[name]`` is P(x=1) for each free agent (default 1/2)."""
        import itertools

        free = spec.free_agents
        probs = {i: float(p_one.get(spec.agents[i - 1].name, 0.5)) for i in free}
        for name in p_one:
            if spec.agent(name).index not in free:
                raise InvalidPrior(f"agent {name} is pinned and cannot carry a prior")
        out = []
        for bits in itertools.product((0, 1), repeat=len(free)):
            w = 1.0
            full = [1] * spec.n_agents
            for i, b in zip(free, bits):
                full[i - 1] = b
                w *= probs[i] if b else 1.0 - probs[i]
            out.append((tuple(full), w))
        return cls(tuple(out))

    def check(self, spec: LWFSpec) -> None:
        total = 0.0
        for x, w in self.weights:
            check_settings(spec, x)
            if w < 0:
                raise InvalidPrior(f"negative weight {w} at {x}")
            total += w
        if abs(total - 1.0) > EPS:
            raise InvalidPrior(f"prior weights sum to {total}")


def prediction_with_prior(circ: AugmentedCircuit, targets: AssignmentLike, givens: AssignmentLike,
                          prior: SettingPrior) -> float:
    """sum_x P(targets | givens, x) P'(x), P' = prior restricted to x_i = 1 on queried agents."""
    spec = circ.spec
    prior.check(spec)
    t = as_assignment(spec, targets)
    g = as_assignment(spec, givens)
    involved = {i for i, _ in t} | {i for i, _ in g}
    kept = [(x, w) for x, w in prior.weights if w > 0 and all(x[i - 1] == 1 for i in involved)]
    mass = sum(w for _, w in kept)
    if mass <= EPS:
        raise PriorSupportInsufficient("prior puts no weight on settings with x_i = 1 for queried agents")
    total = 0.0
    for x, w in kept:
        total += setting_conditioned(circ, t, g, x) * (w / mass)
    return clamp_probability(total)


# ---------------------------------------------------------------- pre/post selection

def pre_post_selected(rho: Union[StateVector, DensityOperator], family: Sequence[LinearOperator], k: int,
                      post: LinearOperator) -> float:
    """tr[P_post pi_k rho pi_k] / sum_j tr[P_post pi_j rho pi_j]."""
    weights = [born_probability(apply(pi, rho), post) for pi in family]
    den = sum(weights)
    if den <= EPS:
        raise ConditioningOnNullEvent(f"post-selection success probability {den:.3g} <= eps")
    return clamp_probability(weights[k] / den)


# ---------------------------------------------------------------- reduced circuits

def reduced_distribution(rc: ReducedCircuit) -> np.ndarray:
    """Joint outcome table of every agent of a memory-free circuit."""
    dims = rc.layout.dims
    m = len(dims)
    n = rc.layout.total_dim
    init = rc.initial_state
    mat = init.matrix if isinstance(init, DensityOperator) else np.outer(init.amplitudes, init.amplitudes.conj())
    shape = tuple(len(s.instrument) for s in rc.stages)
    out = np.zeros(shape)
    axes_of = [[rc.layout.index(lb) for lb in s.support.labels] for s in rc.stages]

    def rec(i, t, idx):
        if i == len(rc.stages):
            out[idx] = float(np.trace(t.reshape(n, n)).real)
            return
        st = rc.stages[i]
        axes, sub = axes_of[i], st.support.dims
        for a, ops in enumerate(st.instrument):
            acc = None
            for op in ops:
                u = apply_local(t, op, axes, sub)
                u = apply_local(u, op.conj(), [m + ax for ax in axes], sub)
                acc = u if acc is None else acc + u
            if float(np.trace(acc.reshape(n, n)).real) <= _PRUNE:
                continue
            rec(i + 1, acc, idx + (a,))

    rec(0, np.asarray(mat, dtype=complex).reshape(dims * 2), ())
    return out


def reduced_marginal(rc: ReducedCircuit, x: Sequence[int]) -> np.ndarray:
    """Reduced table summed over agents with ``x_i = 0``; comparable to ``distribution``."""
    full = reduced_distribution(rc)
    drop = tuple(i for i, xi in enumerate(x) if not xi)
    return full.sum(axis=drop) if drop else full


def outcome_label(spec: LWFSpec, i: int, v: int) -> str:
    a = spec.agent(i)
    if not 0 <= v < a.dim:
        raise UnknownOutcome(f"agent {a.name} has no outcome {v}")
    return a.outcomes[v]
