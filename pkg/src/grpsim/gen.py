"""Reproducible scenario generators.

Every generator is a pure function of its arguments; the seed drives both
the graph and the channel RNG.
"""

from __future__ import annotations

import enum
import random
from collections.abc import Sequence

import networkx as nx

from grpsim.lists import AncestorList, Mark
from grpsim.sim import (
    ChannelModel,
    Corruption,
    EditKind,
    InitialState,
    Scenario,
    ScenarioError,
    SnapshotPolicy,
    TopologyEvent,
    corrupt,
)

TAU1, TAU2 = 20, 5
HORIZON_ROUNDS = 50
ADJ_ROUND = 20  # MergeChain halves are joined after this many rounds
GHOST_BASE = 1000


class Kind(str, enum.Enum):
    STATIC_RANDOM = "StaticRandom"
    CORRUPTED_START = "CorruptedStart"
    MERGE_CHAIN = "MergeChain"
    SPLIT_CUT = "SplitCut"


def _channel(seed: int, loss_bound: int | None) -> ChannelModel:
    return ChannelModel(tau1=TAU1, tau2=TAU2, loss_bound=loss_bound, rng_seed=seed)


def random_connected_graph(n: int, rng: random.Random) -> nx.Graph:
    """Random spanning tree plus a sprinkle of extra edges."""
    g = nx.Graph()
    g.add_nodes_from(range(n))
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):
        g.add_edge(order[i], order[rng.randrange(i)])
    extra = rng.random() * 0.3
    for u in range(n):
        for v in range(u + 1, n):
            if not g.has_edge(u, v) and rng.random() < extra:
                g.add_edge(u, v)
    return g


def _edges(g: nx.Graph) -> tuple:
    return tuple((u, v, False) for u, v in sorted(tuple(sorted(e)) for e in g.edges))


def static_random(n: int, dmax: int, seed: int, loss_bound: int | None = None) -> Scenario:
    rng = random.Random(seed)
    g = random_connected_graph(n, rng)
    return Scenario(
        dmax=dmax,
        nodes=tuple(range(n)),
        edges=_edges(g),
        channel=_channel(seed, loss_bound),
        horizon=HORIZON_ROUNDS * TAU1,
    )


DEFAULT_CORRUPTIONS = tuple(Corruption)


def corrupted_start(
    n: int,
    dmax: int,
    seed: int,
    loss_bound: int | None = None,
    kinds: Sequence[Corruption | str] = DEFAULT_CORRUPTIONS,
) -> Scenario:
    """Random static graph; every node starts from a tampered state.

    The base state lists the true neighbors at position 1 with random
    priorities; one or two corruptions drawn from ``kinds`` are applied.
    """
    base = static_random(n, dmax, seed, loss_bound)
    rng = random.Random(seed ^ 0x5EED)
    kinds = [Corruption(k) for k in kinds]
    adj: dict[int, set] = {v: set() for v in base.nodes}
    for u, v, _ in base.edges:
        adj[u].add(v)
        adj[v].add(u)
    ghost_ids = iter(range(GHOST_BASE, GHOST_BASE + 10 * n))
    initial = {}
    for v in base.nodes:
        nbrs = sorted(adj[v])
        lst = AncestorList.of({v: Mark.PLAIN}, {u: Mark.PLAIN for u in nbrs})
        st = InitialState(
            list=lst,
            view=frozenset({v}),
            quarantine={u: dmax for u in nbrs},
            priorities={u: rng.randint(0, 5) for u in nbrs},
            oldness=rng.randint(0, 5),
        )
        if kinds:
            for kind in rng.sample(kinds, k=min(len(kinds), rng.randint(1, 2))):
                st = corrupt(st, kind, rng, dmax=dmax, ghosts=[next(ghost_ids)], universe=base.nodes)
        initial[v] = st
    return Scenario(
        dmax=dmax,
        nodes=base.nodes,
        edges=base.edges,
        channel=base.channel,
        horizon=base.horizon,
        initial_states=initial,
    )


def merge_chain(n: int, dmax: int, seed: int, loss_bound: int | None = None) -> Scenario:
    """Path ``0..n-1`` cut in two halves; the middle edge appears later.

    The merged diameter is ``n - 1``, so the halves may merge iff
    ``n - 1 <= dmax``.
    """
    h = n // 2
    edges = tuple((i, i + 1, False) for i in range(n - 1) if i != h - 1)
    t_adj = ADJ_ROUND * TAU1
    return Scenario(
        dmax=dmax,
        nodes=tuple(range(n)),
        edges=edges,
        schedule=(TopologyEvent(t_adj, EditKind.ADD_EDGE, (h - 1, h)),),
        channel=_channel(seed, loss_bound),
        horizon=HORIZON_ROUNDS * TAU1,
    )


def merge_chain_adjacency(sc: Scenario) -> tuple[int, frozenset, frozenset]:
    """Adjacency time and the two halves of a :func:`merge_chain` scenario."""
    ev = sc.schedule[0]
    h = ev.nodes[1]
    return ev.time, frozenset(sc.nodes[:h]), frozenset(sc.nodes[h:])


def _diam(g: nx.Graph) -> float:
    return nx.diameter(g) if nx.is_connected(g) else float("inf")


def _critical_edges(g: nx.Graph, dmax: int) -> list:
    out = []
    for e in sorted(tuple(sorted(e)) for e in g.edges):
        h = g.copy()
        h.remove_edge(*e)
        if _diam(h) > dmax:
            out.append(e)
    return out


def split_cut(n: int, dmax: int, seed: int, loss_bound: int | None = None) -> Scenario:
    """A graph of diameter at most ``dmax`` that loses a critical edge.

    First a non-critical edge (if any) is removed, which keeps every group
    within ``dmax``; later a critical edge goes away, breaking the bound;
    finally that edge comes back.
    """
    rng = random.Random(seed)
    g = None
    for _ in range(400):
        cand = nx.gnp_random_graph(n, rng.uniform(0.25, 0.9), seed=rng.randrange(2**32))
        if n >= 2 and nx.is_connected(cand) and _diam(cand) <= dmax and _critical_edges(cand, dmax):
            g = cand
            break
    if g is None:
        g = nx.complete_graph(n) if dmax == 1 else nx.star_graph(n - 1)
    crit = _critical_edges(g, dmax)
    if not crit:
        raise ScenarioError(f"no splittable graph for n={n}, dmax={dmax}")
    cut = crit[rng.randrange(len(crit))]
    benign = [tuple(sorted(e)) for e in g.edges if tuple(sorted(e)) not in crit]
    schedule = []
    t = ADJ_ROUND * TAU1
    if benign:
        b = sorted(benign)[rng.randrange(len(benign))]
        schedule.append(TopologyEvent(t - 5 * TAU1, EditKind.REMOVE_EDGE, b))
    schedule.append(TopologyEvent(t, EditKind.REMOVE_EDGE, cut))
    schedule.append(TopologyEvent(t + 15 * TAU1, EditKind.ADD_EDGE, cut))
    return Scenario(
        dmax=dmax,
        nodes=tuple(range(n)),
        edges=_edges(g),
        schedule=tuple(schedule),
        channel=_channel(seed, loss_bound),
        horizon=HORIZON_ROUNDS * TAU1,
        snapshots=SnapshotPolicy.EVERY_EVENT,
    )


def generate(kind: Kind | str, n: int, dmax: int, seed: int, loss_bound: int | None = None) -> Scenario:
    if n < 2:
        raise ScenarioError(f"need n >= 2, got {n}")
    if dmax < 1:
        raise ScenarioError(f"need dmax >= 1, got {dmax}")
    kind = Kind(kind)
    fn = {
        Kind.STATIC_RANDOM: static_random,
        Kind.CORRUPTED_START: corrupted_start,
        Kind.MERGE_CHAIN: merge_chain,
        Kind.SPLIT_CUT: split_cut,
    }[kind]
    sc = fn(n, dmax, seed, loss_bound)
    sc.validate()
    return sc
