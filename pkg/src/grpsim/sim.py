"""Deterministic discrete-event simulator for GRP.

Time is integer ticks. Every active node runs a compute timer (period
``tau1``) and a send timer (period ``tau2``). A broadcast places the message
in the single slot of every outgoing link; it is delivered one tick later
unless the slot was overwritten, the link vanished, or the loss model drops
it. With ``Bounded(k)`` loss at most ``k`` consecutive messages on a link
are dropped, so with ``k < tau1 // tau2`` every persistent neighbor gets
through at least once per compute window.

Events sharing a timestamp run in a fixed order: topology edits, deliveries,
computes, sends. Ties inside a class keep scheduling order. The trace is a
pure function of the scenario and its seed.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import json
import logging
import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

from grpsim.lists import AncestorList, Mark, NodeId
from grpsim.protocol import GrpMessage, NodeState, Priority

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """Scenario or topology edit that cannot be applied."""


class EditKind(str, enum.Enum):
    ADD_NODE = "add_node"
    REMOVE_NODE = "remove_node"
    ADD_EDGE = "add_edge"
    REMOVE_EDGE = "remove_edge"
    ACTIVATE = "activate"
    DEACTIVATE = "deactivate"


_EDGE_KINDS = (EditKind.ADD_EDGE, EditKind.REMOVE_EDGE)


@dataclass(frozen=True)
class TopologyEvent:
    time: int
    kind: EditKind
    nodes: tuple[NodeId, ...]
    oneway: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EditKind(self.kind))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        want = 2 if self.kind in _EDGE_KINDS else 1
        if len(self.nodes) != want:
            raise ScenarioError(f"{self.kind.value} takes {want} node(s), got {self.nodes}")
        if self.kind in _EDGE_KINDS and self.nodes[0] == self.nodes[1]:
            raise ScenarioError(f"self loop in {self.kind.value} {self.nodes}")


@dataclass(frozen=True)
class ChannelModel:
    """Fair-channel parameters.

    ``loss_bound`` of ``None`` means lossless; otherwise each send on a link
    is dropped with probability ``loss_prob`` unless ``loss_bound`` sends in
    a row were already dropped on that link.
    """

    tau1: int = 20
    tau2: int = 5
    loss_bound: int | None = None
    loss_prob: float = 0.3
    rng_seed: int = 0

    def validate(self) -> None:
        if self.tau2 < 1 or self.tau1 < self.tau2:
            raise ScenarioError(f"need tau1 >= tau2 >= 1, got {self.tau1}, {self.tau2}")
        if self.loss_bound is not None:
            if self.loss_bound < 0 or self.loss_bound >= self.tau1 // self.tau2:
                raise ScenarioError(
                    f"loss bound {self.loss_bound} breaks fairness for "
                    f"tau1={self.tau1}, tau2={self.tau2}"
                )
            if not 0.0 <= self.loss_prob < 1.0:
                raise ScenarioError(f"loss probability {self.loss_prob} not in [0, 1)")


class SnapshotPolicy(str, enum.Enum):
    EVERY_EVENT = "every_event"
    EVERY_COMPUTE = "every_compute"
    PERIOD = "period"


@dataclass(frozen=True)
class InitialState:
    """Explicit (possibly inconsistent) starting state of one node."""

    list: AncestorList
    view: frozenset
    quarantine: Mapping[NodeId, int] = field(default_factory=dict)
    priorities: Mapping[NodeId, int] = field(default_factory=dict)
    oldness: int = 0


@dataclass(frozen=True)
class Scenario:
    dmax: int
    nodes: tuple[NodeId, ...]
    edges: tuple[tuple[NodeId, NodeId, bool], ...] = ()
    schedule: tuple[TopologyEvent, ...] = ()
    channel: ChannelModel = ChannelModel()
    horizon: int = 1000
    snapshots: SnapshotPolicy = SnapshotPolicy.EVERY_COMPUTE
    snapshot_period: int = 0
    initial_states: Mapping[NodeId, InitialState] = field(default_factory=dict)

    def validate(self) -> None:
        if not isinstance(self.dmax, int) or self.dmax < 1:
            raise ScenarioError(f"dmax must be a positive integer, got {self.dmax!r}")
        self.channel.validate()
        if len(set(self.nodes)) != len(self.nodes):
            raise ScenarioError("duplicate node ids")
        if len({type(n) for n in self.nodes}) > 1:
            raise ScenarioError("node ids must all be integers or all be strings")
        known = set(self.nodes)
        for u, v, _ in self.edges:
            if u not in known or v not in known:
                raise ScenarioError(f"edge ({u}, {v}) references an unknown node")
            if u == v:
                raise ScenarioError(f"self loop on {u}")
        for n in self.initial_states:
            if n not in known:
                raise ScenarioError(f"initial state for unknown node {n}")
        last = 0
        for ev in self.schedule:
            if ev.time < last:
                raise ScenarioError("schedule is not sorted by time")
            last = ev.time
            if ev.kind is EditKind.ADD_NODE:
                if ev.nodes[0] in known:
                    raise ScenarioError(f"add_node {ev.nodes[0]} at t={ev.time}: exists")
                known.add(ev.nodes[0])
                continue
            for n in ev.nodes:
                if n not in known:
                    raise ScenarioError(f"{ev.kind.value} at t={ev.time} names unknown node {n}")
            if ev.kind is EditKind.REMOVE_NODE:
                known.discard(ev.nodes[0])
        if self.horizon < last:
            raise ScenarioError("horizon precedes the last scheduled event")
        if self.snapshots is SnapshotPolicy.PERIOD and self.snapshot_period < 1:
            raise ScenarioError("period snapshot policy needs a positive period")


# -- snapshots -----------------------------------------------------------


@dataclass(frozen=True)
class NodeRecord:
    list: AncestorList
    view: frozenset
    quarantine: tuple[tuple[NodeId, int], ...]
    oldness: int

    @classmethod
    def of(cls, st: NodeState) -> NodeRecord:
        return cls(st.list, st.view, tuple(sorted(st.quarantine.items())), st.oldness)

    def render(self) -> dict[str, str]:
        return {
            "list": str(self.list),
            "view": "{" + ",".join(str(n) for n in sorted(self.view)) + "}",
            "quarantine": ",".join(f"{n}:{q}" for n, q in self.quarantine),
            "priority": str(self.oldness),
        }


@dataclass(frozen=True)
class ConfigurationSnapshot:
    """Global state after an event."""

    time: int
    event: str
    nodes: frozenset
    active: frozenset
    links: frozenset  # directed vicinity pairs (u, v): v can hear u
    states: Mapping[NodeId, NodeRecord]
    in_flight: frozenset  # directed links whose slot holds a message

    @property
    def views(self) -> dict[NodeId, frozenset]:
        return {n: r.view for n, r in self.states.items()}

    def symmetric_edges(self) -> frozenset:
        """Undirected edges usable now: mutual links between active nodes."""
        out = set()
        for u, v in self.links:
            if (v, u) in self.links and u in self.active and v in self.active:
                out.add((u, v) if _key(u) <= _key(v) else (v, u))
        return frozenset(out)

    def render(self) -> str:
        edges = []
        for u, v in sorted(self.links, key=lambda e: (_key(e[0]), _key(e[1]))):
            if (v, u) in self.links:
                if _key(u) < _key(v):
                    edges.append([u, v])
            else:
                edges.append([u, v, "->"])
        rec = {
            "t": self.time,
            "event": self.event,
            "edges": edges,
            "inactive": sorted(self.nodes - self.active, key=_key),
            "in_flight": [f"{u}>{v}" for u, v in sorted(self.in_flight, key=lambda e: (_key(e[0]), _key(e[1])))],
            "nodes": {str(n): self.states[n].render() for n in sorted(self.states, key=_key)},
        }
        return json.dumps(rec, separators=(",", ":"))


def _key(n: NodeId):
    return (0, n, "") if isinstance(n, int) else (1, 0, n)


@dataclass
class Trace:
    scenario: Scenario
    snapshots: list[ConfigurationSnapshot]

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    def lines(self) -> Iterable[str]:
        for snap in self.snapshots:
            yield snap.render()


# -- engine --------------------------------------------------------------

_TOPOLOGY, _DELIVER, _COMPUTE, _EMIT, _SNAPSHOT = range(5)


def initial_node_state(
    node: NodeId, scenario: Scenario, init: InitialState | None = None, **options
) -> NodeState:
    ch = scenario.channel
    st = NodeState(node, scenario.dmax, tc_period=ch.tau1, ts_period=ch.tau2, **options)
    if init is not None:
        st.list = init.list
        st.view = frozenset(init.view)
        st.quarantine = dict(init.quarantine)
        st.oldness = init.oldness
        st.priority_table = {n: Priority(o, n) for n, o in init.priorities.items()}
        st.priority_table[node] = st.priority
    return st


class Simulator:
    """One run of a scenario. Use :func:`run` unless stepping by hand."""

    def __init__(
        self,
        scenario: Scenario,
        lockstep: bool = False,
        node_options: Mapping | None = None,
        on_snapshot=None,
    ) -> None:
        scenario.validate()
        self.scenario = scenario
        self.lockstep = lockstep
        self.node_options = dict(node_options or {})
        self.rng = random.Random(scenario.channel.rng_seed)
        self.time = 0
        self.nodes: set = set()
        self.active: set = set()
        self.links: set = set()
        self.states: dict[NodeId, NodeState] = {}
        self.slots: dict[tuple, tuple[int, GrpMessage]] = {}
        self.loss_run: dict[tuple, int] = {}
        self._queue: list = []
        self._seq = itertools.count()
        self._msg_ids = itertools.count()
        self._timer_gen: dict[NodeId, int] = {}
        self._records: dict[NodeId, tuple[int, NodeRecord]] = {}
        self._versions: dict[NodeId, int] = {}
        self.snapshots: list[ConfigurationSnapshot] = []
        self._on_snapshot = on_snapshot

        for n in scenario.nodes:
            init = scenario.initial_states.get(n)
            self._add_node(n, init)
        for u, v, oneway in scenario.edges:
            self.links.add((u, v))
            if not oneway:
                self.links.add((v, u))
        for ev in scenario.schedule:
            self._push(ev.time, _TOPOLOGY, ev)
        if scenario.snapshots is SnapshotPolicy.PERIOD:
            p = scenario.snapshot_period
            for t in range(p, scenario.horizon + 1, p):
                self._push(t, _SNAPSHOT, None)

    # -- queue helpers --

    def _push(self, time: int, cls: int, payload) -> None:
        heapq.heappush(self._queue, (time, cls, next(self._seq), payload))

    def _touch(self, node: NodeId) -> None:
        self._versions[node] = self._versions.get(node, 0) + 1

    def _arm(self, node: NodeId) -> None:
        gen = self._timer_gen.get(node, 0) + 1
        self._timer_gen[node] = gen
        ch = self.scenario.channel
        if self.lockstep:
            tc = (self.time // ch.tau1 + 1) * ch.tau1
            ts = (self.time // ch.tau2 + 1) * ch.tau2
        else:
            tc = self.time + self.rng.randint(1, ch.tau1)
            ts = self.time + self.rng.randint(1, ch.tau2)
        self._push(tc, _COMPUTE, (node, gen))
        self._push(ts, _EMIT, (node, gen))

    def _disarm(self, node: NodeId) -> None:
        self._timer_gen[node] = self._timer_gen.get(node, 0) + 1

    def _add_node(self, node: NodeId, init: InitialState | None = None) -> None:
        self.nodes.add(node)
        self.active.add(node)
        self.states[node] = initial_node_state(node, self.scenario, init, **self.node_options)
        self._touch(node)
        self._arm(node)

    def _drop_slots(self, pred) -> None:
        for link in [l for l in self.slots if pred(l)]:
            del self.slots[link]

    # -- topology --

    def apply_topology_event(self, ev: TopologyEvent) -> None:
        k, ns = ev.kind, ev.nodes
        if k is EditKind.ADD_NODE:
            if ns[0] in self.nodes:
                raise ScenarioError(f"node {ns[0]} already exists")
            self._add_node(ns[0])
            return
        for n in ns:
            if n not in self.nodes:
                raise ScenarioError(f"{k.value} references unknown node {n}")
        if k is EditKind.REMOVE_NODE:
            n = ns[0]
            self.nodes.discard(n)
            self.active.discard(n)
            self.links = {l for l in self.links if n not in l}
            self._drop_slots(lambda l: n in l)
            self._disarm(n)
            del self.states[n]
            self._records.pop(n, None)
        elif k is EditKind.ADD_EDGE:
            u, v = ns
            self.links.add((u, v))
            if not ev.oneway:
                self.links.add((v, u))
        elif k is EditKind.REMOVE_EDGE:
            u, v = ns
            gone = {(u, v)} if ev.oneway else {(u, v), (v, u)}
            self.links -= gone
            self._drop_slots(lambda l: l in gone)
        elif k is EditKind.ACTIVATE:
            if ns[0] not in self.active:
                self.active.add(ns[0])
                self._arm(ns[0])
        elif k is EditKind.DEACTIVATE:
            n = ns[0]
            if n in self.active:
                self.active.discard(n)
                self._disarm(n)
                self._drop_slots(lambda l: n in l)

    # -- channel --

    def _emit(self, node: NodeId) -> None:
        msg = self.states[node].emit()
        mid = next(self._msg_ids)
        for u, v in sorted(self.links, key=lambda e: (_key(e[0]), _key(e[1]))):
            if u == node and v in self.active:
                self.slots[(u, v)] = (mid, msg)
                self._push(self.time + 1, _DELIVER, ((u, v), mid))

    def _deliver(self, link: tuple, mid: int) -> bool:
        slot = self.slots.get(link)
        if slot is None or slot[0] != mid:
            return False
        del self.slots[link]
        u, v = link
        if link not in self.links or u not in self.active or v not in self.active:
            return False
        ch = self.scenario.channel
        if ch.loss_bound is not None:
            run = self.loss_run.get(link, 0)
            if run < ch.loss_bound and self.rng.random() < ch.loss_prob:
                self.loss_run[link] = run + 1
                return False
            self.loss_run[link] = 0
        self.states[v].on_receive(slot[1])
        return True

    # -- snapshots --

    def snapshot(self, label: str) -> ConfigurationSnapshot:
        states = {}
        for n, st in self.states.items():
            ver = self._versions.get(n, 0)
            cached = self._records.get(n)
            if cached is None or cached[0] != ver:
                cached = (ver, NodeRecord.of(st))
                self._records[n] = cached
            states[n] = cached[1]
        snap = ConfigurationSnapshot(
            time=self.time,
            event=label,
            nodes=frozenset(self.nodes),
            active=frozenset(self.active),
            links=frozenset(self.links),
            states=states,
            in_flight=frozenset(self.slots),
        )
        if self._on_snapshot is not None:
            self._on_snapshot(snap)
        self.snapshots.append(snap)
        return snap

    # -- main loop --

    def run(self) -> Trace:
        policy = self.scenario.snapshots
        horizon = self.scenario.horizon
        self.snapshot("init")
        while self._queue and self._queue[0][0] <= horizon:
            time, cls, _, payload = heapq.heappop(self._queue)
            self.time = time
            label = None
            if cls == _TOPOLOGY:
                self.apply_topology_event(payload)
                label = f"{payload.kind.value} {' '.join(map(str, payload.nodes))}"
            elif cls == _DELIVER:
                link, mid = payload
                if self._deliver(link, mid):
                    label = f"deliver {link[0]}>{link[1]}"
            elif cls in (_COMPUTE, _EMIT):
                node, gen = payload
                if self._timer_gen.get(node) != gen or node not in self.active:
                    continue
                ch = self.scenario.channel
                if cls == _COMPUTE:
                    self.states[node].compute()
                    self._touch(node)
                    self._push(time + ch.tau1, _COMPUTE, (node, gen))
                    label = f"compute {node}"
                else:
                    self._emit(node)
                    self._push(time + ch.tau2, _EMIT, (node, gen))
                    label = f"send {node}"
            elif cls == _SNAPSHOT:
                self.snapshot("period")
                continue
            if label is None:
                continue
            if policy is SnapshotPolicy.EVERY_EVENT or (
                policy is SnapshotPolicy.EVERY_COMPUTE
                and cls in (_TOPOLOGY, _COMPUTE)
            ):
                self.snapshot(label)
        self.time = horizon
        if self.snapshots[-1].time < horizon:
            self.snapshot("horizon")
        return Trace(self.scenario, self.snapshots)


def run(
    scenario: Scenario,
    lockstep: bool = False,
    node_options: Mapping | None = None,
    on_snapshot=None,
) -> Trace:
    """Simulate ``scenario`` up to its horizon and return the trace."""
    return Simulator(scenario, lockstep, node_options, on_snapshot).run()


# -- corruption ----------------------------------------------------------


class Corruption(str, enum.Enum):
    GHOST_NODES = "ghost_nodes"
    OVERSIZED_LIST = "oversized_list"
    WRONG_VIEW = "wrong_view"
    SCRAMBLED_QUARANTINE = "scrambled_quarantine"


def corrupt(
    state: InitialState,
    kind: Corruption | str,
    rng: random.Random,
    *,
    dmax: int,
    ghosts: Sequence[NodeId] = (),
    universe: Sequence[NodeId] = (),
) -> InitialState:
    """Inject one inconsistency into a starting state.

    ``ghosts`` are ids outside the node set; ``universe`` lists real ids that
    may be sprinkled into an oversized list.
    """
    kind = Corruption(kind)
    sets = [dict(s) for s in state.list.sets]
    prios = dict(state.priorities)
    if kind is Corruption.GHOST_NODES:
        if not ghosts:
            raise ValueError("ghost corruption needs ghost ids")
        g = ghosts[0]
        pos = min(2, len(sets))
        while len(sets) <= pos:
            sets.append({})
        sets[pos][g] = Mark.PLAIN
        prios[g] = rng.randint(0, 3)
        return replace(state, list=AncestorList.of(*sets), priorities=prios)
    if kind is Corruption.OVERSIZED_LIST:
        present = {n for s in sets for n in s}
        pool = [n for n in universe if n not in present] + list(ghosts)
        rng.shuffle(pool)
        # Out of candidates: mint integer ids above everything seen.
        fresh = itertools.count(1 + max((n for n in [*present, *ghosts, *universe] if isinstance(n, int)), default=0))
        while len(sets) < dmax + 3:
            n = pool.pop() if pool else next(fresh)
            sets.append({n: Mark.PLAIN})
            prios[n] = rng.randint(0, 3)
        return replace(state, list=AncestorList.of(*sets), priorities=prios)
    if kind is Corruption.WRONG_VIEW:
        members = sorted(state.list.nodes() | set(universe), key=_key)
        me = state.list[0][0][0] if state.list.size and state.list[0] else None
        k = rng.randint(0, len(members))
        view = set(rng.sample(members, k))
        if me is not None and rng.random() < 0.5:
            view.discard(me)
        return replace(state, view=frozenset(view))
    q = {n: rng.randint(0, dmax) for n in state.list.nodes()}
    return replace(state, quarantine=q)
