"""Group predicates over trace snapshots.

A snapshot is reduced to its active nodes, their views and the undirected
graph of mutual links between active nodes. On that reduction:

* ``Π_A`` agreement: every view contains its owner, all its members hold
  the identical view (so views partition the nodes);
* ``Π_S`` safety: every group induces a connected subgraph of diameter at
  most ``dmax``;
* ``Π_M`` maximality: no two distinct groups could be merged without
  exceeding ``dmax``;
* ``Π_T`` (pair): every group of the earlier snapshot still has diameter at
  most ``dmax`` in the later graph, nodes gone from the later snapshot being
  unreachable;
* ``Π_C`` (pair): no node leaves a group, ``Ω_v(prev) ⊆ Ω_v(next)``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from grpsim.lists import NodeId
from grpsim.sim import ConfigurationSnapshot, Trace

Graph = Mapping[NodeId, frozenset]


@dataclass(frozen=True)
class Reduced:
    """What the predicates look at: active views and the mutual-link graph."""

    views: Mapping[NodeId, frozenset]
    adj: Graph

    @classmethod
    def of(cls, snap: ConfigurationSnapshot) -> Reduced:
        views = {n: snap.states[n].view for n in snap.active}
        adj: dict[NodeId, set] = {n: set() for n in snap.active}
        for u, v in snap.symmetric_edges():
            adj[u].add(v)
            adj[v].add(u)
        return cls(views, {n: frozenset(s) for n, s in adj.items()})

    @classmethod
    def build(cls, views: Mapping[NodeId, Iterable], edges: Iterable[tuple]) -> Reduced:
        """Hand-built snapshot; every view owner is a node."""
        v = {n: frozenset(s) for n, s in views.items()}
        adj: dict[NodeId, set] = {n: set() for n in v}
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        return cls(v, {n: frozenset(s) for n, s in adj.items()})

    def key(self) -> tuple:
        return (
            frozenset(self.views.items()),
            frozenset((n, s) for n, s in self.adj.items()),
        )


def _as_reduced(x) -> Reduced:
    return x if isinstance(x, Reduced) else Reduced.of(x)


def diameter(nodes: Iterable[NodeId], adj: Graph) -> float:
    """Diameter of the subgraph induced by ``nodes``; ``inf`` if disconnected."""
    members = frozenset(nodes)
    if not members:
        return 0
    if any(n not in adj for n in members):
        return math.inf
    worst = 0
    for src in members:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y in members and y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if len(dist) < len(members):
            return math.inf
        worst = max(worst, max(dist.values()))
    return worst


def derive_groups(snap) -> dict[NodeId, frozenset]:
    """``Ω_v``: the view of ``v`` if it is self-consistent, else ``{v}``."""
    r = _as_reduced(snap)
    groups = {}
    for v, view in r.views.items():
        ok = v in view and all(r.views.get(u) == view for u in view)
        groups[v] = view if ok else frozenset({v})
    return groups


def check_agreement(snap) -> bool:
    r = _as_reduced(snap)
    for v, view in r.views.items():
        if v not in view:
            return False
        if any(r.views.get(u) != view for u in view):
            return False
    return True


def check_safety(snap, dmax: int, groups=None) -> bool:
    r = _as_reduced(snap)
    groups = groups or derive_groups(r)
    return all(diameter(g, r.adj) <= dmax for g in set(groups.values()))


def check_maximality(snap, dmax: int, groups=None) -> bool:
    r = _as_reduced(snap)
    groups = groups or derive_groups(r)
    seen = set()
    for u, nbrs in r.adj.items():
        for v in nbrs:
            gu, gv = groups[u], groups[v]
            if gu == gv:
                continue
            pair = frozenset((gu, gv))
            if pair in seen:
                continue
            seen.add(pair)
            if diameter(gu | gv, r.adj) <= dmax:
                return False
    return True


def check_topological(prev, nxt, dmax: int) -> bool:
    gp = derive_groups(_as_reduced(prev))
    adj = _as_reduced(nxt).adj
    return all(diameter(g, adj) <= dmax for g in set(gp.values()))


def check_continuity(prev, nxt) -> bool:
    gp = derive_groups(_as_reduced(prev))
    gn = derive_groups(_as_reduced(nxt))
    return all(v not in gn or g <= gn[v] for v, g in gp.items())


def metrics(snap, groups=None) -> tuple[int, int]:
    """``(nee, ndg)``: external edges and distinct groups."""
    r = _as_reduced(snap)
    groups = groups or derive_groups(r)
    nee = sum(1 for u, ns in r.adj.items() for v in ns if groups[u] != groups[v]) // 2
    return nee, len(set(groups.values()))


CHECK_NAMES = ("agreement", "safety", "maximality", "continuity", "attractor", "metrics")


def find_attractor(flags: Sequence[bool]) -> int | None:
    """Least index after which every flag holds; ``None`` if the last fails."""
    idx = None
    for i in range(len(flags) - 1, -1, -1):
        if not flags[i]:
            break
        idx = i
    return idx


@dataclass
class Verdict:
    dmax: int
    times: list[int] = field(default_factory=list)
    pi_a: list[bool] = field(default_factory=list)
    pi_s: list[bool] = field(default_factory=list)
    pi_m: list[bool] = field(default_factory=list)
    pi_t: list[bool] = field(default_factory=list)
    pi_c: list[bool] = field(default_factory=list)
    nee: list[int] = field(default_factory=list)
    ndg: list[int] = field(default_factory=list)

    @property
    def legitimate(self) -> list[bool]:
        return [a and s and m for a, s, m in zip(self.pi_a, self.pi_s, self.pi_m)]

    @property
    def attractor_index(self) -> int | None:
        return find_attractor(self.legitimate)

    def continuity_violations(self) -> list[int]:
        """Pair indices ``i`` (snapshots ``i``, ``i+1``) with ``Π_T ∧ ¬Π_C``."""
        return [i for i, (t, c) in enumerate(zip(self.pi_t, self.pi_c)) if t and not c]

    def excused_breaks(self) -> list[int]:
        """Pair indices with ``¬Π_T ∧ ¬Π_C``."""
        return [i for i, (t, c) in enumerate(zip(self.pi_t, self.pi_c)) if not t and not c]

    def metrics_monotone(self) -> bool:
        """After the attractor start, nee/ndg never grow and nee drops with ndg."""
        start = self.attractor_index
        if start is None:
            return False
        for i in range(start + 1, len(self.nee)):
            if self.nee[i] > self.nee[i - 1] or self.ndg[i] > self.ndg[i - 1]:
                return False
            if self.nee[i] < self.nee[i - 1] and not self.ndg[i] < self.ndg[i - 1]:
                return False
        return True

    def check(self, name: str) -> bool:
        """One named check; the per-snapshot predicates look at the last snapshot."""
        if name == "agreement":
            return bool(self.pi_a) and self.pi_a[-1]
        if name == "safety":
            return bool(self.pi_s) and self.pi_s[-1]
        if name == "maximality":
            return bool(self.pi_m) and self.pi_m[-1]
        if name == "continuity":
            return not self.continuity_violations()
        if name == "attractor":
            return self.attractor_index is not None
        if name == "metrics":
            return self.metrics_monotone()
        raise ValueError(f"unknown check {name!r}; choose from {', '.join(CHECK_NAMES)}")

    def summary(self) -> dict:
        viol = self.continuity_violations()
        first = None
        if viol:
            i = viol[0]
            first = {"index": i, "t_prev": self.times[i], "t_next": self.times[i + 1]}
        return {
            "dmax": self.dmax,
            "snapshots": len(self.times),
            "attractor_index": self.attractor_index,
            "attractor_time": (
                self.times[self.attractor_index] if self.attractor_index is not None else None
            ),
            "agreement": all(self.pi_a[self.attractor_index:]) if self.attractor_index is not None else False,
            "continuity_violations": len(viol),
            "first_continuity_violation": first,
            "excused_breaks": len(self.excused_breaks()),
            "final_nee": self.nee[-1] if self.nee else None,
            "final_ndg": self.ndg[-1] if self.ndg else None,
        }

    def to_json(self, checks: Mapping[str, bool] | None = None) -> str:
        rec = {
            "summary": self.summary(),
            "checks": dict(checks or {}),
            "series": {
                "t": self.times,
                "pi_a": self.pi_a,
                "pi_s": self.pi_s,
                "pi_m": self.pi_m,
                "pi_t": self.pi_t,
                "pi_c": self.pi_c,
                "nee": self.nee,
                "ndg": self.ndg,
            },
        }
        return json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n"


class Evaluator:
    """Predicate evaluation with a cache keyed on (views, graph)."""

    def __init__(self, dmax: int) -> None:
        self.dmax = dmax
        self._single: dict = {}
        self._pair: dict = {}

    def single(self, r: Reduced) -> tuple[bool, bool, bool, int, int]:
        key = r.key()
        hit = self._single.get(key)
        if hit is None:
            g = derive_groups(r)
            hit = (
                check_agreement(r),
                check_safety(r, self.dmax, g),
                check_maximality(r, self.dmax, g),
                *metrics(r, g),
            )
            self._single[key] = hit
        return hit

    def pair(self, prev: Reduced, nxt: Reduced) -> tuple[bool, bool]:
        key = (prev.key(), nxt.key())
        hit = self._pair.get(key)
        if hit is None:
            hit = (check_topological(prev, nxt, self.dmax), check_continuity(prev, nxt))
            self._pair[key] = hit
        return hit


def evaluate(snapshots: Iterable[ConfigurationSnapshot], dmax: int) -> Verdict:
    ev = Evaluator(dmax)
    verdict = Verdict(dmax)
    prev = None
    for snap in snapshots:
        r = Reduced.of(snap)
        a, s, m, nee, ndg = ev.single(r)
        verdict.times.append(snap.time)
        verdict.pi_a.append(a)
        verdict.pi_s.append(s)
        verdict.pi_m.append(m)
        verdict.nee.append(nee)
        verdict.ndg.append(ndg)
        if prev is not None:
            t, c = ev.pair(prev, r)
            verdict.pi_t.append(t)
            verdict.pi_c.append(c)
        prev = r
    return verdict


def evaluate_trace(trace: Trace) -> Verdict:
    return evaluate(trace.snapshots, trace.scenario.dmax)
