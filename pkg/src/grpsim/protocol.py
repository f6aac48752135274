"""Per-node GRP state machine.

A node collects the last message of every neighbor in ``msg_set``. When its
compute timer fires it checks the stored lists, folds them with ``ant``,
settles diameter conflicts through priorities, ages quarantines and derives
its view. When its send timer fires it broadcasts its list together with
the priorities of every listed node.

Timers themselves live in the simulator; this module only holds their
periods.
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

from grpsim.lists import (
    AncestorList,
    CompatVariant,
    Mark,
    NodeId,
    ant,
    compatible_list,
    good_list,
    parse_list,
    parse_node_id,
    render,
    truncate,
)

log = logging.getLogger(__name__)


class MalformedMessage(ValueError):
    """A message whose priorities do not describe its list."""


@dataclass(frozen=True, order=True)
class Priority:
    """Lexicographic ``(oldness, tiebreak)``; the smaller value wins."""

    oldness: int
    tiebreak: NodeId

    def __str__(self) -> str:
        return f"{self.tiebreak}:{self.oldness}"


class PriorityRule(str, enum.Enum):
    """How a too-far node is compared with the local node.

    ``GROUP``: node priorities when the far node is already in the local
    view, group priorities (minimum over members) otherwise. ``NODE``: node
    priorities only.
    """

    GROUP = "group"
    NODE = "node"


class CompatGate(str, enum.Enum):
    """Which senders go through the compatibility test.

    ``VIEW``: every sender outside the view. ``NEW``: senders not yet plain
    in the last list. ``KNOWN``: senders outside the view that no other
    neighbor lists plain. ``FRESH``: both ``NEW`` and ``KNOWN`` must hold.
    Re-testing a sender that is already being admitted makes quarantines
    restart; the narrower gates avoid that.
    """

    VIEW = "view"
    NEW = "new"
    KNOWN = "known"
    FRESH = "fresh"


class OldnessRule(str, enum.Enum):
    """When a lone node ages its priority.

    ``ALONE``: on every compute with a singleton view. ``IDLE``: only when
    the list holds no other plain node either, so a node waiting out a
    quarantine keeps the priority its candidates have already seen.
    """

    ALONE = "alone"
    IDLE = "idle"


@dataclass(frozen=True)
class GrpMessage:
    sender: NodeId
    list: AncestorList
    priorities: tuple[tuple[NodeId, Priority], ...]

    @classmethod
    def build(
        cls, sender: NodeId, lst: AncestorList, priorities: Mapping[NodeId, Priority]
    ) -> GrpMessage:
        return cls(sender, lst, tuple(sorted(priorities.items(), key=lambda kv: kv[0])))

    @property
    def priority_map(self) -> dict[NodeId, Priority]:
        return dict(self.priorities)

    def validate(self) -> None:
        if not self.priorities:
            raise MalformedMessage(f"message from {self.sender} carries no priority")
        if {n for n, _ in self.priorities} != set(self.list.nodes()):
            raise MalformedMessage(
                f"priorities of {self.sender} do not cover exactly its list"
            )

    def render(self) -> str:
        prio = ",".join(f"{n}:{p.oldness}" for n, p in self.priorities)
        return f"GRP {self.sender} {render(self.list)} PRIO {prio}"

    @classmethod
    def parse(cls, text: str) -> GrpMessage:
        parts = text.split(" ")
        if len(parts) != 5 or parts[0] != "GRP" or parts[3] != "PRIO":
            raise ValueError(f"not a GRP record: {text!r}")
        sender = parse_node_id(parts[1])
        prios = {}
        for item in filter(None, parts[4].split(",")):
            node, _, old = item.rpartition(":")
            nid = parse_node_id(node)
            prios[nid] = Priority(int(old), nid)
        return cls.build(sender, parse_list(parts[2]), prios)


def group_priority(msg: GrpMessage) -> Priority:
    """Smallest priority carried by ``msg``."""
    if not msg.priorities:
        raise MalformedMessage(f"message from {msg.sender} carries no priority")
    return min(p for _, p in msg.priorities)


def _strip_marks(lst: AncestorList, keep: NodeId) -> AncestorList:
    # Marked entries are link-local; only our own single mark survives.
    return lst.without(lambda n, m: m is Mark.PLAIN or (n == keep and m is Mark.SINGLE))


def _cut_at_gap(lst: AncestorList) -> AncestorList:
    # Nothing beyond an empty set has a neighbor one step closer.
    for i, entries in enumerate(lst.sets):
        if not entries:
            return AncestorList(lst.sets[:i])
    return lst


def _drop_trailing(lst: AncestorList) -> AncestorList:
    sets = list(lst.sets)
    while sets and not sets[-1]:
        sets.pop()
    return AncestorList(tuple(sets))


@dataclass
class NodeState:
    """Mutable protocol state of one node.

    Behavioral knobs, all defaulting to the combination that stabilizes
    best in simulation:

    * ``compat_sides``: reduce both lists before the compatibility test
      (see :meth:`compatibility_inputs`); unset compares the raw lists.
    * ``compat_gate``: which senders are tested (:class:`CompatGate`).
    * ``priority_rule``: node or group priorities in conflicts.
    * ``oldness_rule``: when a lone node ages (:class:`OldnessRule`).
    * ``cut_gaps``: drop everything after an empty set of the folded list.
    """

    self_id: NodeId
    dmax: int
    list: AncestorList = None  # type: ignore[assignment]
    view: frozenset = frozenset()
    msg_set: dict[NodeId, GrpMessage] = field(default_factory=dict)
    quarantine: dict[NodeId, int] = field(default_factory=dict)
    priority_table: dict[NodeId, Priority] = field(default_factory=dict)
    oldness: int = 0
    tc_period: int = 20
    ts_period: int = 5
    compat_variant: CompatVariant = CompatVariant.PSEUDOCODE
    compat_sides: bool = True
    priority_rule: PriorityRule = PriorityRule.NODE
    compat_gate: CompatGate = CompatGate.FRESH
    oldness_rule: OldnessRule = OldnessRule.IDLE
    cut_gaps: bool = True
    computes: int = 0

    def __post_init__(self) -> None:
        if self.dmax < 1:
            raise ValueError(f"dmax must be >= 1, got {self.dmax}")
        if self.tc_period < self.ts_period:
            raise ValueError("tau1 must be >= tau2")
        if self.list is None:
            self.list = AncestorList.singleton(self.self_id)
        if not self.view:
            self.view = frozenset({self.self_id})
        self.priority_table.setdefault(self.self_id, self.priority)
        self.compat_variant = CompatVariant(self.compat_variant)
        self.priority_rule = PriorityRule(self.priority_rule)
        self.compat_gate = CompatGate(self.compat_gate)
        self.oldness_rule = OldnessRule(self.oldness_rule)

    @property
    def priority(self) -> Priority:
        return Priority(self.oldness, self.self_id)

    # -- message intake -----------------------------------------------

    def on_receive(self, msg: GrpMessage) -> bool:
        """Keep ``msg`` as the latest from its sender; False if dropped."""
        if msg.sender == self.self_id:
            return False
        try:
            msg.validate()
        except MalformedMessage as exc:
            log.debug("%s drops message: %s", self.self_id, exc)
            return False
        self.msg_set[msg.sender] = msg
        return True

    # -- compute --------------------------------------------------------

    def compatibility_inputs(
        self, incoming: AncestorList
    ) -> tuple[AncestorList, AncestorList, frozenset | None]:
        """Arguments handed to :func:`compatible_list` for a candidate sender.

        With ``compat_sides`` the own list keeps its plain entries, the
        incoming list keeps the sender and the nodes it would add, and the
        sender's full neighbor set is passed separately for the shortcut
        clause. Positions are preserved throughout.
        """
        if not self.compat_sides:
            return self.list, incoming, None
        sender = incoming[0][0][0] if incoming.size and incoming[0] else None
        own = _drop_trailing(self.list.without(lambda n, m: m is Mark.PLAIN))
        known = own.nodes() | {self.self_id}
        theirs = _drop_trailing(incoming.without(lambda n, m: n == sender or n not in known))
        nbrs = incoming.nodes_at(1) if incoming.size > 1 else frozenset()
        return own, theirs, nbrs

    def check_incoming(self) -> dict[NodeId, AncestorList]:
        """Mark-strip, validate and screen every stored neighbor list.

        Returns the working list per sender: the stripped list, ``(u!)`` if
        it is malformed or does not name us, ``(u!!)`` if the sender is
        subject to the compatibility test (see :class:`CompatGate`) and
        fails it.
        """
        me = self.self_id
        working: dict[NodeId, AncestorList] = {}
        for u in sorted(self.msg_set):
            lst = _strip_marks(self.msg_set[u].list, me)
            if not good_list(lst, me, self.dmax):
                lst = AncestorList.singleton(u, Mark.SINGLE)
            elif self._gated(u):
                own, theirs, nbrs = self.compatibility_inputs(lst)
                if not compatible_list(own, theirs, self.dmax, self.compat_variant, nbrs):
                    lst = AncestorList.singleton(u, Mark.DOUBLE)
            working[u] = lst
        return working

    def _gated(self, u: NodeId) -> bool:
        gate = self.compat_gate
        if gate is CompatGate.VIEW:
            return u not in self.view
        if gate is CompatGate.NEW:
            return u not in self.list.plain_nodes()
        if u in self.view or (gate is CompatGate.FRESH and u in self.list.plain_nodes()):
            return False
        for x, msg in self.msg_set.items():
            if x != u and u in _strip_marks(msg.list, self.self_id).plain_nodes():
                return False
        return True

    def _fold(self, working: Mapping[NodeId, AncestorList]) -> AncestorList:
        lst = AncestorList.singleton(self.self_id)
        for u in sorted(working):
            lst = ant(lst, working[u])
        return lst

    def own_group_priority(self) -> Priority:
        members = [self.priority_table[n] for n in self.view if n in self.priority_table]
        return min(members + [self.priority])

    def has_priority(self, far: NodeId, provider: NodeId) -> bool:
        """Whether ``far``, reached through ``provider``, beats this node."""
        msg = self.msg_set[provider]
        if self.priority_rule is PriorityRule.NODE or far in self.view:
            theirs = msg.priority_map.get(far)
            return theirs is not None and theirs < self.priority
        return group_priority(msg) < self.own_group_priority()

    def resolve_conflict(
        self, computed: AncestorList, working: dict[NodeId, AncestorList]
    ) -> AncestorList:
        """Reject neighbors that bring a too-far node having priority.

        ``working`` is updated in place; the list is then folded again and
        truncated to ``dmax + 1`` sets.
        """
        d = self.dmax
        for w in sorted(computed.nodes_at(d + 1)):
            for u in sorted(working):
                lu = working[u]
                if lu.size > d and w in lu.nodes_at(d) and self.has_priority(w, u):
                    working[u] = AncestorList.singleton(u, Mark.DOUBLE)
        return _drop_trailing(truncate(self._fold(working), d))

    def compute(self) -> None:
        """Compute timer expiration: rebuild list, quarantines, view, priority."""
        working = self.check_incoming()
        lst = self._fold(working)
        if lst.size >= self.dmax + 2:
            lst = self.resolve_conflict(lst, working)
        if self.cut_gaps:
            lst = _cut_at_gap(lst)

        prev_plain = self.list.plain_nodes()
        quarantine = {}
        for n in lst.plain_nodes() - {self.self_id}:
            if n not in prev_plain:
                quarantine[n] = self.dmax
            else:
                quarantine[n] = max(min(self.quarantine.get(n, 0), self.dmax) - 1, 0)
        self.quarantine = quarantine
        self.list = lst
        self.view = frozenset(
            [self.self_id] + [n for n, q in quarantine.items() if q == 0]
        )
        idle = self.oldness_rule is OldnessRule.ALONE or lst.plain_nodes() == {self.self_id}
        if len(self.view) == 1 and idle:
            self.oldness += 1
        self._refresh_priorities(lst)
        self.msg_set.clear()
        self.computes += 1

    def _refresh_priorities(self, lst: AncestorList) -> None:
        table = {self.self_id: self.priority}
        for n in lst.nodes() - {self.self_id}:
            chosen = None
            if n in self.msg_set:
                chosen = self.msg_set[n].priority_map.get(n)
            if chosen is None:
                best = None
                for u in sorted(self.msg_set):
                    msg = self.msg_set[u]
                    pos = msg.list.position(n)
                    if pos is not None and n in msg.priority_map and (best is None or pos < best[0]):
                        best = (pos, msg.priority_map[n])
                chosen = best[1] if best else self.priority_table.get(n)
            if chosen is not None:
                table[n] = chosen
        self.priority_table = table

    # -- emission -------------------------------------------------------

    def emit(self) -> GrpMessage:
        """Message for the send timer; does not modify the state."""
        prios = {}
        for n in self.list.nodes():
            # Only corrupted tables lack entries; announce our own oldness.
            prios[n] = self.priority_table.get(n, Priority(self.oldness, n))
        if self.self_id in prios:
            prios[self.self_id] = self.priority
        return GrpMessage.build(self.self_id, self.list, prios)

    # -- rendering ------------------------------------------------------

    def render(self) -> dict[str, str]:
        """Canonical per-node record used in traces."""
        return {
            "list": render(self.list),
            "view": "{" + ",".join(str(n) for n in sorted(self.view)) + "}",
            "quarantine": ",".join(f"{n}:{q}" for n, q in sorted(self.quarantine.items())),
            "priority": str(self.oldness),
        }
