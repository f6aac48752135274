"""Ordered lists of ancestors' sets and the ``ant`` operator.

A list is a sequence of sets; set ``i`` holds the nodes believed to sit at
distance ``i`` from the list owner. Every entry carries a mark level:
``PLAIN``, ``SINGLE`` (link seen from one side only) or ``DOUBLE`` (neighbor
declared incompatible).

    >>> a = AncestorList.parse("({d},{b},{a,c})")
    >>> b = AncestorList.parse("({c},{a,e},{b})")
    >>> str(merge(a, b))
    '({c,d},{a,b,e})'
    >>> str(ant(a, b))
    '({d},{b,c},{a,e})'

All values are immutable; every operation returns a new list.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Hashable, Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import Union

NodeId = Union[int, str]


class Mark(enum.IntEnum):
    """Mark level of a list entry, ordered by severity."""

    PLAIN = 0
    SINGLE = 1
    DOUBLE = 2

    @property
    def suffix(self) -> str:
        return "!" * int(self)


class CompatVariant(str, enum.Enum):
    """Constants used by :func:`compatible_list`.

    ``PSEUDOCODE`` uses ``min(s(own)+s(in)+1-i, s(in)+1+i//2)``;
    ``PROPOSITION`` uses ``min(s(own)+s(in)-1-i, s(in)+i//2)``, i.e. the
    bounds ``p-i+1+q`` and ``i/2+q+1`` written with ``p = s(own)-1`` and
    ``q = s(in)-1``. Both accept when either bound holds. ``CONJUNCTIVE``
    requires both proposition bounds, which is what bounding the two path
    families between the groups actually needs.
    """

    PSEUDOCODE = "pseudocode"
    PROPOSITION = "proposition"
    CONJUNCTIVE = "conjunctive"


Entry = tuple[NodeId, Mark]


@dataclass(frozen=True)
class AncestorList:
    """Immutable ordered list of entry-sets.

    ``sets[i]`` is a tuple of ``(node, mark)`` pairs sorted by node id.
    Construct through :meth:`of`, :meth:`singleton` or :meth:`parse`, which
    sort entries; the raw constructor trusts its input.
    """

    sets: tuple[tuple[Entry, ...], ...] = ()

    # -- construction -------------------------------------------------

    @classmethod
    def of(cls, *sets: Iterable[NodeId | Entry] | Mapping[NodeId, Mark]) -> AncestorList:
        """Build a list from per-position collections.

        Each position may be a mapping ``node -> Mark`` or an iterable of
        bare node ids (``PLAIN``) and ``(node, Mark)`` pairs. No
        deduplication across positions is performed; use
        :func:`normalize` for that.
        """
        out = []
        for s in sets:
            entries: dict[NodeId, Mark] = {}
            items = s.items() if isinstance(s, Mapping) else s
            for item in items:
                if isinstance(item, tuple):
                    node, mark = item
                else:
                    node, mark = item, Mark.PLAIN
                mark = Mark(mark)
                entries[node] = max(mark, entries.get(node, Mark.PLAIN))
            out.append(tuple(sorted(entries.items(), key=lambda e: e[0])))
        return cls(tuple(out))

    @classmethod
    def singleton(cls, node: NodeId, mark: Mark = Mark.PLAIN) -> AncestorList:
        return cls((((node, Mark(mark)),),))

    # -- accessors ----------------------------------------------------

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def size(self) -> int:
        """Number of sets, ``s(list)``."""
        return len(self.sets)

    def __getitem__(self, i: int) -> tuple[Entry, ...]:
        return self.sets[i]

    def __iter__(self) -> Iterator[tuple[Entry, ...]]:
        return iter(self.sets)

    def nodes_at(self, i: int) -> frozenset[NodeId]:
        return frozenset(n for n, _ in self.sets[i])

    def entries(self) -> Iterator[tuple[int, NodeId, Mark]]:
        """Yield ``(position, node, mark)`` for every entry."""
        for pos, s in enumerate(self.sets):
            for node, mark in s:
                yield pos, node, mark

    def nodes(self) -> frozenset[NodeId]:
        return frozenset(n for _, n, _ in self.entries())

    def plain_nodes(self) -> frozenset[NodeId]:
        return frozenset(n for _, n, m in self.entries() if m is Mark.PLAIN)

    def position(self, node: NodeId) -> int | None:
        """Smallest position holding ``node``, or ``None``."""
        for pos, s in enumerate(self.sets):
            for n, _ in s:
                if n == node:
                    return pos
        return None

    def mark_of(self, node: NodeId) -> Mark | None:
        for _, n, m in self.entries():
            if n == node:
                return m
        return None

    def has_empty_set(self) -> bool:
        return any(len(s) == 0 for s in self.sets)

    def without(self, keep) -> AncestorList:
        """Filter entries with ``keep(node, mark)``; positions are preserved."""
        return AncestorList(
            tuple(tuple(e for e in s if keep(e[0], e[1])) for s in self.sets)
        )

    # -- text form ----------------------------------------------------

    def __str__(self) -> str:
        return render(self)

    @classmethod
    def parse(cls, text: str) -> AncestorList:
        return parse_list(text)


def _render_node(node: NodeId) -> str:
    return str(node)


def render(lst: AncestorList) -> str:
    """Canonical text: ``({v},{a,b!},{c!!})``; entries sorted by node id."""
    parts = []
    for s in lst.sets:
        inner = ",".join(f"{_render_node(n)}{m.suffix}" for n, m in s)
        parts.append("{" + inner + "}")
    return "(" + ",".join(parts) + ")"


_ENTRY = re.compile(r"^([^\s{}(),!]+)(!{0,2})$")
_SETS = re.compile(r"^\s*(\{[^{}]*\}\s*(,\s*\{[^{}]*\}\s*)*)?$")


def parse_node_id(text: str) -> NodeId:
    """Node ids that look like non-negative integers are read as ``int``."""
    return int(text) if text.isdigit() else text


def parse_list(text: str) -> AncestorList:
    """Inverse of :func:`render`. Raises ``ValueError`` on malformed input."""
    t = text.strip()
    if not (t.startswith("(") and t.endswith(")")) or not _SETS.match(t[1:-1]):
        raise ValueError(f"malformed list {text!r}")
    sets = []
    for inner in re.findall(r"\{([^{}]*)\}", t):
        entries = []
        for tok in filter(None, (x.strip() for x in inner.split(","))):
            m = _ENTRY.match(tok)
            if not m:
                raise ValueError(f"bad entry {tok!r} in {text!r}")
            entries.append((parse_node_id(m.group(1)), Mark(len(m.group(2)))))
        sets.append(entries)
    return AncestorList.of(*sets)


# -- algebra ----------------------------------------------------------


def _drop_trailing_empty(sets: list[dict]) -> list[dict]:
    while sets and not sets[-1]:
        sets.pop()
    return sets


def merge(l1: AncestorList, l2: AncestorList) -> AncestorList:
    """The ``⊕`` operator.

    Position-wise union in which a node keeps only its smallest position.
    When a node occurs twice at that position the most severe mark wins.
    Trailing sets emptied by the deduplication are dropped.
    """
    best: dict[Hashable, tuple[int, Mark]] = {}
    for lst in (l1, l2):
        for pos, node, mark in lst.entries():
            cur = best.get(node)
            if cur is None or pos < cur[0] or (pos == cur[0] and mark > cur[1]):
                best[node] = (pos, mark)
    width = max(len(l1), len(l2))
    sets: list[dict] = [{} for _ in range(width)]
    for node, (pos, mark) in best.items():
        sets[pos][node] = mark
    return AncestorList.of(*_drop_trailing_empty(sets))


def normalize(lst: AncestorList) -> AncestorList:
    """Deduplicate a list (minimal position wins) and drop trailing empties."""
    return merge(lst, AncestorList())


def shift(lst: AncestorList) -> AncestorList:
    """The ``r`` endomorphism: prepend an empty set."""
    return AncestorList(((),) + lst.sets)


def ant(l1: AncestorList, l2: AncestorList) -> AncestorList:
    """``ant(l1, l2) = l1 ⊕ r(l2)``."""
    return merge(l1, shift(l2))


def truncate(lst: AncestorList, dmax: int) -> AncestorList:
    """Keep at most the first ``dmax + 1`` sets."""
    return AncestorList(lst.sets[: dmax + 1])


def good_list(lst: AncestorList, receiver: NodeId, dmax: int) -> bool:
    """Well-formedness of a neighbor's list as seen by ``receiver``.

    The receiver must be listed (plain or single-marked) among the sender's
    neighbors, the list must fit in ``dmax + 1`` sets and contain no empty
    set. Lists with fewer than two sets have no neighbor set and fail.
    """
    if lst.size < 2 or lst.size > dmax + 1 or lst.has_empty_set():
        return False
    return any(
        n == receiver and m in (Mark.PLAIN, Mark.SINGLE) for n, m in lst[1]
    )


def compatible_list(
    own: AncestorList,
    incoming: AncestorList,
    dmax: int,
    variant: CompatVariant | str = CompatVariant.PSEUDOCODE,
    neighbors: frozenset | None = None,
) -> bool:
    """Whether merging ``incoming`` keeps the owner's group within ``dmax``.

    True when ``s(own) + s(incoming) <= dmax + 1``, or when some position
    ``i`` of ``own`` is entirely contained in the sender's neighbor set
    (node ids only, marks ignored) and the variant's shortcut bound holds.
    The neighbor set defaults to ``incoming.1``. ``i // 2`` is the integer
    floor.
    """
    variant = CompatVariant(variant)
    p, q = own.size, incoming.size
    if p + q <= dmax + 1:
        return True
    if neighbors is None:
        if q < 2:
            return False
        neighbors = incoming.nodes_at(1)
    sender_nbrs = neighbors
    for i in range(p):
        if not own.nodes_at(i) <= sender_nbrs:
            continue
        if variant is CompatVariant.PSEUDOCODE:
            bound = min(p + q + 1 - i, q + 1 + i // 2)
        elif variant is CompatVariant.PROPOSITION:
            bound = min(p + q - 1 - i, q + i // 2)
        else:
            bound = max(p + q - 1 - i, q + i // 2)
        if bound <= dmax:
            return True
    return False
