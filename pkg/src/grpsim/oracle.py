"""Brute-force check of the compatibility test against merged diameters.

An instance is two connected groups ``A`` (owned by ``v``) and ``B``
(owned by the sender ``w``), each of diameter at most ``dmax``, joined only
by edges from ``w`` to a set ``S`` of ``A`` nodes with ``v`` in ``S``. The
own list is the BFS layering of ``A`` from ``v``, the incoming list the BFS
layering of ``B`` from ``w``, and the sender's neighbor set is
``N_B(w) ∪ S``. The ground truth is the diameter of ``A ∪ B`` computed by
networkx.

Groups range over every connected graph of the networkx atlas, every
choice of owner and every attachment set. Isomorphic duplicates are kept;
they only inflate the counts, not the verdicts.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

import networkx as nx

from grpsim.lists import AncestorList, CompatVariant, compatible_list

EXAMPLES_KEPT = 3


@dataclass(frozen=True)
class Instance:
    dmax: int
    a_edges: tuple
    b_edges: tuple
    v: int
    w: int
    attach: frozenset
    own: AncestorList
    incoming: AncestorList
    neighbors: frozenset
    merged_diameter: int

    @property
    def admissible(self) -> bool:
        return self.merged_diameter <= self.dmax

    def describe(self) -> dict:
        return {
            "dmax": self.dmax,
            "own": str(self.own),
            "incoming": str(self.incoming),
            "attach": sorted(self.attach),
            "merged_diameter": self.merged_diameter,
        }


def _rooted_groups(max_size: int, dmax: int, offset: int) -> list[tuple[nx.Graph, int, list]]:
    out = []
    for g in nx.graph_atlas_g()[1:]:
        k = g.number_of_nodes()
        if k > max_size or not nx.is_connected(g) or nx.diameter(g) > dmax:
            continue
        g = nx.relabel_nodes(g, {x: x + offset for x in g})
        for root in sorted(g):
            layers: dict[int, list] = {}
            for node, d in nx.single_source_shortest_path_length(g, root).items():
                layers.setdefault(d, []).append(node)
            out.append((g, root, [layers[i] for i in sorted(layers)]))
    return out


def iter_instances(max_n: int, dmax: int) -> Iterator[Instance]:
    """Every instance with ``|A| + |B| <= max_n``."""
    lefts = _rooted_groups(max_n - 1, dmax, 0)
    rights = _rooted_groups(max_n - 1, dmax, 100)
    for ga, v, a_layers in lefts:
        own = AncestorList.of(*a_layers)
        others = sorted(x for x in ga if x != v)
        for gb, w, b_layers in rights:
            if ga.number_of_nodes() + gb.number_of_nodes() > max_n:
                continue
            incoming = AncestorList.of(*b_layers)
            nbrs_b = frozenset(gb[w])
            for r in range(len(others) + 1):
                for extra in itertools.combinations(others, r):
                    attach = frozenset((v, *extra))
                    merged = nx.union(ga, gb)
                    merged.add_edges_from((w, x) for x in attach)
                    yield Instance(
                        dmax=dmax,
                        a_edges=tuple(ga.edges),
                        b_edges=tuple(gb.edges),
                        v=v,
                        w=w,
                        attach=attach,
                        own=own,
                        incoming=incoming,
                        neighbors=nbrs_b | attach,
                        merged_diameter=nx.diameter(merged),
                    )


@dataclass
class VariantReport:
    variant: CompatVariant
    instances: int = 0
    admissible: int = 0
    accepted: int = 0
    soundness_violations: int = 0
    completeness_gaps: int = 0
    violation_examples: list = field(default_factory=list)
    gap_examples: list = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return self.soundness_violations == 0

    def add(self, inst: Instance, accepted: bool) -> None:
        self.instances += 1
        self.admissible += inst.admissible
        self.accepted += accepted
        if accepted and not inst.admissible:
            self.soundness_violations += 1
            if len(self.violation_examples) < EXAMPLES_KEPT:
                self.violation_examples.append(inst.describe())
        elif inst.admissible and not accepted:
            self.completeness_gaps += 1
            if len(self.gap_examples) < EXAMPLES_KEPT:
                self.gap_examples.append(inst.describe())

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "instances": self.instances,
            "admissible": self.admissible,
            "accepted": self.accepted,
            "soundness_violations": self.soundness_violations,
            "completeness_gaps": self.completeness_gaps,
            "violation_examples": self.violation_examples,
            "gap_examples": self.gap_examples,
        }


@dataclass
class SweepReport:
    max_n: int
    dmax_values: tuple[int, ...]
    variants: dict[CompatVariant, VariantReport]

    def sound_variants(self) -> list[CompatVariant]:
        return [v for v, r in self.variants.items() if r.sound]

    def to_json(self) -> str:
        rec = {
            "max_n": self.max_n,
            "dmax": list(self.dmax_values),
            "variants": [r.to_dict() for r in self.variants.values()],
        }
        return json.dumps(rec, sort_keys=True, indent=1) + "\n"

    def lines(self) -> list[str]:
        out = []
        for r in self.variants.values():
            out.append(
                f"{r.variant.value}: instances={r.instances} admissible={r.admissible} "
                f"accepted={r.accepted} unsound={r.soundness_violations} gaps={r.completeness_gaps}"
            )
        return out


def sweep(
    max_n: int = 7,
    dmax_values: Iterable[int] = (1, 2, 3),
    variants: Iterable[CompatVariant | str] = tuple(CompatVariant),
) -> SweepReport:
    if max_n < 2:
        raise ValueError(f"max_n must be >= 2, got {max_n}")
    dmax_values = tuple(dmax_values)
    if not dmax_values or min(dmax_values) < 1:
        raise ValueError("dmax values must be >= 1")
    reports = {CompatVariant(v): VariantReport(CompatVariant(v)) for v in variants}
    for dmax in dmax_values:
        for inst in iter_instances(max_n, dmax):
            for var, rep in reports.items():
                ok = compatible_list(inst.own, inst.incoming, dmax, var, inst.neighbors)
                rep.add(inst, ok)
    return SweepReport(max_n, dmax_values, reports)
