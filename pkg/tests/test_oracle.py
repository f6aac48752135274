import itertools

import networkx as nx
import pytest

from grpsim.lists import CompatVariant, compatible_list, parse_list
from grpsim.oracle import iter_instances, sweep


def merged_graph(inst):
    g = nx.Graph()
    g.add_edges_from(inst.a_edges)
    g.add_edges_from(inst.b_edges)
    g.add_nodes_from([inst.v, inst.w])
    g.add_edges_from((inst.w, s) for s in inst.attach)
    return g


@pytest.mark.parametrize("dmax", [1, 2, 3])
def test_instances_are_consistent(dmax):
    for inst in itertools.islice(iter_instances(5, dmax), 0, None, 7):
        assert inst.v in inst.attach
        assert inst.own.size <= dmax + 1 and inst.incoming.size <= dmax + 1
        g = merged_graph(inst)
        assert nx.diameter(g) == inst.merged_diameter
        # the lists are the BFS layers around each root
        dist = nx.single_source_shortest_path_length(g.subgraph(inst.own.nodes()), inst.v)
        assert all(inst.own.position(n) == d for n, d in dist.items())
        assert inst.neighbors >= inst.attach


@pytest.mark.parametrize("dmax", [1, 2, 3])
def test_short_lists_always_fit(dmax):
    # p + q - 1 <= dmax bounds every path through the new edge
    for inst in iter_instances(6, dmax):
        if inst.own.size + inst.incoming.size - 1 <= dmax:
            assert inst.admissible


def test_sweep_counts_add_up():
    rep = sweep(5, (1, 2))
    totals = {(r.instances, r.admissible) for r in rep.variants.values()}
    assert len(totals) == 1
    for r in rep.variants.values():
        assert 0 <= r.soundness_violations <= r.accepted
        assert r.completeness_gaps <= r.admissible
        assert len(r.violation_examples) <= 3


def test_sweep_is_deterministic():
    assert sweep(5, (1, 2, 3)).to_json() == sweep(5, (1, 2, 3)).to_json()


def test_reported_counterexamples_are_real():
    rep = sweep(6, (2, 3))
    for r in rep.variants.values():
        for ex in r.violation_examples:
            assert ex["merged_diameter"] > ex["dmax"]
        for ex in r.gap_examples:
            assert ex["merged_diameter"] <= ex["dmax"]


def test_variant_selection_and_bad_arguments():
    rep = sweep(4, (1,), ["pseudocode"])
    assert list(rep.variants) == [CompatVariant.PSEUDOCODE]
    with pytest.raises(ValueError):
        sweep(1)
    with pytest.raises(ValueError):
        sweep(4, (0,))


def test_frozen_counterexample_to_the_conjunctive_bound():
    # path 1-3-2-0 with 4 hanging off 3; w=100 attaches to 0 and 1, 101 hangs off w.
    # 101 to 4 is 101-100-1-3-4: four hops > dmax = 3, yet the bound accepts.
    own = parse_list("({1},{3},{2,4},{0})")
    incoming = parse_list("({100},{101})")
    g = nx.Graph([(1, 3), (3, 2), (3, 4), (2, 0), (100, 101), (100, 0), (100, 1)])
    assert nx.diameter(g) == 4
    assert compatible_list(own, incoming, 3, CompatVariant.CONJUNCTIVE, {0, 1, 101})
    hit = [
        i for i in iter_instances(7, 3)
        if i.own == own and i.incoming == incoming and i.attach == {0, 1}
    ]
    assert hit and all(not i.admissible for i in hit)


def test_oracle_counts_match_an_independent_recount():
    rep = sweep(5, (2,), [CompatVariant.PROPOSITION]).variants[CompatVariant.PROPOSITION]
    unsound = 0
    for i in iter_instances(5, 2):
        g = merged_graph(i)
        truth = max(max(d.values()) for _, d in nx.all_pairs_shortest_path_length(g)) <= 2
        if compatible_list(i.own, i.incoming, 2, CompatVariant.PROPOSITION, i.neighbors) and not truth:
            unsound += 1
    assert rep.soundness_violations == unsound
