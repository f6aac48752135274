import networkx as nx
import pytest

from grpsim.checker import Reduced, check_maximality, check_safety
from grpsim.gen import Kind, generate, merge_chain_adjacency
from grpsim.scenario_io import dump_scenario
from grpsim.sim import EditKind, ScenarioError, run


def graph(sc):
    g = nx.Graph()
    g.add_nodes_from(sc.nodes)
    g.add_edges_from((u, v) for u, v, _ in sc.edges)
    return g


@pytest.mark.parametrize("kind", list(Kind))
def test_same_arguments_same_file(kind):
    assert dump_scenario(generate(kind, 7, 2, 11)) == dump_scenario(generate(kind, 7, 2, 11))


@pytest.mark.parametrize("seed", range(10))
def test_static_random_is_connected(seed):
    sc = generate(Kind.STATIC_RANDOM, 9, 2, seed)
    assert nx.is_connected(graph(sc)) and not sc.schedule and not sc.initial_states


def test_smallest_static_scenario_is_the_handshake_pair():
    sc = generate(Kind.STATIC_RANDOM, 2, 1, 0)
    assert sc.nodes == (0, 1) and sc.edges == ((0, 1, False),)


def test_corrupted_start_tampers_every_node():
    sc = generate(Kind.CORRUPTED_START, 8, 3, 4)
    assert set(sc.initial_states) == set(sc.nodes)


def test_merge_chain_layout():
    sc = generate(Kind.MERGE_CHAIN, 6, 3, 0)
    t, a, b = merge_chain_adjacency(sc)
    assert (a, b) == ({0, 1, 2}, {3, 4, 5})
    assert sc.schedule[0].kind is EditKind.ADD_EDGE and sc.schedule[0].nodes == (2, 3)
    assert t < sc.horizon


@pytest.mark.parametrize("dmax", [1, 2, 3])
def test_long_merge_chain_must_not_merge(dmax):
    sc = generate(Kind.MERGE_CHAIN, 2 * dmax + 2, dmax, 0)
    _, a, b = merge_chain_adjacency(sc)
    assert len(a) == len(b) == dmax + 1
    views = {v: (a if v in a else b) for v in sc.nodes}
    r = Reduced.build(views, [(i, i + 1) for i in range(len(sc.nodes) - 1)])
    assert check_safety(r, dmax) and check_maximality(r, dmax)
    last = run(sc).snapshots[-1]
    assert all(last.states[v].view == views[v] for v in sc.nodes)


@pytest.mark.parametrize("seed", range(8))
def test_split_cut_breaks_the_bound(seed):
    sc = generate(Kind.SPLIT_CUT, 6, 2, seed)
    g = graph(sc)
    assert nx.diameter(g) <= 2
    cut = [e for e in sc.schedule if e.kind is EditKind.REMOVE_EDGE][-1]
    g.remove_edges_from(e.nodes for e in sc.schedule if e.kind is EditKind.REMOVE_EDGE)
    assert not nx.is_connected(g) or nx.diameter(g) > 2
    assert sc.schedule[-1].kind is EditKind.ADD_EDGE and sc.schedule[-1].nodes == cut.nodes


@pytest.mark.parametrize("n,dmax", [(1, 2), (3, 0)])
def test_invalid_parameters(n, dmax):
    with pytest.raises(ScenarioError):
        generate(Kind.STATIC_RANDOM, n, dmax, 0)
