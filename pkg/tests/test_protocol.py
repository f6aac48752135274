import pytest

from grpsim.lists import AncestorList, Mark, parse_list
from grpsim.protocol import (
    CompatGate,
    GrpMessage,
    MalformedMessage,
    NodeState,
    OldnessRule,
    Priority,
    PriorityRule,
    group_priority,
)

L = parse_list


def msg(sender, text, oldness=None):
    lst = L(text)
    oldness = oldness or {}
    return GrpMessage.build(sender, lst, {n: Priority(oldness.get(n, 0), n) for n in lst.nodes()})


def test_priority_order_is_lexicographic():
    assert Priority(0, 9) < Priority(1, 0)
    assert Priority(2, 1) < Priority(2, 3)
    assert str(Priority(4, 7)) == "7:4"


def test_last_message_per_sender_wins():
    st = NodeState(0, dmax=2)
    st.on_receive(msg(1, "({1})"))
    st.on_receive(msg(1, "({1},{0})"))
    assert st.msg_set[1].list == L("({1},{0})")
    st.on_receive(msg(2, "({2})"))
    assert set(st.msg_set) == {1, 2}


def test_compute_clears_messages():
    st = NodeState(0, dmax=2)
    st.on_receive(msg(1, "({1})"))
    st.compute()
    assert st.msg_set == {}


def test_own_and_malformed_messages_are_dropped():
    st = NodeState(0, dmax=2)
    assert not st.on_receive(msg(0, "({0})"))
    bad = GrpMessage(1, L("({1},{0})"), ((1, Priority(0, 1)),))
    assert not st.on_receive(bad)
    assert st.msg_set == {}


def test_message_render_round_trip():
    m = msg(3, "({3},{1,2!},{4!!})", {1: 2, 4: 7})
    text = m.render()
    assert text == "GRP 3 ({3},{1,2!},{4!!}) PRIO 1:2,2:0,3:0,4:7"
    assert GrpMessage.parse(text) == m


@pytest.mark.parametrize("text", ["GRP 1 ({1})", "XYZ 1 ({1}) PRIO 1:0", "GRP 1 ({1}) PRIO 1:x"])
def test_message_parse_rejects_garbage(text):
    with pytest.raises(ValueError):
        GrpMessage.parse(text)


def test_group_priority_is_minimum():
    m = GrpMessage.build("s", L("({s},{a,b})"), {"s": Priority(5, "s"), "a": Priority(3, "a"), "b": Priority(1, "b")})
    assert group_priority(m) == Priority(1, "b")
    lone = GrpMessage.build("s", L("({s})"), {"s": Priority(2, "s")})
    assert group_priority(lone) == Priority(2, "s")
    with pytest.raises(MalformedMessage):
        group_priority(GrpMessage("s", L("({s})"), ()))


def test_own_group_priority_matches_brute_force():
    st = NodeState(0, dmax=3, oldness=4)
    st.view = frozenset({0, 1, 2})
    st.priority_table = {0: Priority(4, 0), 1: Priority(2, 1), 2: Priority(2, 2), 3: Priority(0, 3)}
    expected = min(p for n, p in st.priority_table.items() if n in st.view)
    assert st.own_group_priority() == expected == Priority(2, 1)


# -- check_incoming --------------------------------------------------------


def test_list_not_naming_receiver_is_single_marked():
    st = NodeState("v", dmax=3)
    st.on_receive(msg("u", "({u},{w})"))
    assert st.check_incoming()["u"] == AncestorList.singleton("u", Mark.SINGLE)


def test_foreign_marks_are_stripped():
    st = NodeState("v", dmax=3)
    st.on_receive(msg("u", "({u},{v!,x!!},{y})"))
    assert st.check_incoming()["u"] == L("({u},{v!},{y})")


@pytest.mark.parametrize("gate", list(CompatGate))
def test_sender_in_view_is_never_double_marked(gate):
    st = NodeState("v", dmax=3, compat_gate=gate)
    st.list = L("({v},{a,u},{b})")
    st.view = frozenset({"v", "a", "u", "b"})
    st.on_receive(msg("u", "({u},{v},{c},{d})"))
    assert st.check_incoming()["u"] == L("({u},{v},{c},{d})")


@pytest.mark.parametrize("sides", [True, False])
def test_incompatible_newcomer_is_double_marked(sides):
    # b - a - v - w - c: merged diameter 4 > 3
    st = NodeState("v", dmax=3, compat_gate=CompatGate.VIEW, compat_sides=sides)
    st.list = L("({v},{a},{b})")
    st.view = frozenset({"v", "a", "b"})
    st.on_receive(msg("w", "({w},{v},{c})"))
    assert st.check_incoming()["w"] == AncestorList.singleton("w", Mark.DOUBLE)


def test_gates_skip_senders_already_being_admitted():
    def state(gate):
        st = NodeState("v", dmax=3, compat_gate=gate)
        st.list = L("({v},{a,w},{b})")
        st.view = frozenset({"v", "a", "b"})
        st.on_receive(msg("w", "({w},{v},{c},{d})"))
        st.on_receive(msg("a", "({a},{v,w},{b})"))
        return st

    assert state(CompatGate.VIEW).check_incoming()["w"].mark_of("w") is Mark.DOUBLE
    for gate in (CompatGate.NEW, CompatGate.KNOWN, CompatGate.FRESH):
        assert state(gate).check_incoming()["w"] == L("({w},{v},{c},{d})")


# -- compute -------------------------------------------------------------


def test_isolated_node_ages():
    st = NodeState("v", dmax=2)
    st.compute()
    assert st.list == L("({v})") and st.view == {"v"} and st.oldness == 1
    st.compute()
    assert st.oldness == 2


def test_idle_rule_freezes_oldness_during_admission():
    for rule, expected in ((OldnessRule.ALONE, 1), (OldnessRule.IDLE, 0)):
        st = NodeState("v", dmax=2, oldness_rule=rule)
        st.on_receive(msg("u", "({u},{v})"))
        st.compute()
        assert st.view == {"v"} and "u" in st.list.plain_nodes()
        assert st.oldness == expected


def test_handshake_and_quarantine_countdown():
    dmax = 3
    st = NodeState("v", dmax=dmax)
    st.on_receive(msg("u", "({u})"))
    st.compute()
    assert st.list == L("({v},{u!})")
    rounds = 0
    while "u" not in st.view:
        st.on_receive(msg("u", "({u},{v})"))
        st.compute()
        rounds += 1
        assert st.quarantine["u"] <= dmax
    assert rounds == dmax + 1  # first plain sighting, then dmax countdown rounds
    assert st.view == {"u", "v"}


def test_group_member_keeps_oldness():
    st = NodeState("v", dmax=1, oldness=3)
    for _ in range(4):
        st.on_receive(msg("u", "({u},{v})"))
        st.compute()
    assert st.view == {"u", "v"}
    before = st.oldness
    for _ in range(3):
        st.on_receive(msg("u", "({u},{v})"))
        st.compute()
    assert st.oldness == before


def test_compute_invariants_on_oversized_input_state():
    st = NodeState("v", dmax=2)
    st.list = L("({v},{a},{b},{c},{d},{e})")
    st.quarantine = {"a": 9}
    st.on_receive(msg("a", "({a},{v},{b})"))
    st.compute()
    assert st.list.size <= 3
    assert st.list[0] == (("v", Mark.PLAIN),)
    assert "v" in st.view
    assert all(0 <= q <= 2 for q in st.quarantine.values())
    assert st.view - {"v"} <= {n for n in st.list.plain_nodes() - {"v"} if st.quarantine[n] == 0}


# -- conflicts -----------------------------------------------------------


def grouped(oldness, peer_oldness, rule=PriorityRule.NODE):
    """Node 0 already grouped with 1, dmax = 1."""
    st = NodeState(0, dmax=1, oldness=oldness, priority_rule=rule)
    st.list = L("({0},{1})")
    st.view = frozenset({0, 1})
    st.quarantine = {1: 0}
    st.priority_table = {0: st.priority, 1: Priority(peer_oldness, 1)}
    return st


@pytest.mark.parametrize("rule", list(PriorityRule))
def test_far_node_with_priority_rejects_its_provider(rule):
    st = grouped(5, 1, rule)
    st.on_receive(msg(1, "({1},{0,2})", {0: 5, 1: 1, 2: 0}))
    st.compute()
    assert st.list == L("({0},{1!!})")


@pytest.mark.parametrize("rule", list(PriorityRule))
def test_local_priority_truncates_far_node(rule):
    st = grouped(0, 3, rule)
    st.on_receive(msg(1, "({1},{0,2})", {0: 0, 1: 3, 2: 3}))
    st.compute()
    assert st.list == L("({0},{1})")


def test_group_rule_compares_group_minimum():
    # far node 2 is worse than 0, but the provider's message is older than our group
    for rule, expected in ((PriorityRule.GROUP, "({0},{1!!})"), (PriorityRule.NODE, "({0},{1})")):
        st = grouped(2, 3, rule)
        st.on_receive(msg(1, "({1},{0,2})", {0: 2, 1: 0, 2: 4}))
        st.compute()
        assert st.list == L(expected), rule


# -- emission ------------------------------------------------------------


def test_fresh_node_announces_itself():
    m = NodeState("v", dmax=2, oldness=3).emit()
    assert m.list == L("({v})") and m.priority_map == {"v": Priority(3, "v")}


def test_emit_covers_list_and_is_read_only():
    st = NodeState("v", dmax=2)
    st.on_receive(msg("u", "({u},{v},{w})", {"w": 2}))
    st.compute()
    a, b = st.emit(), st.emit()
    assert a == b
    assert set(a.priority_map) == set(st.list.nodes())
    a.validate()


def test_construction_rejects_bad_parameters():
    with pytest.raises(ValueError):
        NodeState("v", dmax=0)
    with pytest.raises(ValueError):
        NodeState("v", dmax=1, tc_period=4, ts_period=5)
