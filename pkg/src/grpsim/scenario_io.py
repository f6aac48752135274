"""YAML scenario files and JSON-lines traces.

Scenario schema (all keys but ``nodes`` optional)::

    dmax: 2
    tau1: 20
    tau2: 5
    seed: 7
    horizon: 1000
    snapshots: every_compute        # every_event | every_compute | {period: 10}
    loss: none                      # none | {bounded: 2, p: 0.3}
    nodes:
      - 0
      - {id: 1, list: "({1},{0},{9})", view: [1], quarantine: {0: 2},
         priorities: {0: 0, 9: 3}, oldness: 1}
    edges:
      - [0, 1]
      - [1, 2, oneway]              # 1 -> 2 only
    schedule:
      - {time: 300, event: remove_edge, nodes: [0, 1]}

Unknown keys are rejected.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import IO

import yaml

from grpsim.lists import AncestorList, parse_node_id
from grpsim.sim import (
    ChannelModel,
    EditKind,
    InitialState,
    Scenario,
    ScenarioError,
    SnapshotPolicy,
    TopologyEvent,
)

TOP_KEYS = {"dmax", "tau1", "tau2", "seed", "nodes", "edges", "schedule", "horizon", "snapshots", "loss"}
NODE_KEYS = {"id", "list", "view", "quarantine", "priorities", "oldness"}
EVENT_KEYS = {"time", "event", "nodes", "oneway"}


def _check_keys(obj: Mapping, allowed: set, where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(map(str, extra)))}")


def _node(x) -> int | str:
    if isinstance(x, bool) or not isinstance(x, (int, str)):
        raise ScenarioError(f"node id must be an integer or string, got {x!r}")
    return parse_node_id(x) if isinstance(x, str) else x


def _int(obj: Mapping, key: str, default: int) -> int:
    val = obj.get(key, default)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ScenarioError(f"{key} must be an integer, got {val!r}")
    return val


def _initial_state(item: Mapping) -> tuple:
    _check_keys(item, NODE_KEYS, f"node {item.get('id')!r}")
    if "id" not in item:
        raise ScenarioError("node mapping without id")
    nid = _node(item["id"])
    try:
        lst = AncestorList.parse(str(item.get("list", f"({{{nid}}})")))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    view = frozenset(_node(n) for n in item.get("view", [nid]))
    quarantine = {_node(k): int(v) for k, v in (item.get("quarantine") or {}).items()}
    prios = {_node(k): int(v) for k, v in (item.get("priorities") or {}).items()}
    return nid, InitialState(lst, view, quarantine, prios, int(item.get("oldness", 0)))


def _snapshots(val) -> tuple[SnapshotPolicy, int]:
    if isinstance(val, Mapping):
        _check_keys(val, {"period"}, "snapshots")
        return SnapshotPolicy.PERIOD, int(val.get("period", 0))
    try:
        return SnapshotPolicy(val), 0
    except ValueError:
        raise ScenarioError(f"unknown snapshot policy {val!r}") from None


def _loss(val) -> tuple[int | None, float]:
    if val in (None, "none"):
        return None, 0.3
    if isinstance(val, Mapping):
        _check_keys(val, {"bounded", "p"}, "loss")
        return _int(val, "bounded", 0), float(val.get("p", 0.3))
    raise ScenarioError(f"loss must be 'none' or a mapping, got {val!r}")


def scenario_from_dict(doc: Mapping, seed: int | None = None, dmax: int | None = None) -> Scenario:
    """Build and validate a scenario; ``seed``/``dmax`` override the file."""
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a mapping")
    _check_keys(doc, TOP_KEYS, "scenario")
    if "nodes" not in doc:
        raise ScenarioError("scenario has no nodes")

    nodes, initial = [], {}
    for item in doc["nodes"] or []:
        if isinstance(item, Mapping):
            nid, st = _initial_state(item)
            initial[nid] = st
        else:
            nid = _node(item)
        nodes.append(nid)

    edges = []
    for e in doc.get("edges") or []:
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise ScenarioError(f"bad edge {e!r}")
        if len(e) == 3 and e[2] != "oneway":
            raise ScenarioError(f"third edge field must be 'oneway', got {e[2]!r}")
        edges.append((_node(e[0]), _node(e[1]), len(e) == 3))

    schedule = []
    for item in doc.get("schedule") or []:
        if not isinstance(item, Mapping):
            raise ScenarioError(f"bad schedule item {item!r}")
        _check_keys(item, EVENT_KEYS, "schedule item")
        try:
            kind = EditKind(item.get("event"))
        except ValueError:
            raise ScenarioError(f"unknown event {item.get('event')!r}") from None
        ns = item.get("nodes", [])
        ns = ns if isinstance(ns, (list, tuple)) else [ns]
        schedule.append(
            TopologyEvent(_int(item, "time", 0), kind, tuple(_node(n) for n in ns), bool(item.get("oneway", False)))
        )

    policy, period = _snapshots(doc.get("snapshots", "every_compute"))
    bound, prob = _loss(doc.get("loss"))
    channel = ChannelModel(
        tau1=_int(doc, "tau1", 20),
        tau2=_int(doc, "tau2", 5),
        loss_bound=bound,
        loss_prob=prob,
        rng_seed=seed if seed is not None else _int(doc, "seed", 0),
    )
    sc = Scenario(
        dmax=dmax if dmax is not None else _int(doc, "dmax", 2),
        nodes=tuple(nodes),
        edges=tuple(edges),
        schedule=tuple(schedule),
        channel=channel,
        horizon=_int(doc, "horizon", 50 * channel.tau1),
        snapshots=policy,
        snapshot_period=period,
        initial_states=initial,
    )
    sc.validate()
    return sc


def load_scenario(path: str | Path, seed: int | None = None, dmax: int | None = None) -> Scenario:
    """Read a scenario file. ``OSError`` propagates; bad content raises ``ScenarioError``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not valid YAML: {exc}") from None
    return scenario_from_dict(doc, seed=seed, dmax=dmax)


def scenario_to_dict(sc: Scenario) -> dict:
    ch = sc.channel
    nodes: list = []
    for n in sc.nodes:
        st = sc.initial_states.get(n)
        if st is None:
            nodes.append(n)
            continue
        nodes.append(
            {
                "id": n,
                "list": str(st.list),
                "view": sorted(st.view, key=str),
                "quarantine": dict(sorted(st.quarantine.items(), key=lambda kv: str(kv[0]))),
                "priorities": dict(sorted(st.priorities.items(), key=lambda kv: str(kv[0]))),
                "oldness": st.oldness,
            }
        )
    doc = {
        "dmax": sc.dmax,
        "tau1": ch.tau1,
        "tau2": ch.tau2,
        "seed": ch.rng_seed,
        "horizon": sc.horizon,
        "snapshots": (
            {"period": sc.snapshot_period} if sc.snapshots is SnapshotPolicy.PERIOD else sc.snapshots.value
        ),
        "loss": "none" if ch.loss_bound is None else {"bounded": ch.loss_bound, "p": ch.loss_prob},
        "nodes": nodes,
        "edges": [[u, v, "oneway"] if ow else [u, v] for u, v, ow in sc.edges],
        "schedule": [
            {"time": e.time, "event": e.kind.value, "nodes": list(e.nodes), **({"oneway": True} if e.oneway else {})}
            for e in sc.schedule
        ],
    }
    return doc


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None, width=100)


def write_trace(lines: Iterable[str], out: IO[str]) -> int:
    """Write trace records one per line, flushing each; returns the count."""
    count = 0
    for line in lines:
        out.write(line + "\n")
        out.flush()
        count += 1
    return count
