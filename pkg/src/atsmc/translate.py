"""Attack tree -> network of stochastic timed automata.

Every tree element becomes one automaton talking over two kinds of broadcast
channel: ``initiate_<e>`` (a parent activates ``e``) and ``fail_<e>`` (``e``
has been disrupted). A driver automaton starts the top event at time 0 and
moves to ``Disrupt`` once it fails.

Automata are composed driver first, then elements parents-before-children.
The engine settles simultaneous zero-delay moves in that order, so a gate
always finishes activating its children before any of them can answer.
"""
from __future__ import annotations

from .model import AttackTree, GateKind, Node, require_valid
from .sta import (GLOBAL_CLOCK, NSTA, RECV, SEND, STA, Action, Channel, Edge,
                  Exponential, compose)

MAX_AND_ARITY = 16
DRIVER = "Top_event"


def fail_channel(node_id: str) -> str:
    return f"fail_{node_id}"


def initiate_channel(node_id: str, parent: str | None = None) -> str:
    """Initiate channel of ``node_id``; shared nodes get one per parent to keep a single sender."""
    return f"initiate_{node_id}" if parent is None else f"initiate_{node_id}_by_{parent}"


def _send(ch: str) -> Action:
    return Action(ch, SEND)


def _recv(ch: str) -> Action:
    return Action(ch, RECV)


def _echo(node_id: str, inbound: list[str]) -> tuple[list[str], list[Edge]]:
    # a shared element that is already done re-announces its failure to late parents
    edges = [Edge("Done", "Echo", _recv(ch)) for ch in inbound]
    edges.append(Edge("Echo", "Done", _send(fail_channel(node_id))))
    return ["Echo"], edges


def translate_leaf(leaf: Node, inbound: list[str] | None = None) -> STA:
    """Idle --initiate?--> Active (Exp(rate)) --fail!--> Done."""
    if not leaf.is_leaf:
        raise TypeError(f"translate_leaf called on gate {leaf.id!r}")
    inbound = inbound or [initiate_channel(leaf.id)]
    locs = ["Idle", "Active", "Done"]
    edges = [Edge("Idle", "Active", _recv(ch)) for ch in inbound]
    edges.append(Edge("Active", "Done", _send(fail_channel(leaf.id))))
    if len(inbound) > 1:
        extra_locs, extra_edges = _echo(leaf.id, inbound)
        locs += extra_locs
        edges += extra_edges
    return STA(name=leaf.id, locations=tuple(locs), initial="Idle", edges=tuple(edges),
               sojourn={"Active": Exponential(leaf.rate)}, accepting="Done")


def translate_gate(gate: Node, inbound: list[str] | None = None,
                   child_initiate: list[str] | None = None) -> STA:
    """Untimed gate logic.

    ``child_initiate`` overrides the channel used to activate each child (needed
    when a child is shared).
    """
    if gate.is_leaf:
        raise TypeError(f"translate_gate called on leaf {gate.id!r}")
    kids = list(gate.children)
    inbound = inbound or [initiate_channel(gate.id)]
    start = child_initiate or [initiate_channel(c) for c in kids]
    me_fail = fail_channel(gate.id)
    locs: list[str] = ["Idle"]
    edges: list[Edge] = []

    if gate.gate is GateKind.SAND:
        first = f"Activate_{kids[0]}"
        edges += [Edge("Idle", first, _recv(ch)) for ch in inbound]
        for i, c in enumerate(kids):
            act, wait = f"Activate_{c}", f"Wait_{c}"
            locs += [act, wait]
            nxt = f"Activate_{kids[i + 1]}" if i + 1 < len(kids) else "Fire"
            edges.append(Edge(act, wait, _send(start[i])))
            edges.append(Edge(wait, nxt, _recv(fail_channel(c))))
    else:
        acts = [f"Activate_{c}" for c in kids]
        locs += acts
        edges += [Edge("Idle", acts[0], _recv(ch)) for ch in inbound]
        for i, c in enumerate(kids):
            nxt = acts[i + 1] if i + 1 < len(kids) else "Wait"
            edges.append(Edge(acts[i], nxt, _send(start[i])))
        if gate.gate is GateKind.OR:
            locs.append("Wait")
            edges += [Edge("Wait", "Fire", _recv(fail_channel(c))) for c in kids]
        else:
            if len(kids) > MAX_AND_ARITY:
                raise ValueError(f"AND gate {gate.id!r} has more than {MAX_AND_ARITY} children")
            full = (1 << len(kids)) - 1

            def wait_name(mask: int) -> str:
                got = [c for i, c in enumerate(kids) if mask >> i & 1]
                return "Wait" if not got else "Wait+" + "+".join(got)

            for mask in range(full):
                locs.append(wait_name(mask))
            for mask in range(full):
                for i, c in enumerate(kids):
                    if mask >> i & 1:
                        continue
                    nm = mask | 1 << i
                    edges.append(Edge(wait_name(mask), "Fire" if nm == full else wait_name(nm),
                                      _recv(fail_channel(c))))
    locs += ["Fire", "Done"]
    edges.append(Edge("Fire", "Done", _send(me_fail)))
    if len(inbound) > 1:
        extra_locs, extra_edges = _echo(gate.id, inbound)
        locs += extra_locs
        edges += extra_edges
    return STA(name=gate.id, locations=tuple(locs), initial="Idle", edges=tuple(edges), accepting="Done")


def translate_root(top: str, name: str = DRIVER, clock: str = GLOBAL_CLOCK) -> STA:
    """Initial --initiate_top!, x:=0--> Wait --fail_top?--> Disrupt."""
    edges = (
        Edge("Initial", "Wait", _send(initiate_channel(top)), resets=frozenset([clock])),
        Edge("Wait", "Disrupt", _recv(fail_channel(top))),
    )
    return STA(name=name, locations=("Initial", "Wait", "Disrupt"), initial="Initial",
               edges=edges, clocks=frozenset([clock]), accepting="Disrupt")


def translate_tree(tree: AttackTree) -> NSTA:
    require_valid(tree)
    parents = tree.parents()
    driver = DRIVER
    while driver in tree.nodes:
        driver += "_"

    def inbound(nid: str) -> list[str]:
        ps = parents[nid]
        return [initiate_channel(nid)] if len(ps) <= 1 else [initiate_channel(nid, p) for p in ps]

    automata = [translate_root(tree.top_event, driver)]
    channels = set()
    for nid in tree.topological_order():
        n = tree.nodes[nid]
        ins = inbound(nid)
        channels.update(ins)
        channels.add(fail_channel(nid))
        if n.is_leaf:
            automata.append(translate_leaf(n, ins))
        else:
            starts = [initiate_channel(c) if len(parents[c]) <= 1 else initiate_channel(c, nid)
                      for c in n.children]
            automata.append(translate_gate(n, ins, starts))
    aliases = {"Top_event": driver, tree.top_event: driver}
    aliases.pop(driver, None)
    return compose(automata, [Channel(c) for c in sorted(channels)], aliases=aliases)
