"""Exhaustive walk enumeration over a dialog flow.

A walk is one start-to-end traversal with the option bindings fixed at each
question. Cycles are bounded: each node may be visited at most
1 + max_cycle_visits times, which makes "exhaustive" finite.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import NoEndReachableError, WalkExplosionError
from ..flow.model import DialogFlow, FlowEdge

DEFAULT_MAX_CYCLE_VISITS = 1
DEFAULT_MAX_WALKS = 5000


@dataclass(frozen=True)
class Walk:
    node_ids: tuple[str, ...]
    bindings: tuple[tuple[str, str], ...]

    def key(self) -> tuple:
        return (self.node_ids, self.bindings)


def synthesized_value(entity: str) -> str:
    """Stand-in user reply for an open-entity question during compilation."""
    return entity


def enumerate_walks(flow: DialogFlow,
                    max_cycle_visits: int = DEFAULT_MAX_CYCLE_VISITS,
                    max_walks: int = DEFAULT_MAX_WALKS) -> list[Walk]:
    """Every start-to-end walk, depth-first, edges in canonical order."""
    if max_cycle_visits < 0 or max_walks <= 0:
        raise ValueError("limits must be positive")
    max_visits = 1 + max_cycle_visits
    nodes = flow.nodes_by_id()
    outgoing: dict[str, list[FlowEdge]] = {n.id: [] for n in flow.nodes}
    for edge in flow.edges:
        outgoing[edge.from_].append(edge)
    for edges in outgoing.values():
        edges.sort(key=FlowEdge.key)
    open_entities = {e.name for e in flow.entities if e.kind == "open"}

    walks: list[Walk] = []
    path: list[str] = [flow.start]
    bindings: list[tuple[str, str]] = []
    visits: dict[str, int] = {flow.start: 1}
    env: dict[str, str] = {}

    def satisfied(edge: FlowEdge) -> bool:
        cond = edge.condition
        if cond.kind == "always":
            return True
        if cond.kind == "entity_present":
            return cond.entity in env
        if cond.kind == "entity_absent":
            return cond.entity not in env
        return env.get(cond.entity) == cond.value

    def descend(node_id: str) -> None:
        node = nodes[node_id]
        if node.kind == "end":
            if len(walks) >= max_walks:
                raise WalkExplosionError(
                    f"flow exceeds the walk budget of {max_walks}",
                    max_walks=max_walks)
            walks.append(Walk(node_ids=tuple(path), bindings=tuple(bindings)))
            return
        if node.kind == "question":
            for edge in outgoing[node_id]:
                if edge.condition.kind == "option":
                    value = edge.condition.value
                elif edge.condition.kind == "always" and node.entity in open_entities:
                    value = synthesized_value(node.entity)
                else:
                    continue
                _follow(edge, (node.entity, value))
            return
        for edge in outgoing[node_id]:
            if satisfied(edge):
                _follow(edge, None)

    def _follow(edge: FlowEdge, binding: tuple[str, str] | None) -> None:
        if visits.get(edge.to, 0) >= max_visits:
            return
        visits[edge.to] = visits.get(edge.to, 0) + 1
        path.append(edge.to)
        old = None
        if binding is not None:
            entity, value = binding
            old = (entity, env.get(entity))
            env[entity] = value
            bindings.append(binding)
        descend(edge.to)
        if binding is not None:
            bindings.pop()
            entity, prev = old
            if prev is None:
                del env[entity]
            else:
                env[entity] = prev
        path.pop()
        visits[edge.to] -= 1

    descend(flow.start)
    if not walks:
        raise NoEndReachableError(
            f"no end node reachable from '{flow.start}' within the cycle bound")
    return walks
