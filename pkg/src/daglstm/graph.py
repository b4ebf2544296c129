"""Conversation DAGs: temporal edges plus same-participant skip edges.

Node k (0-based here) has at most two children, both with smaller indices:
the previous utterance (Temporal) and that participant's previous utterance
(SameParticipant) when it is not the same node. Index order is therefore
already a topological order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .data import Conversation

__all__ = [
    "EdgeType",
    "ConversationDag",
    "build_dag",
    "dag_from_participants",
    "topological_order",
    "count_additive_terms",
    "longest_path_terms",
]


class EdgeType(Enum):
    TEMPORAL = "Temporal"
    SAME_PARTICIPANT = "SameParticipant"


@dataclass(frozen=True)
class ConversationDag:
    size: int
    # children[k] lists (child index, edge type), Temporal first
    children: tuple[tuple[tuple[int, EdgeType], ...], ...]

    def to_json_dict(self) -> dict:
        return {
            "size": self.size,
            "children": [
                [{"child": j, "edge": e.value} for j, e in kids]
                for kids in self.children
            ],
        }


def dag_from_participants(participants: Sequence[str]) -> ConversationDag:
    if not participants:
        raise ValueError("cannot build a DAG for an empty conversation")
    last_seen: dict[str, int] = {}
    children = []
    for k, p in enumerate(participants):
        kids: list[tuple[int, EdgeType]] = []
        if k > 0:
            kids.append((k - 1, EdgeType.TEMPORAL))
            j = last_seen.get(p)
            # A coincident antecedent (previous utterance is also this
            # participant's previous) collapses to the single Temporal child.
            if j is not None and j != k - 1:
                kids.append((j, EdgeType.SAME_PARTICIPANT))
        last_seen[p] = k
        children.append(tuple(kids))
    return ConversationDag(size=len(participants), children=tuple(children))


def build_dag(conversation: Conversation) -> ConversationDag:
    return dag_from_participants(conversation.participants())


def topological_order(dag: ConversationDag) -> list[int]:
    return list(range(dag.size))


def count_additive_terms(dag: ConversationDag) -> list[int]:
    """Number of additive unit-cell contributions reaching each node under
    the sum combination rule: T(k) = 1 + sum over children T(j)."""
    terms = [0] * dag.size
    for k in range(dag.size):
        terms[k] = 1 + sum(terms[j] for j, _ in dag.children[k])
    return terms


def longest_path_terms(dag: ConversationDag) -> list[int]:
    """Depth analogue under the max combination rule:
    D(k) = 1 + max over children D(j), with max over no children = 0."""
    depth = [0] * dag.size
    for k in range(dag.size):
        depth[k] = 1 + max((depth[j] for j, _ in dag.children[k]), default=0)
    return depth
