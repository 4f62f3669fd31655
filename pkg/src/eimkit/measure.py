"""Finite discretized model of a complete finite measure space.

A continuum is modeled as a finite node list; a node tagged
``NONATOMIC_SAMPLE`` stands for a quadrature cell of a nonatomic region,
while ``ATOM`` is a genuine atom.  Weights are arbitrary positive reals
(a finite measure, not necessarily a probability).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class NodeKind(Enum):
    ATOM = "atom"
    NONATOMIC_SAMPLE = "nonatomic"


class MeasureError(ValueError):
    pass


class DomainMismatchError(MeasureError):
    pass


@dataclass(frozen=True)
class MeasureNode:
    id: str
    weight: float
    kind: NodeKind = NodeKind.ATOM

    def __post_init__(self):
        if self.weight <= 0:
            raise MeasureError(f"node {self.id!r} has nonpositive weight")


@dataclass(frozen=True)
class MeasureSpace:
    nodes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not nodes:
            raise MeasureError("a measure space needs at least one node")
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise MeasureError("node ids must be unique")

    @classmethod
    def from_triples(cls, triples):
        """Build from (id, weight, kind) triples; kind is 'atom'/'nonatomic'."""
        nodes = []
        for nid, w, kind in triples:
            k = kind if isinstance(kind, NodeKind) else NodeKind(kind)
            nodes.append(MeasureNode(str(nid), float(w), k))
        return cls(tuple(nodes))

    @property
    def total_mass(self):
        return float(sum(n.weight for n in self.nodes))

    @property
    def node_ids(self):
        return [n.id for n in self.nodes]

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise DomainMismatchError(f"unknown node id {node_id!r}")

    def weights(self):
        return np.array([n.weight for n in self.nodes])

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class NodeScalarField:
    """One scalar per node id (l(t), kappa(t), nu(t), ...)."""

    values: dict

    @classmethod
    def constant(cls, space, value):
        return cls({n.id: float(value) for n in space.nodes})

    def value(self, node_id):
        if node_id not in self.values:
            raise DomainMismatchError(f"field missing node {node_id!r}")
        return self.values[node_id]

    def require_nonnegative(self, what="field"):
        for nid, v in self.values.items():
            if v < 0:
                raise MeasureError(f"{what} negative at node {nid!r}")
        return self


def integrate(field, space):
    """Weighted finite sum  sum_i w_i * value_i  over the space's nodes."""
    total = 0.0
    for n in space.nodes:
        total += n.weight * field.value(n.id)
    return total


def partition(space):
    """Split into (atomic part, nonatomic part); either part may be empty.

    An empty part is returned as ``None`` (a MeasureSpace cannot hold zero
    nodes); callers must handle emptiness.
    """
    atoms = tuple(n for n in space.nodes if n.kind is NodeKind.ATOM)
    nonat = tuple(n for n in space.nodes if n.kind is NodeKind.NONATOMIC_SAMPLE)
    part_a = MeasureSpace(atoms) if atoms else None
    part_n = MeasureSpace(nonat) if nonat else None
    return part_a, part_n


def merge(part_a, part_n):
    """Inverse of :func:`partition` (order: atoms then nonatomic samples)."""
    nodes = []
    if part_a is not None:
        nodes.extend(part_a.nodes)
    if part_n is not None:
        nodes.extend(part_n.nodes)
    return MeasureSpace(tuple(nodes))
