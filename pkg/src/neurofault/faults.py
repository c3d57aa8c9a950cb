"""Stuck-at-zero fault taxonomy and probabilistic injection.

Two permanent fault kinds are modeled: a single synapse stuck at zero (the
open-circuit "loss of weight" fault) and a dead node, which is exactly the
set of all its incident synapses stuck at zero. Faults mask the effective
weight; the stored value survives for post-mortem analysis. Communication
faults (drops, delays, reordering) are channel properties and live in
:class:`neurofault.engine.DeliveryPolicy`, not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import NetworkTopology, WeightMatrix

LEARNING, OPERATION = "learning", "operation"


@dataclass(frozen=True)
class Fault:
    kind: str                 # "synapse" | "node"
    layer: str | None = None  # "IH" | "HO" for synapse faults
    i: int = -1               # synapse source index, or node neuron id
    j: int = -1               # synapse destination index; -1 for node faults

    @staticmethod
    def synapse(layer: str, i: int, j: int) -> "Fault":
        return Fault(kind="synapse", layer=layer, i=i, j=j)

    @staticmethod
    def node(neuron_id: int) -> "Fault":
        return Fault(kind="node", layer=None, i=neuron_id, j=-1)


@dataclass(frozen=True)
class FaultPlan:
    """What to break, when, and how much (fractions in percent)."""

    phase: str = OPERATION
    node_fraction: float = 0.0
    synapse_fraction: float = 0.0
    seed: int = 0
    include_inputs: bool = False   # input neurons are spared by default

    def __post_init__(self):
        if self.phase not in (LEARNING, OPERATION):
            raise ValueError(f"unknown phase {self.phase!r}")
        for frac in (self.node_fraction, self.synapse_fraction):
            if not (0.0 <= frac < 100.0):
                raise ValueError(f"fault fraction must be in [0, 100), got {frac}")


@dataclass
class FaultSet:
    dead_nodes: list[int] = field(default_factory=list)
    stuck_synapses: list[tuple[str, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.dead_nodes) + len(self.stuck_synapses)

    def csv_rows(self) -> list[str]:
        rows = [f"node,{g},-1" for g in self.dead_nodes]
        rows += [f"synapse_{layer.lower()},{i},{j}" for layer, i, j in self.stuck_synapses]
        return rows


def victim_count(fraction: float, population: int) -> int:
    """Number of victims implied by a percent fraction of a population.

    Rounded up, so any non-zero fraction hurts at least one victim; tiny
    float excess from the percent arithmetic is squashed first.
    """
    if population <= 0:
        raise ValueError("population must be positive")
    count = math.ceil(round(fraction / 100.0 * population, 9))
    if count > population:
        raise ValueError(f"fraction {fraction}% implies {count} victims "
                         f"out of a population of {population}")
    return count


def node_population(topology: NetworkTopology, include_inputs: bool = False) -> np.ndarray:
    """Global ids of neurons eligible to die under a fault plan."""
    ids = [topology.hidden_ids(), topology.output_ids()]
    if include_inputs:
        ids.insert(0, topology.input_ids())
    return np.concatenate(ids)


def inject(plan: FaultPlan, topology: NetworkTopology,
           rng: np.random.Generator) -> FaultSet:
    """Sample victims uniformly without replacement, deterministically.

    Victims are a prefix of one full shuffled candidate list per kind, so
    sweeping the fraction upward with the same seed always yields a superset
    fault set (nested prefix sampling): degradation curves become monotone
    in expectation and levels stay comparable pairwise.
    """
    fault_set = FaultSet()

    nodes = node_population(topology, plan.include_inputs)
    node_order = nodes[rng.permutation(len(nodes))]
    n_dead = victim_count(plan.node_fraction, len(nodes))
    fault_set.dead_nodes = [int(g) for g in node_order[:n_dead]]

    pairs_ih = topology.synapses_ih()
    pairs_ho = topology.synapses_ho()
    total_synapses = len(pairs_ih) + len(pairs_ho)
    syn_order = rng.permutation(total_synapses)
    n_stuck = victim_count(plan.synapse_fraction, total_synapses)
    for idx in syn_order[:n_stuck]:
        if idx < len(pairs_ih):
            i, j = pairs_ih[idx]
            fault_set.stuck_synapses.append(("IH", int(i), int(j)))
        else:
            i, j = pairs_ho[idx - len(pairs_ih)]
            fault_set.stuck_synapses.append(("HO", int(i), int(j)))
    return fault_set


def incident_synapses(topology: NetworkTopology, neuron_id: int) -> list[tuple[str, int, int]]:
    """All realized synapses touching a neuron (its death zeroes exactly these)."""
    spec = topology.spec
    n, h = spec.n_input, spec.n_hidden
    if not (0 <= neuron_id < spec.total_neurons):
        raise ValueError(f"neuron id {neuron_id} out of range")
    out: list[tuple[str, int, int]] = []
    if neuron_id < n:
        for j in np.nonzero(topology.adj_ih[neuron_id])[0]:
            out.append(("IH", neuron_id, int(j)))
    elif neuron_id < n + h:
        j = neuron_id - n
        for i in np.nonzero(topology.adj_ih[:, j])[0]:
            out.append(("IH", int(i), j))
        for k in np.nonzero(topology.adj_ho[j])[0]:
            out.append(("HO", j, int(k)))
    else:
        k = neuron_id - n - h
        for j in np.nonzero(topology.adj_ho[:, k])[0]:
            out.append(("HO", int(j), k))
    return out


def apply_faults(weights: WeightMatrix, fault_set: FaultSet) -> WeightMatrix:
    """Mark the fault set on the weight matrix's masks (idempotent).

    Effective weights of the victims read as exactly zero afterwards; stored
    values are untouched. Unknown victims raise.
    """
    topology = weights.topology
    for g in fault_set.dead_nodes:
        for layer, i, j in incident_synapses(topology, g):
            _mask(weights, layer, i, j)
    for layer, i, j in fault_set.stuck_synapses:
        adj = topology.adj_ih if layer == "IH" else topology.adj_ho
        if not (0 <= i < adj.shape[0] and 0 <= j < adj.shape[1]) or not adj[i, j]:
            raise ValueError(f"no realized {layer} synapse ({i}, {j})")
        _mask(weights, layer, i, j)
    return weights


def _mask(weights: WeightMatrix, layer: str, i: int, j: int) -> None:
    if layer == "IH":
        weights.fault_ih[i, j] = True
    else:
        weights.fault_ho[i, j] = True
