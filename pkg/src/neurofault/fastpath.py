"""Compiled twin of the event engine for the fault-free FIFO channel.

Training and equilibration drive millions of deliveries, so the hot loop is
jitted over flat edge arrays. The kernel replays exactly the FIFO zero-drop
zero-delay discipline of :mod:`neurofault.engine`, with one shortcut: membrane
potential acknowledgements are tallied instead of queued, which cannot change
spike-relevant state because their handler only appends to bookkeeping. The
test suite pins output and acknowledgement equality against the pure engine.

Any non-clean delivery policy (drops, delays, reordering) must go through the
pure engine; this module refuses it.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .engine import (
    BudgetExceededError,
    CycleResult,
    DEFAULT_DELIVERY_BUDGET,
    DeliveryPolicy,
)
from .model import NetworkTopology, WeightMatrix

_PRESENT, _SPIKE, _WARP = 0, 1, 2


@njit(cache=True, inline="always")
def _push(q_kind, q_arg, tail, kind, arg):
    if tail == q_kind.shape[0]:
        nk = np.empty(q_kind.shape[0] * 2, dtype=q_kind.dtype)
        na = np.empty(q_arg.shape[0] * 2, dtype=q_arg.dtype)
        nk[:tail] = q_kind
        na[:tail] = q_arg
        q_kind, q_arg = nk, na
    q_kind[tail] = kind
    q_arg[tail] = arg
    return q_kind, q_arg, tail + 1


@njit(cache=True)
def _run_cycle_fifo(x_set, out_indptr, edge_post, edge_w, threshold,
                    potential, fired, edge_contrib, edge_acked, edge_ack_pot,
                    budget):
    potential[:] = 0.0
    fired[:] = 0
    edge_contrib[:] = 0.0
    edge_acked[:] = 0
    edge_ack_pot[:] = 0.0

    q_kind = np.empty(4096, dtype=np.int8)
    q_arg = np.empty(4096, dtype=np.int64)
    tail = 0
    for i in x_set:
        q_kind, q_arg, tail = _push(q_kind, q_arg, tail, _PRESENT, i)

    head = 0
    deliveries = 0
    while head < tail:
        kind = q_kind[head]
        arg = q_arg[head]
        head += 1
        deliveries += 1
        if deliveries > budget:
            return deliveries, 1

        if kind == _PRESENT:
            fired[arg] = 1
            for e in range(out_indptr[arg], out_indptr[arg + 1]):
                q_kind, q_arg, tail = _push(q_kind, q_arg, tail, _SPIKE, e)

        elif kind == _SPIKE:
            e = arg
            v = edge_post[e]
            w = edge_w[e]
            potential[v] += w
            edge_contrib[e] += w
            if fired[v] == 0:
                edge_acked[e] = 1
                edge_ack_pot[e] = potential[v]
                if potential[v] > threshold:
                    fired[v] = 1
                    for e2 in range(out_indptr[v], out_indptr[v + 1]):
                        q_kind, q_arg, tail = _push(q_kind, q_arg, tail, _SPIKE, e2)
            else:
                if potential[v] > threshold:
                    edge_acked[e] = 1
                    edge_ack_pot[e] = potential[v]
                else:
                    fired[v] = 0
                    for e2 in range(out_indptr[v], out_indptr[v + 1]):
                        q_kind, q_arg, tail = _push(q_kind, q_arg, tail, _WARP, e2)

        else:  # _WARP: retract the source neuron's contribution on this edge
            e = arg
            v = edge_post[e]
            c = edge_contrib[e]
            edge_contrib[e] = 0.0
            potential[v] -= c
            if fired[v] == 1 and potential[v] <= threshold:
                fired[v] = 0
                for e2 in range(out_indptr[v], out_indptr[v + 1]):
                    q_kind, q_arg, tail = _push(q_kind, q_arg, tail, _WARP, e2)
            elif fired[v] == 0 and potential[v] > threshold:
                # losing an inhibitory contribution re-excited the neuron;
                # nothing is credited for a retraction-driven crossing
                fired[v] = 1
                for e2 in range(out_indptr[v], out_indptr[v + 1]):
                    q_kind, q_arg, tail = _push(q_kind, q_arg, tail, _SPIKE, e2)

    return deliveries, 0


class FastActivationRecords:
    """Active-synapse view over the kernel's acknowledgement arrays."""

    def __init__(self, deployment: "FastDeployment", acked_edges: np.ndarray,
                 ack_potentials: np.ndarray, fired: np.ndarray):
        self._d = deployment
        self.acked_edges = acked_edges
        self.ack_potentials = ack_potentials
        self.fired = fired                 # end-of-cycle flags, all neurons

    def is_empty(self) -> bool:
        return self.acked_edges.size == 0

    def active_edges(self):
        d = self._d
        split = np.searchsorted(self.acked_edges, d.n_edges_ih)
        ih = self.acked_edges[:split]
        ho = self.acked_edges[split:]
        n = d.topology.spec.n_input
        base_out = n + d.topology.spec.n_hidden
        return (d.edge_pre[ih], d.edge_post[ih] - n,
                self.fired[d.edge_post[ih]].astype(bool),
                d.edge_pre[ho] - n, d.edge_post[ho] - base_out,
                self.fired[d.edge_post[ho]].astype(bool))

    def active_pairs(self) -> set[tuple[int, int]]:
        d = self._d
        return {(int(d.edge_pre[e]), int(d.edge_post[e])) for e in self.acked_edges}


class FastDeployment:
    """Drop-in stand-in for :class:`engine.Deployment` on a clean channel.

    Output is independent of the slave count under FIFO delivery, so the
    partition is not materialized here; the mapped-processor view of the same
    network lives in the pure engine.
    """

    def __init__(self, topology: NetworkTopology, weights: WeightMatrix,
                 policy: DeliveryPolicy | None = None,
                 budget: int = DEFAULT_DELIVERY_BUDGET):
        self.topology = topology
        self.weights = weights
        self.policy = policy if policy is not None else DeliveryPolicy()
        if not self.policy.is_clean:
            raise ValueError("FastDeployment only runs the fault-free FIFO policy")
        self.budget = budget

        spec = topology.spec
        n, h, m = spec.n_input, spec.n_hidden, spec.n_output
        total = spec.total_neurons
        pairs_ih = topology.synapses_ih()
        pairs_ho = topology.synapses_ho()
        self.n_edges_ih = len(pairs_ih)
        self.n_edges = len(pairs_ih) + len(pairs_ho)

        self.edge_pre = np.concatenate([pairs_ih[:, 0], pairs_ho[:, 0] + n]).astype(np.int64)
        self.edge_post = np.concatenate([pairs_ih[:, 1] + n,
                                         pairs_ho[:, 1] + n + h]).astype(np.int64)
        counts = np.bincount(self.edge_pre, minlength=total)
        self.out_indptr = np.zeros(total + 1, dtype=np.int64)
        np.cumsum(counts, out=self.out_indptr[1:])
        # edge ids are already grouped by pre neuron and sorted by post within
        # each group, matching the pure engine's emission order
        self._ih_idx = (pairs_ih[:, 0].astype(np.intp), pairs_ih[:, 1].astype(np.intp))
        self._ho_idx = (pairs_ho[:, 0].astype(np.intp), pairs_ho[:, 1].astype(np.intp))

        self.edge_w = np.zeros(self.n_edges)
        self._potential = np.zeros(total)
        self._fired = np.zeros(total, dtype=np.uint8)
        self._edge_contrib = np.zeros(self.n_edges)
        self._edge_acked = np.zeros(self.n_edges, dtype=np.uint8)
        self._edge_ack_pot = np.zeros(self.n_edges)
        self._out_slice = slice(n + h, total)
        self._last_records: FastActivationRecords | None = None

    def _refresh_edge_weights(self) -> None:
        self.edge_w[:self.n_edges_ih] = self.weights.effective_ih()[self._ih_idx]
        self.edge_w[self.n_edges_ih:] = self.weights.effective_ho()[self._ho_idx]

    def run_cycle(self, x: np.ndarray, policy: DeliveryPolicy | None = None,
                  collect_trace: bool = False) -> CycleResult:
        if policy is not None and not policy.is_clean:
            raise ValueError("FastDeployment only runs the fault-free FIFO policy")
        if collect_trace:
            raise ValueError("the compiled path does not record traces; "
                             "use engine.Deployment for trace runs")
        x = np.asarray(x)
        if x.shape != (self.topology.spec.n_input,):
            raise ValueError("input length does not match n_input")
        self._refresh_edge_weights()
        x_set = np.nonzero(x)[0].astype(np.int64)
        deliveries, status = _run_cycle_fifo(
            x_set, self.out_indptr, self.edge_post, self.edge_w,
            float(self.topology.spec.threshold),
            self._potential, self._fired, self._edge_contrib,
            self._edge_acked, self._edge_ack_pot, self.budget)
        if status != 0:
            raise BudgetExceededError(self.budget)
        acked = np.nonzero(self._edge_acked)[0]
        records = FastActivationRecords(self, acked, self._edge_ack_pot[acked].copy(),
                                        self._fired.copy())
        self._last_records = records
        return CycleResult(y=self._fired[self._out_slice].copy(),
                           records=records, deliveries=int(deliveries), trace=None)

    def read_output(self) -> np.ndarray:
        return self._fired[self._out_slice].copy()

    def broadcast_feedback(self, success: bool, eta: float) -> None:
        from .learning import apply_update
        if self._last_records is None:
            return
        apply_update(self.weights, self._last_records, success, eta)

    @property
    def supports_trace(self) -> bool:
        return False


def make_deployment(topology: NetworkTopology, weights: WeightMatrix,
                    n_slaves: int = 1, policy: DeliveryPolicy | None = None,
                    budget: int = DEFAULT_DELIVERY_BUDGET):
    """Pick the compiled path for clean channels, the pure engine otherwise."""
    from .engine import Deployment
    pol = policy if policy is not None else DeliveryPolicy()
    if pol.is_clean:
        return FastDeployment(topology, weights, policy=pol, budget=budget)
    return Deployment(topology, weights, n_slaves, policy=pol, budget=budget)
