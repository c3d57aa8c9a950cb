"""Discrete-event simulation of the distributed network.

One virtual master and a set of virtual slave processors communicate only by
messages; there is no shared memory between processors. Each slave hosts a
subset of neurons and reacts to deliveries with the spike-protocol state
machine; the scheduler owns delivery order, random delays and drops, so every
communication fault is a property of the channel, not of the processors.

The whole simulation is sequential and deterministic for a fixed
(topology, weights, policy, seed) tuple.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .model import NetworkTopology, WeightMatrix

MASTER_ID = -1
DEFAULT_DELIVERY_BUDGET = 10**6

SPIKE = "spike"
POTENTIAL_UPDATE = "potential_update"
WARP_BACK = "warp_back"
FEEDBACK = "feedback"
CONTROL = "control"

# kinds subject to the delivery policy; feedback/control ride a reliable channel
DATA_KINDS = frozenset((SPIKE, POTENTIAL_UPDATE, WARP_BACK))


class SimulationError(Exception):
    pass


class ProtocolError(SimulationError):
    """A message referenced a neuron its destination does not host or know.

    This indicates a mapping bug in the simulation itself, never a modeled
    hardware fault, so the simulation aborts instead of degrading.
    """


class BudgetExceededError(SimulationError):
    def __init__(self, budget: int):
        super().__init__(f"delivery budget of {budget} deliveries per cycle exceeded")
        self.budget = budget


@dataclass(frozen=True)
class Message:
    kind: str
    src: int          # processor id (MASTER_ID for the master)
    dst: int
    payload: tuple

    def payload_text(self) -> str:
        out = []
        for item in self.payload:
            out.append(f"{item:.17g}" if isinstance(item, float) else str(item))
        return " ".join(out)


@dataclass
class DeliveryPolicy:
    """Channel behaviour. FIFO order with zero drop and delay is the
    fault-free baseline; anything else models communication faults."""

    order: str = "fifo"               # "fifo" | "random"
    drop_probability: float = 0.0     # per data message; 1.0 = total loss
    delay: int = 0                    # max random displacement in event ticks
    seed: int = 0

    def __post_init__(self):
        if self.order not in ("fifo", "random"):
            raise ValueError(f"unknown delivery order {self.order!r}")
        if not (0.0 <= self.drop_probability <= 1.0):
            raise ValueError("drop_probability must be in [0, 1]")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")

    @property
    def is_clean(self) -> bool:
        return self.order == "fifo" and self.drop_probability == 0.0 and self.delay == 0


@dataclass(frozen=True)
class TraceEntry:
    tick: int
    event: str        # "deliver" | "drop"
    message: Message


class EventScheduler:
    """Pending-message store with decentralized-time bookkeeping.

    The tick counts deliveries performed. A message emitted at tick t becomes
    deliverable at t + 1 plus a random displacement of up to ``delay`` ticks;
    within a tick, FIFO order replays emission order while "random" order
    draws a fresh permutation. Drops happen at emission and are recorded, so
    every emitted message is either delivered once or dropped once.
    """

    def __init__(self, policy: DeliveryPolicy, collect_trace: bool = False):
        self.policy = policy
        self.rng = np.random.default_rng(policy.seed)
        self._heap: list = []
        self._seq = 0
        self.tick = 0
        self.collect_trace = collect_trace
        self.trace: list[TraceEntry] = []
        self.emitted = 0
        self.delivered = 0
        self.dropped = 0

    def emit(self, msg: Message) -> None:
        self.emitted += 1
        pol = self.policy
        if msg.kind in DATA_KINDS:
            if pol.drop_probability > 0.0 and self.rng.random() < pol.drop_probability:
                self.dropped += 1
                if self.collect_trace:
                    self.trace.append(TraceEntry(self.tick, "drop", msg))
                return
            delay = int(self.rng.integers(0, pol.delay + 1)) if pol.delay > 0 else 0
            subkey = int(self.rng.integers(0, 2**62)) if pol.order == "random" else 0
        else:
            delay, subkey = 0, 0
        heapq.heappush(self._heap, (self.tick + 1 + delay, subkey, self._seq, msg))
        self._seq += 1

    def pop(self) -> Message:
        _, _, _, msg = heapq.heappop(self._heap)
        self.tick += 1
        self.delivered += 1
        if self.collect_trace:
            self.trace.append(TraceEntry(self.tick, "deliver", msg))
        return msg

    def __bool__(self) -> bool:
        return bool(self._heap)


def dump_trace(trace: list[TraceEntry], fileobj) -> None:
    """Write delivered messages one per line: ``tick kind src dst payload...``."""
    for entry in trace:
        if entry.event != "deliver":
            continue
        m = entry.message
        fileobj.write(f"{entry.tick} {m.kind} {m.src} {m.dst} {m.payload_text()}\n")


class ActivationRecords:
    """Per-cycle bookkeeping gathered from all processors.

    activated maps a pre-synaptic neuron to the (post-synaptic neuron,
    membrane potential) pairs it was informed about; activated_by maps a
    neuron to the pre-synaptic neurons credited with its excitation. acked
    is the post-side mirror of every acknowledgement sent (it covers
    sub-threshold acknowledgements too) and, together with the end-of-cycle
    firing flags, carries everything the learning rule needs.
    """

    def __init__(self, topology: NetworkTopology):
        self.topology = topology
        self.activated: dict[int, list[tuple[int, float]]] = {}
        self.activated_by: dict[int, list[int]] = {}
        self.acked: dict[int, set[int]] = {}        # post -> pres that carried signal
        self.fired: dict[int, bool] = {}            # end-of-cycle firing state

    def is_empty(self) -> bool:
        return not self.acked

    def active_pairs(self) -> set[tuple[int, int]]:
        pairs: set[tuple[int, int]] = set()
        for post, pres in self.acked.items():
            for pre in pres:
                pairs.add((pre, post))
        return pairs

    def active_edges(self):
        """Active synapses as layer-local index arrays plus the end-of-cycle
        firing flag of each synapse's post-neuron:
        (ih_i, ih_j, ih_fired, ho_j, ho_k, ho_fired)."""
        n = self.topology.spec.n_input
        base_out = n + self.topology.spec.n_hidden
        ih_i, ih_j, ih_f, ho_j, ho_k, ho_f = [], [], [], [], [], []
        for post, pres in self.acked.items():
            fired = self.fired.get(post, False)
            for pre in pres:
                if pre < n:
                    ih_i.append(pre)
                    ih_j.append(post - n)
                    ih_f.append(fired)
                else:
                    ho_j.append(pre - n)
                    ho_k.append(post - base_out)
                    ho_f.append(fired)
        return (np.asarray(ih_i, dtype=np.intp), np.asarray(ih_j, dtype=np.intp),
                np.asarray(ih_f, dtype=bool),
                np.asarray(ho_j, dtype=np.intp), np.asarray(ho_k, dtype=np.intp),
                np.asarray(ho_f, dtype=bool))


class SlaveProcessor:
    """Hosts a subset of neurons and runs the spike-protocol state machine.

    A slave never inspects another processor's state; everything it knows
    about the rest of the network is its fixed outgoing target table and the
    messages it receives. It does not know which layers its neurons belong
    to: presentation spikes are recognized by their master origin, not by a
    stored layer role.
    """

    def __init__(self, proc_id: int, hosted: list[int], topology: NetworkTopology,
                 weights: WeightMatrix, host_of):
        self.id = proc_id
        self.hosted = list(hosted)
        self._hosted_set = set(hosted)
        self.topology = topology
        self.weights = weights
        n, h = topology.spec.n_input, topology.spec.n_hidden

        # outgoing target table, fixed at mapping time, sorted for determinism
        self.targets: dict[int, list[tuple[int, int]]] = {}
        for g in self.hosted:
            if g < n:
                posts = np.nonzero(topology.adj_ih[g])[0] + n
            elif g < n + h:
                posts = np.nonzero(topology.adj_ho[g - n])[0] + n + h
            else:
                posts = np.empty(0, dtype=int)
            self.targets[g] = [(int(p), host_of(int(p))) for p in posts]

        self.host_of = host_of
        self.potential: dict[int, float] = {}
        self.fired: dict[int, bool] = {}
        self.contrib: dict[int, dict[int, float]] = {}
        self.activated: dict[int, list[tuple[int, float]]] = {}
        self.activated_by: dict[int, list[int]] = {}
        self.acked_in: dict[int, set[int]] = {}

    def reset_cycle(self) -> None:
        self.potential = {g: 0.0 for g in self.hosted}
        self.fired = {g: False for g in self.hosted}
        self.contrib = {g: {} for g in self.hosted}
        self.activated = {}
        self.activated_by = {}
        self.acked_in = {}

    def _effective_weight(self, pre: int, post: int) -> float:
        spec = self.topology.spec
        n, h = spec.n_input, spec.n_hidden
        if pre < n and n <= post < n + h:
            i, j = pre, post - n
            if not self.topology.adj_ih[i, j]:
                raise ProtocolError(f"no synapse {pre}->{post}")
            if self.weights.fault_ih[i, j]:
                return 0.0
            return float(self.weights.w_ih[i, j])
        if n <= pre < n + h and post >= n + h:
            j, k = pre - n, post - n - h
            if not self.topology.adj_ho[j, k]:
                raise ProtocolError(f"no synapse {pre}->{post}")
            if self.weights.fault_ho[j, k]:
                return 0.0
            return float(self.weights.w_ho[j, k])
        raise ProtocolError(f"spike over impossible edge {pre}->{post}")

    def _emit_to_targets(self, kind: str, src_neuron: int) -> list[Message]:
        return [Message(kind, self.id, host, (src_neuron, tgt))
                for tgt, host in self.targets[src_neuron]]

    def deliver(self, msg: Message) -> list[Message]:
        """React to one delivery; returns the emitted messages."""
        if msg.kind == SPIKE:
            return self._on_spike(msg)
        if msg.kind == POTENTIAL_UPDATE:
            post, pre, pot = msg.payload
            if pre not in self._hosted_set:
                raise ProtocolError(f"potential update for non-hosted neuron {pre}")
            self.activated.setdefault(pre, []).append((post, pot))
            return []
        if msg.kind == WARP_BACK:
            return self._on_warp_back(msg)
        if msg.kind == FEEDBACK:
            self._on_feedback(msg)
            return []
        if msg.kind == CONTROL:
            if msg.payload and msg.payload[0] == "reset":
                self.reset_cycle()
            return []
        raise ProtocolError(f"unknown message kind {msg.kind!r}")

    def _on_spike(self, msg: Message) -> list[Message]:
        pre, post = msg.payload
        if post not in self._hosted_set:
            raise ProtocolError(f"spike for non-hosted neuron {post}")

        if msg.src == MASTER_ID:
            # input presentation: no threshold, the neuron only fans out
            self.fired[post] = True
            return self._emit_to_targets(SPIKE, post)

        th = self.topology.spec.threshold
        w = self._effective_weight(pre, post)
        self.potential[post] += w
        self.contrib[post][pre] = self.contrib[post].get(pre, 0.0) + w

        if not self.fired[post]:
            self.acked_in.setdefault(post, set()).add(pre)
            if self.potential[post] > th:
                # excitation condition met: spike onward, credit the cause
                self.fired[post] = True
                self.activated_by.setdefault(post, []).append(pre)
                out = self._emit_to_targets(SPIKE, post)
                out.append(Message(POTENTIAL_UPDATE, self.id, self.host_of(pre),
                                   (post, pre, self.potential[post])))
                return out
            # excitation condition not met: still report the altered potential
            return [Message(POTENTIAL_UPDATE, self.id, self.host_of(pre),
                            (post, pre, self.potential[post]))]

        if self.potential[post] > th:
            # already excited: acknowledge the altered membrane potential
            self.acked_in.setdefault(post, set()).add(pre)
            self.activated_by.setdefault(post, []).append(pre)
            return [Message(POTENTIAL_UPDATE, self.id, self.host_of(pre),
                            (post, pre, self.potential[post]))]

        # inhibitory contribution undid the excitation: retract downstream
        self.fired[post] = False
        return self._emit_to_targets(WARP_BACK, post)

    def _on_warp_back(self, msg: Message) -> list[Message]:
        pre, post = msg.payload
        if post not in self._hosted_set:
            raise ProtocolError(f"warp back for non-hosted neuron {post}")
        th = self.topology.spec.threshold
        retracted = self.contrib[post].pop(pre, 0.0)
        self.potential[post] -= retracted
        if self.fired[post] and self.potential[post] <= th:
            self.fired[post] = False
            return self._emit_to_targets(WARP_BACK, post)
        if not self.fired[post] and self.potential[post] > th:
            # retraction of an inhibitory contribution re-excited the neuron;
            # no pre-synaptic spike caused it, so nothing is credited
            self.fired[post] = True
            return self._emit_to_targets(SPIKE, post)
        return []

    def _on_feedback(self, msg: Message) -> None:
        """Apply the proportional Hebbian rule to hosted incoming synapses.

        Each slave only touches weights of synapses terminating at its own
        neurons, using its local acknowledgement records and firing flags. A
        synapse whose contribution agrees with the verdict (it drives the
        neuron toward its current state and the verdict is success, or away
        and the verdict is failure) has its magnitude reinforced; otherwise
        it is deinforced. Faulted synapses keep their stored value (their
        effective value is pinned to zero anyway).
        """
        verdict, eta = msg.payload
        reward = 1.0 if verdict == "success" else -1.0
        spec = self.topology.spec
        n, h = spec.n_input, spec.n_hidden
        for post, pres in self.acked_in.items():
            state = 1.0 if self.fired[post] else -1.0
            for pre in pres:
                if pre < n:
                    i, j = pre, post - n
                    if self.weights.fault_ih[i, j]:
                        continue
                    w = self.weights.w_ih[i, j]
                    grow = np.sign(w) * reward * state > 0
                    self.weights.w_ih[i, j] = w * (1.0 + eta if grow else 1.0 - eta)
                else:
                    j, k = pre - n, post - n - h
                    if self.weights.fault_ho[j, k]:
                        continue
                    w = self.weights.w_ho[j, k]
                    grow = np.sign(w) * reward * state > 0
                    self.weights.w_ho[j, k] = w * (1.0 + eta if grow else 1.0 - eta)


class MasterState:
    """The environment-facing processor.

    It knows only which processors host the input and output neurons; it
    presents inputs as spike messages and reads output firing flags back at
    the end of a cycle.
    """

    def __init__(self, topology: NetworkTopology, host_of):
        self.id = MASTER_ID
        self.topology = topology
        self.input_hosts = {int(g): host_of(int(g)) for g in topology.input_ids()}
        self.output_hosts = {int(g): host_of(int(g)) for g in topology.output_ids()}

    def present_input(self, x: np.ndarray) -> list[Message]:
        x = np.asarray(x)
        if x.shape != (self.topology.spec.n_input,):
            raise ValueError(f"input length {x.shape} does not match "
                             f"n_input={self.topology.spec.n_input}")
        msgs = []
        for i in np.nonzero(x)[0]:
            g = int(i)
            msgs.append(Message(SPIKE, MASTER_ID, self.input_hosts[g], (g, g)))
        return msgs


@dataclass
class CycleResult:
    y: np.ndarray
    records: ActivationRecords
    deliveries: int
    trace: list[TraceEntry] | None = None


class Deployment:
    """A mapped network: master, slaves and the delivery channel between them."""

    def __init__(self, topology: NetworkTopology, weights: WeightMatrix,
                 n_slaves: int, policy: DeliveryPolicy | None = None,
                 budget: int = DEFAULT_DELIVERY_BUDGET):
        total = topology.spec.total_neurons
        if n_slaves < 1:
            raise ValueError("need at least one slave processor")
        if n_slaves > total:
            raise ValueError(f"{n_slaves} slaves for {total} neurons: "
                             "every slave must host at least one neuron")
        self.topology = topology
        self.weights = weights
        self.n_slaves = n_slaves
        self.budget = budget
        host_of = lambda g: g % n_slaves
        self.slaves = [SlaveProcessor(s, [g for g in range(total) if g % n_slaves == s],
                                      topology, weights, host_of)
                       for s in range(n_slaves)]
        self.master = MasterState(topology, host_of)
        self.policy = policy if policy is not None else DeliveryPolicy()
        self.scheduler = EventScheduler(self.policy)

    def bind_policy(self, policy: DeliveryPolicy, collect_trace: bool = False) -> None:
        self.policy = policy
        self.scheduler = EventScheduler(policy, collect_trace=collect_trace)

    def _drain(self) -> int:
        count = 0
        sched = self.scheduler
        while sched:
            msg = sched.pop()
            count += 1
            if count > self.budget:
                raise BudgetExceededError(self.budget)
            for reaction in self.slaves[msg.dst].deliver(msg):
                sched.emit(reaction)
        return count

    def run_cycle(self, x: np.ndarray, policy: DeliveryPolicy | None = None,
                  collect_trace: bool = False) -> CycleResult:
        """Present ``x``, drain the channel to quiescence, read the output.

        Quiescence always arrives because the graph is acyclic and every
        retraction is bounded by a prior excitation; the delivery budget
        only guards against pathological configured delays.
        """
        if policy is not None and policy is not self.policy:
            self.bind_policy(policy, collect_trace=collect_trace)
        sched = self.scheduler
        sched.collect_trace = collect_trace
        if collect_trace:
            sched.trace = []

        for slave in self.slaves:
            sched.emit(Message(CONTROL, MASTER_ID, slave.id, ("reset",)))
        deliveries = self._drain()
        for msg in self.master.present_input(x):
            sched.emit(msg)
        deliveries += self._drain()

        return CycleResult(y=self.read_output(), records=self.gather_records(),
                           deliveries=deliveries,
                           trace=sched.trace if collect_trace else None)

    def read_output(self) -> np.ndarray:
        out_ids = self.topology.output_ids()
        y = np.zeros(len(out_ids), dtype=np.uint8)
        for idx, g in enumerate(out_ids):
            host = self.master.output_hosts[int(g)]
            y[idx] = 1 if self.slaves[host].fired.get(int(g), False) else 0
        return y

    def gather_records(self) -> ActivationRecords:
        records = ActivationRecords(self.topology)
        for slave in self.slaves:
            for pre, posts in slave.activated.items():
                records.activated.setdefault(pre, []).extend(posts)
            for post, pres in slave.activated_by.items():
                records.activated_by.setdefault(post, []).extend(pres)
            for post, pres in slave.acked_in.items():
                records.acked.setdefault(post, set()).update(pres)
                records.fired[post] = slave.fired[post]
        return records

    def broadcast_feedback(self, success: bool, eta: float) -> None:
        """Send the master's verdict to every slave over the reliable channel."""
        verdict = "success" if success else "failure"
        for slave in self.slaves:
            self.scheduler.emit(Message(FEEDBACK, MASTER_ID, slave.id, (verdict, eta)))
        self._drain()

    @property
    def supports_trace(self) -> bool:
        return True


# -- spec-shaped module-level operations ----------------------------------------


def map_network(topology: NetworkTopology, weights: WeightMatrix,
                n_slaves: int, policy: DeliveryPolicy | None = None) -> Deployment:
    """Partition neurons round-robin over ``n_slaves`` virtual processors."""
    return Deployment(topology, weights, n_slaves, policy=policy)


def present_input(deployment: Deployment, x: np.ndarray) -> list[Message]:
    return deployment.master.present_input(x)


def deliver(processor: SlaveProcessor, message: Message) -> list[Message]:
    if message.dst != processor.id:
        raise ProtocolError(f"message for processor {message.dst} "
                            f"delivered to {processor.id}")
    return processor.deliver(message)


def run_cycle(deployment: Deployment, x: np.ndarray,
              policy: DeliveryPolicy | None = None,
              collect_trace: bool = False) -> CycleResult:
    return deployment.run_cycle(x, policy=policy, collect_trace=collect_trace)
