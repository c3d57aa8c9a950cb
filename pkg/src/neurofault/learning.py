"""Feedback-driven training: reinforcement/deinforcement of active synapses,
pre-training equilibration, pattern shuffling and convergence detection.

The rule is local in space and time: a weight changes in a cycle only if its
synapse carried signal in that cycle's activation records, and the change is
a fixed proportion of the current value, so signs are preserved and a zeroed
weight stays zero. Which direction the proportion takes is Hebbian: the
binary verdict times the post-neuron's state decides whether a contribution
is reinforced or deinforced, so a failure verdict erodes the configuration
that produced it (wrongly active neurons lose support, wrongly silent ones
gain) while a success verdict entrenches it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import global_error
from .model import Pattern, forward_reference_batch


class ContractViolationError(Exception):
    """A success verdict arrived with empty activation records.

    Success requires the output to match a non-empty target exactly, which
    implies at least one output neuron fired and acknowledged its exciter.
    """


@dataclass
class TrainingConfig:
    eta_reinforce: float = 0.1
    eta_deinforce: float = 0.1
    max_cycles: int = 20000
    shuffle_period: int = 0      # cycles between reshuffles; 0 = never
    equilibration_steps: int = 0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.eta_reinforce < 1.0) or not (0.0 < self.eta_deinforce < 1.0):
            raise ValueError("eta values must lie in (0, 1)")
        if self.max_cycles < 0:
            raise ValueError("max_cycles must be >= 0")
        if self.shuffle_period < 0 or self.equilibration_steps < 0:
            raise ValueError("shuffle_period and equilibration_steps must be >= 0")


@dataclass(frozen=True)
class FeedbackSignal:
    """The master's verdict for one presented pattern: exact match or not."""

    pattern_id: int
    success: bool


@dataclass
class CycleLog:
    cycle: int
    pattern_id: int
    verdict: str
    global_error: float
    weights_changed: int


@dataclass
class TrainingResult:
    converged: bool
    cycles_used: int
    final_error: float
    log: list[CycleLog] = field(default_factory=list)
    weight_snapshots: list = field(default_factory=list)


def apply_update(weights, records, success: bool, eta: float) -> int:
    """Scale every non-faulted active synapse by (1 +/- eta), Hebbian-wise.

    A synapse is reinforced (magnitude grows) when its contribution agrees
    with the verdict: it drives its post-neuron toward the neuron's
    end-of-cycle state and the verdict is success, or away from it and the
    verdict is failure. Otherwise it is deinforced. Signs are preserved and
    a zero weight stays zero. Faulted synapses keep their stored value.
    Returns the number of weights touched.
    """
    ih_i, ih_j, ih_f, ho_j, ho_k, ho_f = records.active_edges()
    reward = 1.0 if success else -1.0
    changed = 0
    for (ii, jj, ff, w, fault) in (
            (ih_i, ih_j, ih_f, weights.w_ih, weights.fault_ih),
            (ho_j, ho_k, ho_f, weights.w_ho, weights.fault_ho)):
        if not ii.size:
            continue
        ok = ~fault[ii, jj]
        ii, jj, ff = ii[ok], jj[ok], ff[ok]
        values = w[ii, jj]
        state = np.where(ff, 1.0, -1.0)
        grow = np.sign(values) * reward * state > 0
        w[ii, jj] = values * np.where(grow, 1.0 + eta, 1.0 - eta)
        changed += int(ii.size)
    return changed


def apply_feedback(weights, records, signal: FeedbackSignal,
                   config: TrainingConfig) -> int:
    """Apply one verdict to the active path; returns weights touched."""
    if signal.success and records.is_empty():
        raise ContractViolationError(
            f"success verdict for pattern {signal.pattern_id} with empty activation records")
    eta = config.eta_reinforce if signal.success else config.eta_deinforce
    return apply_update(weights, records, signal.success, eta)


def shuffle_patterns(patterns: list[Pattern], rng: np.random.Generator) -> list[Pattern]:
    """Uniform random re-ordering; the patterns themselves are untouched."""
    return [patterns[i] for i in rng.permutation(len(patterns))]


def _reference_error(deployment, patterns: list[Pattern]) -> float:
    xs = np.stack([p.x for p in patterns])
    ys = forward_reference_batch(deployment.topology, deployment.weights, xs)
    return global_error([(p.d, y) for p, y in zip(patterns, ys)])


def train(deployment, patterns: list[Pattern], config: TrainingConfig,
          policy=None, fault_plan=None, snapshot_every: int = 0) -> TrainingResult:
    """Run training cycles until every pattern is reproduced exactly.

    One cycle presents one pattern, collects the master's exact-match
    verdict, broadcasts it, and lets the slaves update their active
    synapses. Convergence is declared when a frozen re-evaluation of all
    patterns through the reference forward pass gives global error zero, so
    a converged result always carries its own certificate. Hitting
    max_cycles is reported as converged=False, not raised.
    """
    if not patterns:
        raise ValueError("patterns must be non-empty")
    if fault_plan is not None:
        from .faults import apply_faults, inject
        fault_set = inject(fault_plan, deployment.topology,
                           np.random.default_rng(fault_plan.seed))
        apply_faults(deployment.weights, fault_set)

    rng = np.random.default_rng(config.seed)
    order = list(patterns)
    p = len(order)
    result = TrainingResult(converged=False, cycles_used=0, final_error=float("nan"))

    err = _reference_error(deployment, patterns)
    if err == 0.0:
        return TrainingResult(converged=True, cycles_used=0, final_error=0.0)

    cycle = 0
    while cycle < config.max_cycles:
        if config.shuffle_period > 0 and cycle > 0 and cycle % config.shuffle_period == 0:
            order = shuffle_patterns(order, rng)
        pattern = order[cycle % p]

        outcome = deployment.run_cycle(pattern.x, policy)
        success = bool(np.array_equal(outcome.y, pattern.d))
        signal = FeedbackSignal(pattern_id=pattern.id, success=success)
        if signal.success and outcome.records.is_empty():
            raise ContractViolationError(
                f"success verdict for pattern {pattern.id} with empty activation records")
        changed = _count_updatable(deployment.weights, outcome.records)
        deployment.broadcast_feedback(success,
                                      config.eta_reinforce if success else config.eta_deinforce)
        cycle += 1

        err = _reference_error(deployment, patterns)
        result.log.append(CycleLog(cycle=cycle, pattern_id=pattern.id,
                                   verdict="success" if success else "failure",
                                   global_error=err, weights_changed=changed))
        if snapshot_every > 0 and cycle % snapshot_every == 0:
            result.weight_snapshots.append(deployment.weights.copy())
        if err == 0.0:
            result.converged = True
            break

    result.cycles_used = cycle
    result.final_error = err
    return result


def _count_updatable(weights, records) -> int:
    ih_i, ih_j, _, ho_j, ho_k, _ = records.active_edges()
    count = 0
    if ih_i.size:
        count += int((~weights.fault_ih[ih_i, ih_j]).sum())
    if ho_j.size:
        count += int((~weights.fault_ho[ho_j, ho_k]).sum())
    return count


def equilibrate(deployment, steps: int, seed: int, eta: float = 0.1):
    """Deinforce the active path of ``steps`` random binary inputs.

    This is the pre-training flattening pass: inputs are uniform random
    (each bit Bernoulli(0.5)) and the deinforcement proportion is applied
    regardless of what the output was. Returns the updated weight matrix.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    rng = np.random.default_rng(seed)
    n = deployment.topology.spec.n_input
    for _ in range(steps):
        x = rng.integers(0, 2, size=n).astype(np.uint8)
        deployment.run_cycle(x)
        deployment.broadcast_feedback(False, eta)
    return deployment.weights
