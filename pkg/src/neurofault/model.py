"""Static network definition: topology, weights, binary patterns, and the
layer-synchronous reference forward pass.

The reference pass is the correctness oracle for the event-driven engine:
both must produce identical outputs on a fault-free channel, so every
behavioural question about the engine can be settled against this module.

Neurons carry global ids: inputs occupy ``[0, n)``, hidden neurons
``[n, n + n_hidden)`` and outputs ``[n + n_hidden, n + n_hidden + m)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHT_FILE_MAGIC = "neurofault-weights"
WEIGHT_FILE_VERSION = "v1"

INPUT, HIDDEN, OUTPUT = "input", "hidden", "output"


@dataclass(frozen=True)
class NetworkSpec:
    """Parameters that fully determine a network build.

    connectivity is the fraction of possible inter-layer synapses that is
    realized (Bernoulli-sampled per candidate edge). threshold is a single
    global activation threshold shared by hidden and output neurons; input
    neurons have none, they only fan the binary input out. weight_sigma is
    the standard deviation of the zero-mean Gaussian initial weights.
    """

    n_input: int
    n_hidden: int
    n_output: int
    connectivity: float = 0.9
    threshold: float = 0.5
    init_seed: int = 0
    weight_sigma: float = 1.0

    def __post_init__(self):
        if self.n_input < 1 or self.n_hidden < 1 or self.n_output < 1:
            raise ValueError("layer sizes must all be >= 1")
        if not (0.0 < self.connectivity <= 1.0):
            raise ValueError(f"connectivity must be in (0, 1], got {self.connectivity}")
        if self.weight_sigma <= 0.0:
            raise ValueError("weight_sigma must be positive")

    @property
    def total_neurons(self) -> int:
        return self.n_input + self.n_hidden + self.n_output


class NetworkTopology:
    """Realized synapse structure of a three-layer feed-forward network.

    Only input->hidden and hidden->output edges exist; there are no
    intra-layer, skip-layer or backward connections. Adjacency is stored as
    boolean masks (``adj_ih`` of shape (n, n_hidden), ``adj_ho`` of shape
    (n_hidden, m)).
    """

    def __init__(self, spec: NetworkSpec, adj_ih: np.ndarray, adj_ho: np.ndarray):
        expect_ih = (spec.n_input, spec.n_hidden)
        expect_ho = (spec.n_hidden, spec.n_output)
        if adj_ih.shape != expect_ih or adj_ho.shape != expect_ho:
            raise ValueError("adjacency shape does not match the spec")
        self.spec = spec
        self.adj_ih = adj_ih.astype(bool)
        self.adj_ho = adj_ho.astype(bool)

    # -- global neuron id helpers -------------------------------------------------
    def input_ids(self) -> np.ndarray:
        return np.arange(self.spec.n_input)

    def hidden_ids(self) -> np.ndarray:
        n = self.spec.n_input
        return np.arange(n, n + self.spec.n_hidden)

    def output_ids(self) -> np.ndarray:
        base = self.spec.n_input + self.spec.n_hidden
        return np.arange(base, base + self.spec.n_output)

    def layer_of(self, neuron_id: int) -> str:
        n, h = self.spec.n_input, self.spec.n_hidden
        if 0 <= neuron_id < n:
            return INPUT
        if n <= neuron_id < n + h:
            return HIDDEN
        if n + h <= neuron_id < self.spec.total_neurons:
            return OUTPUT
        raise ValueError(f"neuron id {neuron_id} out of range")

    @property
    def synapse_count_ih(self) -> int:
        return int(self.adj_ih.sum())

    @property
    def synapse_count_ho(self) -> int:
        return int(self.adj_ho.sum())

    @property
    def synapse_count(self) -> int:
        return self.synapse_count_ih + self.synapse_count_ho

    def synapses_ih(self) -> np.ndarray:
        """Realized (input, hidden) index pairs, ordered by (input, hidden)."""
        return np.argwhere(self.adj_ih)

    def synapses_ho(self) -> np.ndarray:
        """Realized (hidden, output) index pairs, ordered by (hidden, output)."""
        return np.argwhere(self.adj_ho)


class WeightMatrix:
    """Weights of all realized synapses plus a stuck-at-zero fault mask.

    ``w_ih``/``w_ho`` hold the stored values; a True entry in the matching
    fault mask forces the *effective* value to zero while leaving the stored
    value intact for post-mortem inspection. Entries of non-realized synapses
    are kept at zero and are never read.
    """

    def __init__(self, topology: NetworkTopology, w_ih: np.ndarray, w_ho: np.ndarray):
        self.topology = topology
        self.w_ih = np.asarray(w_ih, dtype=np.float64)
        self.w_ho = np.asarray(w_ho, dtype=np.float64)
        if self.w_ih.shape != topology.adj_ih.shape or self.w_ho.shape != topology.adj_ho.shape:
            raise ValueError("weight shape does not match the topology")
        self.fault_ih = np.zeros_like(topology.adj_ih, dtype=bool)
        self.fault_ho = np.zeros_like(topology.adj_ho, dtype=bool)

    def effective_ih(self) -> np.ndarray:
        return np.where(self.topology.adj_ih & ~self.fault_ih, self.w_ih, 0.0)

    def effective_ho(self) -> np.ndarray:
        return np.where(self.topology.adj_ho & ~self.fault_ho, self.w_ho, 0.0)

    def realized_ih(self) -> np.ndarray:
        """Stored values of realized input->hidden synapses (1-D)."""
        return self.w_ih[self.topology.adj_ih]

    def realized_ho(self) -> np.ndarray:
        """Stored values of realized hidden->output synapses (1-D)."""
        return self.w_ho[self.topology.adj_ho]

    def copy(self) -> "WeightMatrix":
        dup = WeightMatrix(self.topology, self.w_ih.copy(), self.w_ho.copy())
        dup.fault_ih = self.fault_ih.copy()
        dup.fault_ho = self.fault_ho.copy()
        return dup


@dataclass
class Pattern:
    """One binary training pair: input vector x, desired output vector d."""

    x: np.ndarray
    d: np.ndarray
    id: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.uint8)
        self.d = np.asarray(self.d, dtype=np.uint8)
        if not np.isin(self.x, (0, 1)).all() or not np.isin(self.d, (0, 1)).all():
            raise ValueError("pattern entries must be binary")


def build_network(spec: NetworkSpec) -> tuple[NetworkTopology, WeightMatrix]:
    """Sample a topology and its initial Gaussian weights from the spec seed.

    Adjacency is an independent Bernoulli(connectivity) draw per candidate
    inter-layer edge; weights are i.i.d. N(0, weight_sigma^2) on realized
    synapses. The draw order (adjacency IH, adjacency HO, weights IH,
    weights HO) is fixed, so a given seed always yields a bit-identical
    network.
    """
    rng = np.random.default_rng(spec.init_seed)
    adj_ih = rng.random((spec.n_input, spec.n_hidden)) < spec.connectivity
    adj_ho = rng.random((spec.n_hidden, spec.n_output)) < spec.connectivity
    w_ih = rng.normal(0.0, spec.weight_sigma, size=adj_ih.shape)
    w_ho = rng.normal(0.0, spec.weight_sigma, size=adj_ho.shape)
    w_ih[~adj_ih] = 0.0
    w_ho[~adj_ho] = 0.0
    topology = NetworkTopology(spec, adj_ih, adj_ho)
    return topology, WeightMatrix(topology, w_ih, w_ho)


def forward_reference(topology: NetworkTopology, weights: WeightMatrix,
                      x: np.ndarray) -> np.ndarray:
    """Layer-synchronous forward pass; the engine's correctness oracle.

    The input layer copies ``x`` unchanged (fan-out only). A hidden or output
    neuron fires iff its summed weighted input strictly exceeds the
    threshold. Returns the output firing bits as a uint8 vector.
    """
    x = np.asarray(x)
    if x.shape != (topology.spec.n_input,):
        raise ValueError(f"input length {x.shape} does not match n_input={topology.spec.n_input}")
    th = topology.spec.threshold
    h = (x.astype(np.float64) @ weights.effective_ih()) > th
    y = (h.astype(np.float64) @ weights.effective_ho()) > th
    return y.astype(np.uint8)


def forward_reference_batch(topology: NetworkTopology, weights: WeightMatrix,
                            xs: np.ndarray) -> np.ndarray:
    """Vectorized forward_reference over a (p, n) batch of binary inputs."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != topology.spec.n_input:
        raise ValueError("batch shape must be (p, n_input)")
    th = topology.spec.threshold
    h = (xs @ weights.effective_ih()) > th
    y = (h.astype(np.float64) @ weights.effective_ho()) > th
    return y.astype(np.uint8)


def make_patterns(spec: NetworkSpec, count: int, rng: np.random.Generator,
                  bits_in: int = 0, bits_out: int = 0) -> list[Pattern]:
    """Draw ``count`` training pairs with distinct inputs and non-empty targets.

    bits_in / bits_out fix how many bits are set per input/target vector;
    zero picks a default (roughly a third of the input width, one target
    bit). Distinct inputs keep the task well-posed: duplicate inputs with
    different targets could never all be memorized.
    """
    n, m = spec.n_input, spec.n_output
    if bits_in <= 0:
        bits_in = max(1, n // 3)
    if bits_out <= 0:
        bits_out = 1
    if bits_in > n or bits_out > m:
        raise ValueError("bits per pattern exceed layer width")
    from math import comb
    if count > comb(n, bits_in):
        raise ValueError(f"cannot draw {count} distinct inputs with {bits_in} of {n} bits set")

    seen: set[bytes] = set()
    patterns: list[Pattern] = []
    while len(patterns) < count:
        x = np.zeros(n, dtype=np.uint8)
        x[rng.choice(n, size=bits_in, replace=False)] = 1
        key = x.tobytes()
        if key in seen:
            continue
        seen.add(key)
        d = np.zeros(m, dtype=np.uint8)
        d[rng.choice(m, size=bits_out, replace=False)] = 1
        patterns.append(Pattern(x=x, d=d, id=len(patterns)))
    return patterns


# -- weight persistence ---------------------------------------------------------


def save_weights(path, topology: NetworkTopology, weights: WeightMatrix) -> None:
    """Write topology and weights as versioned text, 17 significant digits.

    Format: a header line ``neurofault-weights v1 n n_hidden m threshold``
    followed by one line per realized synapse ``LAYER i j w`` with LAYER in
    {IH, HO}. 17 significant digits round-trip an IEEE double exactly.
    """
    spec = topology.spec
    with open(path, "w", encoding="ascii") as f:
        f.write(f"{WEIGHT_FILE_MAGIC} {WEIGHT_FILE_VERSION} "
                f"{spec.n_input} {spec.n_hidden} {spec.n_output} {spec.threshold:.17g}\n")
        for i, j in topology.synapses_ih():
            f.write(f"IH {i} {j} {weights.w_ih[i, j]:.17g}\n")
        for j, k in topology.synapses_ho():
            f.write(f"HO {j} {k} {weights.w_ho[j, k]:.17g}\n")


def load_weights(path) -> tuple[NetworkTopology, WeightMatrix]:
    """Read a weight file back into a topology and weight matrix.

    The reconstructed spec records the realized connectivity fraction (the
    sampling seed is not recoverable from the file and is stored as 0).
    """
    with open(path, encoding="ascii") as f:
        header = f.readline().split()
        if len(header) != 6 or header[0] != WEIGHT_FILE_MAGIC:
            raise ValueError(f"{path}: not a {WEIGHT_FILE_MAGIC} file")
        if header[1] != WEIGHT_FILE_VERSION:
            raise ValueError(f"{path}: unsupported version {header[1]}")
        n, n_hidden, m = int(header[2]), int(header[3]), int(header[4])
        threshold = float(header[5])

        adj_ih = np.zeros((n, n_hidden), dtype=bool)
        adj_ho = np.zeros((n_hidden, m), dtype=bool)
        w_ih = np.zeros((n, n_hidden))
        w_ho = np.zeros((n_hidden, m))
        for lineno, line in enumerate(f, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[0] not in ("IH", "HO"):
                raise ValueError(f"{path}:{lineno}: malformed synapse line")
            i, j, w = int(parts[1]), int(parts[2]), float(parts[3])
            if parts[0] == "IH":
                adj_ih[i, j] = True
                w_ih[i, j] = w
            else:
                adj_ho[i, j] = True
                w_ho[i, j] = w

    possible = n * n_hidden + n_hidden * m
    realized = int(adj_ih.sum() + adj_ho.sum())
    spec = NetworkSpec(n_input=n, n_hidden=n_hidden, n_output=m,
                       connectivity=max(realized / possible, 1e-9),
                       threshold=threshold, init_seed=0)
    topology = NetworkTopology(spec, adj_ih, adj_ho)
    return topology, WeightMatrix(topology, w_ih, w_ho)
