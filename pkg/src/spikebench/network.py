"""Columnar grid network construction.

Neurons are grouped into columns laid out on a 2D grid with unit spacing.
Connection probability between columns decays exponentially with the
Euclidean distance between column centers, normalized so the expected
outgoing fanout per neuron equals ``target_fanout`` on average over
source columns.  Targets are sampled with replacement (multiple synapses
between a pair are allowed; self-synapses are excluded), weights are set
by the source class (+w_exc for excitatory sources, -w_inh for
inhibitory) and axonal delays are uniform integers in
[delay_min_ms/dt, delay_max_ms/dt] steps.

Construction is keyed per source neuron (Philox4x64-10 keyed by
(seed, source id)), so the result is bit-identical for any build order,
build parallelism, or partition count.

Neuron numbering: column cid (row-major, cid = gy*grid_x + gx) owns the
contiguous id block [cid*npc, (cid+1)*npc).  Within each column the first
round(exc_fraction*npc) ids are excitatory.
"""

import math
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .errors import ConfigError, InfeasibleSpecError, SnapshotFormatError

__all__ = [
    "GridSpec",
    "Synapse",
    "Network",
    "connection_probability",
    "normalize_fanout",
    "build_network",
    "count_equivalent_synapses",
    "network_stats",
    "format_network_stats",
    "save_network",
    "load_network",
]

MODEL_KINDS = ("izhikevich", "adaptive_lif")


@dataclass(frozen=True)
class GridSpec:
    """Shape, connectivity and efficacy parameters of the columnar grid."""

    grid_x: int
    grid_y: int
    neurons_per_column: int
    exc_fraction: float = 0.8
    target_fanout: float = 1195.0
    decay_lambda: float = 2.0
    delay_min_ms: float = 1.0
    delay_max_ms: float = 20.0
    w_exc: float = 0.4
    w_inh: float = 2.0
    seed: int = 42

    @property
    def n_columns(self) -> int:
        return self.grid_x * self.grid_y

    @property
    def n_neurons(self) -> int:
        return self.n_columns * self.neurons_per_column

    @property
    def n_exc_per_column(self) -> int:
        # round-half-up so 0.8*npc behaves as expected for small columns
        return int(math.floor(self.exc_fraction * self.neurons_per_column + 0.5))

    def validate(self) -> list:
        problems = []
        if self.grid_x < 1 or self.grid_y < 1:
            problems.append(f"grid must be at least 1x1, got {self.grid_x}x{self.grid_y}")
        if self.neurons_per_column < 1:
            problems.append(f"neurons_per_column must be >= 1, got {self.neurons_per_column}")
        if not 0.0 < self.exc_fraction < 1.0:
            problems.append(f"exc_fraction must be in (0, 1), got {self.exc_fraction}")
        if self.target_fanout <= 0:
            problems.append(f"target_fanout must be > 0, got {self.target_fanout}")
        elif self.n_columns >= 1 and self.neurons_per_column >= 1 and self.target_fanout >= self.n_neurons:
            problems.append(
                f"target_fanout ({self.target_fanout}) must be below the neuron count ({self.n_neurons})"
            )
        if self.decay_lambda <= 0:
            problems.append(f"decay_lambda must be > 0, got {self.decay_lambda}")
        if self.delay_min_ms <= 0 or self.delay_max_ms < self.delay_min_ms:
            problems.append(
                f"delays must satisfy 0 < delay_min <= delay_max, got [{self.delay_min_ms}, {self.delay_max_ms}]"
            )
        if self.w_exc < 0 or self.w_inh < 0:
            problems.append("w_exc and w_inh are magnitudes and must be >= 0")
        if not 0 <= self.seed < 2**64:
            problems.append(f"seed must fit in 64 bits, got {self.seed}")
        return problems

    def require_valid(self):
        problems = self.validate()
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class Synapse:
    """One outgoing synapse: global target id, signed efficacy, delay in steps."""

    target: int
    weight: float
    delay_steps: int


@dataclass
class Network:
    """Immutable built network in CSR layout ordered by source id.

    ``offsets[s]:offsets[s+1]`` indexes targets/weights/delay_steps of
    source s.  ``model`` selects the neuron family simulated on it.
    """

    spec: GridSpec
    dt_ms: float
    model: str
    offsets: np.ndarray          # int64, n_neurons + 1
    targets: np.ndarray          # int32
    weights: np.ndarray          # float64, signed by source class
    delay_steps: np.ndarray      # int16
    p0: float = field(default=0.0)

    @property
    def n_neurons(self) -> int:
        return self.spec.n_neurons

    @property
    def total_synapses(self) -> int:
        return int(self.offsets[-1])

    def fanout(self, source: int) -> int:
        return int(self.offsets[source + 1] - self.offsets[source])

    @property
    def fanouts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def synapses_of(self, source: int) -> list:
        lo, hi = int(self.offsets[source]), int(self.offsets[source + 1])
        return [
            Synapse(int(t), float(w), int(d))
            for t, w, d in zip(self.targets[lo:hi], self.weights[lo:hi], self.delay_steps[lo:hi])
        ]

    def is_excitatory(self, gid) -> np.ndarray:
        """Vector-friendly excitatory test by id."""
        return (np.asarray(gid) % self.spec.neurons_per_column) < self.spec.n_exc_per_column

    def column_of(self, gid) -> np.ndarray:
        return np.asarray(gid) // self.spec.neurons_per_column


def _column_distance_matrix(spec: GridSpec) -> np.ndarray:
    cids = np.arange(spec.n_columns)
    gx = cids % spec.grid_x
    gy = cids // spec.grid_x
    dx = gx[:, None] - gx[None, :]
    dy = gy[:, None] - gy[None, :]
    return np.sqrt((dx * dx + dy * dy).astype(np.float64))


def normalize_fanout(spec: GridSpec) -> float:
    """Base connection probability p0 so the average expected fanout equals
    ``target_fanout``.

    The expected fanout of a source in column c is
    p0 * sum_c' exp(-d(c,c')/lambda) * n_eligible(c,c'), with the source
    itself excluded from its own column's eligible pool.  p0 is fixed so
    the mean over source columns hits the target; a required p0 > 1 means
    the grid is too small for the requested fanout.
    """
    spec.require_valid()
    dist = _column_distance_matrix(spec)
    kernel = np.exp(-dist / spec.decay_lambda)
    eligible = np.full(dist.shape, float(spec.neurons_per_column))
    np.fill_diagonal(eligible, float(spec.neurons_per_column - 1))
    per_column = (kernel * eligible).sum(axis=1)
    mean_reach = float(per_column.mean())
    if mean_reach <= 0.0:
        raise InfeasibleSpecError("network has no eligible targets")
    p0 = spec.target_fanout / mean_reach
    if p0 > 1.0:
        raise InfeasibleSpecError(
            f"target_fanout {spec.target_fanout} needs p0 = {p0:.4f} > 1; "
            "grid too small for the requested fanout"
        )
    return p0


def connection_probability(d: float, spec: GridSpec, p0: Optional[float] = None) -> float:
    """Probability of a synapse onto one neuron at inter-column distance d.

    ``p0 * exp(-d/decay_lambda)`` clamped to [0, 1]; pass a precomputed
    p0 to skip renormalization.
    """
    if d < 0:
        raise ConfigError([f"distance must be >= 0, got {d}"])
    if p0 is None:
        p0 = normalize_fanout(spec)
    p = p0 * math.exp(-d / spec.decay_lambda)
    return min(max(p, 0.0), 1.0)


def build_network(spec: GridSpec, dt_ms: float = 1.0, model: str = "adaptive_lif") -> Network:
    """Build the full network deterministically from spec.seed.

    Every source's synapse list is a pure function of (seed, source id,
    spec), so the result does not depend on build order or partitioning.
    """
    spec.require_valid()
    if model not in MODEL_KINDS:
        raise ConfigError([f"unknown model {model!r}; expected one of {MODEL_KINDS}"])
    if dt_ms <= 0:
        raise ConfigError([f"dt_ms must be > 0, got {dt_ms}"])
    delay_lo = int(round(spec.delay_min_ms / dt_ms))
    delay_hi = int(round(spec.delay_max_ms / dt_ms))
    if delay_lo < 1:
        raise ConfigError(
            [f"delay_min_ms ({spec.delay_min_ms}) must be at least one step of dt ({dt_ms})"]
        )
    if delay_hi >= 2**15:
        raise ConfigError([f"delay_max_ms/dt ({delay_hi}) exceeds the int16 delay range"])

    p0 = normalize_fanout(spec)
    npc = spec.neurons_per_column
    n_cols = spec.n_columns
    dist = _column_distance_matrix(spec)
    probs = np.clip(p0 * np.exp(-dist / spec.decay_lambda), 0.0, 1.0)
    col_base = np.arange(n_cols, dtype=np.int64) * npc
    n_exc = spec.n_exc_per_column

    per_source_targets = []
    per_source_delays = []
    counts_per_source = np.zeros(spec.n_neurons, dtype=np.int64)

    eligible_row = np.full(n_cols, npc, dtype=np.int64)
    for s in range(spec.n_neurons):
        src_col = s // npc
        gen = rng.philox_generator(spec.seed, s)
        eligible = eligible_row.copy()
        eligible[src_col] = npc - 1
        counts = gen.binomial(eligible, probs[src_col])
        k_total = int(counts.sum())
        counts_per_source[s] = k_total
        if k_total == 0:
            per_source_targets.append(np.empty(0, dtype=np.int64))
            per_source_delays.append(np.empty(0, dtype=np.int64))
            continue
        n_elig_rep = np.repeat(eligible, counts)
        base_rep = np.repeat(col_base, counts)
        u = gen.random(k_total)
        local = np.floor(u * n_elig_rep).astype(np.int64)
        # skip the source's own slot inside its column
        own = base_rep == col_base[src_col]
        s_local = s - col_base[src_col]
        local[own & (local >= s_local)] += 1
        targets = base_rep + local
        delays = gen.integers(delay_lo, delay_hi + 1, size=k_total)
        per_source_targets.append(targets)
        per_source_delays.append(delays)

    offsets = np.zeros(spec.n_neurons + 1, dtype=np.int64)
    np.cumsum(counts_per_source, out=offsets[1:])
    targets = (
        np.concatenate(per_source_targets).astype(np.int32)
        if per_source_targets
        else np.empty(0, dtype=np.int32)
    )
    delay_steps = (
        np.concatenate(per_source_delays).astype(np.int16)
        if per_source_delays
        else np.empty(0, dtype=np.int16)
    )
    weights = np.empty(int(offsets[-1]), dtype=np.float64)
    gids = np.arange(spec.n_neurons)
    w_by_source = np.where((gids % npc) < n_exc, spec.w_exc, -spec.w_inh)
    weights[:] = np.repeat(w_by_source, counts_per_source)
    return Network(
        spec=spec,
        dt_ms=dt_ms,
        model=model,
        offsets=offsets,
        targets=targets,
        weights=weights,
        delay_steps=delay_steps,
        p0=p0,
    )


def count_equivalent_synapses(net: Network, ext_per_neuron: int) -> int:
    """Internal synapses plus the modeled external input synapses."""
    if ext_per_neuron < 0:
        raise ConfigError([f"ext_per_neuron must be >= 0, got {ext_per_neuron}"])
    return net.total_synapses + net.n_neurons * int(ext_per_neuron)


def network_stats(net: Network) -> dict:
    """Counts and histograms for inspection."""
    fanouts = net.fanouts
    delay_values, delay_counts = np.unique(net.delay_steps, return_counts=True)
    hist, edges = np.histogram(fanouts, bins=20)
    exc_mask = net.is_excitatory(np.arange(net.n_neurons))
    return {
        "n_neurons": net.n_neurons,
        "n_columns": net.spec.n_columns,
        "neurons_per_column": net.spec.neurons_per_column,
        "n_excitatory": int(exc_mask.sum()),
        "n_inhibitory": int((~exc_mask).sum()),
        "model": net.model,
        "total_synapses": net.total_synapses,
        "mean_fanout": float(fanouts.mean()) if net.n_neurons else 0.0,
        "p0": net.p0,
        "fanout_hist_counts": hist.tolist(),
        "fanout_hist_edges": [float(e) for e in edges],
        "delay_hist_steps": [int(v) for v in delay_values],
        "delay_hist_counts": [int(c) for c in delay_counts],
    }


def format_network_stats(stats: dict) -> str:
    """Structured-text rendering of :func:`network_stats`."""
    lines = []
    for key in (
        "n_neurons",
        "n_columns",
        "neurons_per_column",
        "n_excitatory",
        "n_inhibitory",
        "model",
        "total_synapses",
        "mean_fanout",
        "p0",
    ):
        lines.append(f"network.{key} = {stats[key]}")
    for i, (c, lo, hi) in enumerate(
        zip(stats["fanout_hist_counts"], stats["fanout_hist_edges"], stats["fanout_hist_edges"][1:])
    ):
        lines.append(f"network.fanout_hist.{i} = [{lo:.1f}, {hi:.1f}) {c}")
    for steps, count in zip(stats["delay_hist_steps"], stats["delay_hist_counts"]):
        lines.append(f"network.delay_hist.{steps} = {count}")
    return "\n".join(lines) + "\n"


_SNAP_MAGIC = b"SBNW"
_SNAP_VERSION = 1
# snapshot header: spec scalars, dt, model tag, array lengths; all little-endian
_SNAP_HEAD = struct.Struct("<4sH iii d d d d d d d Q d B d Q Q")
_MODEL_TAGS = {name: i for i, name in enumerate(MODEL_KINDS)}


def save_network(path, net: Network) -> None:
    """Write a versioned little-endian binary snapshot."""
    spec = net.spec
    head = _SNAP_HEAD.pack(
        _SNAP_MAGIC,
        _SNAP_VERSION,
        spec.grid_x,
        spec.grid_y,
        spec.neurons_per_column,
        spec.exc_fraction,
        spec.target_fanout,
        spec.decay_lambda,
        spec.delay_min_ms,
        spec.delay_max_ms,
        spec.w_exc,
        spec.w_inh,
        spec.seed,
        net.dt_ms,
        _MODEL_TAGS[net.model],
        net.p0,
        net.n_neurons,
        net.total_synapses,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(net.offsets.astype("<i8").tobytes())
        fh.write(net.targets.astype("<i4").tobytes())
        fh.write(net.weights.astype("<f8").tobytes())
        fh.write(net.delay_steps.astype("<i2").tobytes())


def load_network(path) -> Network:
    """Read a snapshot written by :func:`save_network`."""
    with open(path, "rb") as fh:
        head = fh.read(_SNAP_HEAD.size)
        if len(head) < _SNAP_HEAD.size:
            raise SnapshotFormatError("snapshot truncated before header end")
        fields = _SNAP_HEAD.unpack(head)
        magic, version = fields[0], fields[1]
        if magic != _SNAP_MAGIC:
            raise SnapshotFormatError(f"bad snapshot magic {magic!r}")
        if version != _SNAP_VERSION:
            raise SnapshotFormatError(f"unsupported snapshot version {version}")
        (gx, gy, npc, exc_frac, fanout, lam, dmin, dmax, w_exc, w_inh, seed,
         dt_ms, model_tag, p0, n_neurons, n_synapses) = fields[2:]
        spec = GridSpec(
            grid_x=gx, grid_y=gy, neurons_per_column=npc, exc_fraction=exc_frac,
            target_fanout=fanout, decay_lambda=lam, delay_min_ms=dmin,
            delay_max_ms=dmax, w_exc=w_exc, w_inh=w_inh, seed=seed,
        )
        if spec.n_neurons != n_neurons:
            raise SnapshotFormatError("snapshot header is inconsistent")
        model = MODEL_KINDS[model_tag] if model_tag < len(MODEL_KINDS) else None
        if model is None:
            raise SnapshotFormatError(f"unknown model tag {model_tag}")

        def read_array(dtype, count):
            raw = fh.read(np.dtype(dtype).itemsize * count)
            if len(raw) != np.dtype(dtype).itemsize * count:
                raise SnapshotFormatError("snapshot truncated inside array data")
            return np.frombuffer(raw, dtype=dtype)

        offsets = read_array("<i8", n_neurons + 1).astype(np.int64)
        targets = read_array("<i4", n_synapses).astype(np.int32)
        weights = read_array("<f8", n_synapses).astype(np.float64)
        delay_steps = read_array("<i2", n_synapses).astype(np.int16)
        if fh.read(1):
            raise SnapshotFormatError("trailing bytes after snapshot payload")
    if int(offsets[-1]) != n_synapses:
        raise SnapshotFormatError("snapshot offsets do not match synapse count")
    return Network(
        spec=spec, dt_ms=dt_ms, model=model, offsets=offsets,
        targets=targets, weights=weights, delay_steps=delay_steps, p0=p0,
    )
