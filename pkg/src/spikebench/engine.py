"""Per-rank simulation loop.

Each step: drain the current delay-ring slot into per-neuron input
currents, add the Poisson external stimulus, integrate every local neuron
in ascending id order, and report the spikes emitted this step.  Spike
delivery (local and remote alike) happens once per step after the
exchange, over the union of that step's spikes sorted by source id, so
every input accumulator sees its contributions in a canonical
(step, source id) order -- this is what makes rasters bit-identical for
any rank count.

Synaptic events are counted exactly: one internal event per synapse
delivered, one external event per Poisson arrival.
"""

import hashlib
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import rng
from .errors import (
    CalibrationError,
    ConfigError,
    ContractViolationError,
    NumericalDivergenceError,
)
from .neurons import (
    AdaptiveLifParams,
    izhikevich_preset,
    step_adaptive_lif_batch,
    step_izhikevich_batch,
)

__all__ = [
    "StimulusSpec",
    "DelayRing",
    "RunMetrics",
    "Engine",
    "poisson_external",
    "poisson_external_batch",
    "deliver_spike",
    "expected_event_count",
    "calibrate_rate",
    "save_raster_binary",
    "load_raster_binary",
    "save_raster_csv",
    "load_raster_csv",
    "raster_checksum",
    "rate_in_window",
]


@dataclass(frozen=True)
class StimulusSpec:
    """External Poisson stimulus: per-neuron equivalent synapse count,
    per-synapse rate, and the efficacy of one arrival."""

    ext_synapses_per_neuron: int = 594
    ext_rate_hz: float = 3.0
    ext_weight: float = 0.5
    seed: int = 7

    def __post_init__(self):
        problems = []
        if self.ext_synapses_per_neuron < 0:
            problems.append(
                f"ext_synapses_per_neuron must be >= 0, got {self.ext_synapses_per_neuron}"
            )
        if self.ext_rate_hz < 0:
            problems.append(f"ext_rate_hz must be >= 0, got {self.ext_rate_hz}")
        if problems:
            raise ConfigError(problems)

    def events_per_step(self, dt_ms: float) -> float:
        """Poisson mean per neuron per step."""
        return self.ext_synapses_per_neuron * self.ext_rate_hz * dt_ms / 1000.0


def poisson_external(neuron: int, step: int, stim: StimulusSpec, dt_ms: float,
                     seed: Optional[int] = None) -> int:
    """External event count for one neuron at one step.

    Counter-based and keyed by (seed, neuron, step): the same triple
    always yields the same count, on any rank.
    """
    if dt_ms <= 0:
        raise ConfigError([f"dt_ms must be > 0, got {dt_ms}"])
    lam = stim.events_per_step(dt_ms)
    return rng.poisson_keyed(lam, stim.seed if seed is None else seed, neuron, step)


def poisson_external_batch(neurons: np.ndarray, step: int, stim: StimulusSpec,
                           dt_ms: float, seed: Optional[int] = None) -> np.ndarray:
    """Vector form of :func:`poisson_external`; bit-identical per element."""
    if dt_ms <= 0:
        raise ConfigError([f"dt_ms must be > 0, got {dt_ms}"])
    lam = stim.events_per_step(dt_ms)
    return rng.poisson_keyed_batch(lam, stim.seed if seed is None else seed, neurons, step)


class DelayRing:
    """Per-future-step input accumulators, one per local neuron per slot.

    Slot arithmetic is modulo the ring length (max delay in steps + 1);
    the current slot is drained exactly once per step and zeroed.
    """

    def __init__(self, n_slots: int, n_local: int):
        if n_slots < 2:
            raise ConfigError([f"ring needs at least 2 slots, got {n_slots}"])
        self.n_slots = n_slots
        self.n_local = n_local
        self.buf = np.zeros((n_slots, n_local), dtype=np.float64)
        self.cursor = 0

    def drain(self) -> np.ndarray:
        """Return and zero the current slot's accumulators."""
        row = self.buf[self.cursor].copy()
        self.buf[self.cursor].fill(0.0)
        return row

    def accumulate(self, delays: np.ndarray, local_targets: np.ndarray,
                   weights: np.ndarray) -> None:
        """Add ``weights`` at slots (cursor + delays) mod length.

        Accumulation follows input order, so callers control the float
        addition order by ordering their inputs.
        """
        if len(delays) == 0:
            return
        if int(delays.min()) < 1:
            raise ContractViolationError("synaptic delay below the 1-step minimum")
        slots = (self.cursor + delays.astype(np.int64)) % self.n_slots
        flat = slots * self.n_local + local_targets
        acc = np.bincount(flat, weights=weights, minlength=self.n_slots * self.n_local)
        self.buf += acc.reshape(self.n_slots, self.n_local)

    def advance(self) -> None:
        self.cursor = (self.cursor + 1) % self.n_slots


def deliver_spike(ring: DelayRing, targets: np.ndarray, weights: np.ndarray,
                  delays: np.ndarray) -> int:
    """Deliver one neuron's synapse list into the ring; returns the number
    of synaptic events (synapses touched)."""
    ring.accumulate(np.asarray(delays), np.asarray(targets), np.asarray(weights))
    return len(targets)


@dataclass
class RunMetrics:
    """Counters for one run (or one rank of a run)."""

    n_neurons: int
    simulated_seconds: float
    wall_seconds: float
    total_spikes: int
    internal_synaptic_events: int
    external_synaptic_events: int

    @property
    def mean_rate_hz(self) -> float:
        if self.n_neurons == 0 or self.simulated_seconds == 0:
            return 0.0
        return self.total_spikes / (self.n_neurons * self.simulated_seconds)

    @property
    def total_events(self) -> int:
        return self.internal_synaptic_events + self.external_synaptic_events

    @property
    def events_per_second(self) -> float:
        """Throughput: synaptic events processed per wall-clock second."""
        if self.wall_seconds <= 0:
            return 0.0
        return self.total_events / self.wall_seconds

    @staticmethod
    def merged(parts: list, n_neurons: int) -> "RunMetrics":
        """Combine per-rank metrics; wall time is the slowest rank's."""
        return RunMetrics(
            n_neurons=n_neurons,
            simulated_seconds=parts[0].simulated_seconds if parts else 0.0,
            wall_seconds=max((p.wall_seconds for p in parts), default=0.0),
            total_spikes=sum(p.total_spikes for p in parts),
            internal_synaptic_events=sum(p.internal_synaptic_events for p in parts),
            external_synaptic_events=sum(p.external_synaptic_events for p in parts),
        )


class Engine:
    """Simulation state for one rank.

    ``part`` supplies the rank's view of the network (see
    distributed.RankPartition): sorted local ids, per-source incoming
    synapse lists in CSR form with rank-local target indices, and the
    ring length.  The caller drives the loop:

        spikes = engine.step(t)
        ... exchange spikes ...
        engine.deliver(t, merged_sorted_sources)
        engine.advance()
    """

    def __init__(self, part, stim: StimulusSpec, dt_ms: float = 1.0,
                 lif_params: Optional[AdaptiveLifParams] = None,
                 stdp=None, record_raster: bool = True):
        if dt_ms <= 0:
            raise ConfigError([f"dt_ms must be > 0, got {dt_ms}"])
        self.part = part
        self.stim = stim
        self.dt_ms = dt_ms
        self.model = part.model
        self.local_gids = part.local_gids
        self.n_local = len(part.local_gids)
        self.ring = DelayRing(part.n_slots, self.n_local)
        self.stdp = stdp
        self.record_raster = record_raster
        self._lam = stim.events_per_step(dt_ms)

        if self.model == "izhikevich":
            exc = part.local_excitatory
            rs, fs = izhikevich_preset("rs"), izhikevich_preset("fs")
            self._a = np.where(exc, rs.a, fs.a)
            self._b = np.where(exc, rs.b, fs.b)
            self._c = np.where(exc, rs.c, fs.c)
            self._d = np.where(exc, rs.d, fs.d)
            self._v_peak = np.where(exc, rs.v_peak, fs.v_peak)
            self.v = self._c.copy()
            self.w = self._b * self.v
            self.refr = None
        elif self.model == "adaptive_lif":
            self.lif = lif_params if lif_params is not None else AdaptiveLifParams()
            self.v = np.full(self.n_local, self.lif.v_rest, dtype=np.float64)
            self.w = np.zeros(self.n_local, dtype=np.float64)
            self.refr = np.zeros(self.n_local, dtype=np.float64)
        else:
            raise ConfigError([f"unknown model {self.model!r}"])

        self.total_spikes = 0
        self.internal_events = 0
        self.external_events = 0
        self._raster_steps = []
        self._raster_gids = []
        self._last_spiked_local = np.empty(0, dtype=np.int64)

    def step(self, t: int) -> np.ndarray:
        """Integrate one step; returns this step's spiking global ids
        (ascending).  Spikes are not delivered here -- see deliver()."""
        i_syn = self.ring.drain()
        if self._lam > 0.0:
            counts = rng.poisson_keyed_batch(self._lam, self.stim.seed, self.local_gids, t)
            with np.errstate(over="ignore"):
                i_syn = i_syn + self.stim.ext_weight * counts
            self.external_events += int(counts.sum())

        if self.model == "izhikevich":
            v2, w2, spiked, diverged = step_izhikevich_batch(
                self.v, self.w, self._a, self._b, self._c, self._d, self._v_peak,
                i_syn, self.dt_ms,
            )
            refr2 = None
        else:
            v2, w2, refr2, spiked, diverged = step_adaptive_lif_batch(
                self.v, self.w, self.refr, self.lif, i_syn, self.dt_ms,
            )
        if diverged.any():
            gid = int(self.local_gids[int(np.flatnonzero(diverged)[0])])
            raise NumericalDivergenceError(
                f"neuron {gid} diverged at step {t}", neuron=gid
            )
        self.v, self.w = v2, w2
        if refr2 is not None:
            self.refr = refr2

        spiked_local = np.flatnonzero(spiked)
        self._last_spiked_local = spiked_local
        n = len(spiked_local)
        self.total_spikes += n
        spiked_gids = self.local_gids[spiked_local]
        if self.record_raster and n:
            self._raster_steps.append(np.full(n, t, dtype=np.uint32))
            self._raster_gids.append(spiked_gids.astype(np.uint32))
        return spiked_gids

    def deliver(self, t: int, sources_sorted: np.ndarray) -> None:
        """Expand this step's spikes (ascending source id, local and remote
        merged) through the rank's incoming synapse lists."""
        part = self.part
        if len(sources_sorted):
            starts = part.in_offsets[sources_sorted]
            ends = part.in_offsets[sources_sorted + 1]
            spans = [np.arange(s, e) for s, e in zip(starts, ends) if e > s]
            if spans:
                idx = np.concatenate(spans)
                self.ring.accumulate(part.in_delays[idx], part.in_targets[idx],
                                     part.in_weights[idx])
                self.internal_events += len(idx)
        if self.stdp is not None:
            self.stdp.process_step(sources_sorted, self._last_spiked_local)

    def advance(self) -> None:
        self.ring.advance()

    def raster(self) -> Tuple[np.ndarray, np.ndarray]:
        if not self._raster_steps:
            return np.empty(0, dtype=np.uint32), np.empty(0, dtype=np.uint32)
        return np.concatenate(self._raster_steps), np.concatenate(self._raster_gids)

    def metrics(self, simulated_seconds: float, wall_seconds: float) -> RunMetrics:
        return RunMetrics(
            n_neurons=self.n_local,
            simulated_seconds=simulated_seconds,
            wall_seconds=wall_seconds,
            total_spikes=self.total_spikes,
            internal_synaptic_events=self.internal_events,
            external_synaptic_events=self.external_events,
        )


def expected_event_count(neurons: float, seconds: float, mean_rate_hz: float,
                         fanout: float, ext_syn: float, ext_rate_hz: float) -> float:
    """Expected total synaptic events:
    neurons * seconds * (rate * fanout + ext_rate * ext_synapses)."""
    args = (neurons, seconds, mean_rate_hz, fanout, ext_syn, ext_rate_hz)
    if any(a < 0 for a in args):
        raise ConfigError([f"expected_event_count arguments must be >= 0, got {args}"])
    return neurons * seconds * (mean_rate_hz * fanout + ext_rate_hz * ext_syn)


def calibrate_rate(probe: Callable[[float], float], target_hz: float = 5.1,
                   band_hz: float = 1.5, initial_scale: float = 1.0,
                   max_iters: int = 32) -> Tuple[float, float]:
    """Find an excitatory weight scale whose probe rate lands in
    [target - band, target + band] by bracket expansion plus bisection.

    ``probe(scale)`` runs a short, fully seeded simulation and returns its
    mean rate; identical seeds make the search deterministic.  Raises
    CalibrationError (with the last achieved rate) if the budget of
    ``max_iters`` probes is exhausted.
    """
    lo_band, hi_band = target_hz - band_hz, target_hz + band_hz
    used = 0
    last_rate = None

    def run(scale):
        nonlocal used, last_rate
        if used >= max_iters:
            raise CalibrationError(
                f"calibration exhausted {max_iters} probes; last rate {last_rate:.3f} Hz",
                achieved_hz=last_rate,
            )
        used += 1
        last_rate = probe(scale)
        return last_rate

    rate = run(initial_scale)
    if lo_band <= rate <= hi_band:
        return initial_scale, rate

    if rate < target_hz:
        lo = initial_scale
        hi = initial_scale * 2.0 if initial_scale > 0 else 1.0
        rate = run(hi)
        while rate < target_hz:
            if lo_band <= rate <= hi_band:
                return hi, rate
            lo, hi = hi, hi * 2.0
            rate = run(hi)
        if lo_band <= rate <= hi_band:
            return hi, rate
    else:
        hi = initial_scale
        lo = initial_scale * 0.5
        rate = run(lo)
        while rate > target_hz:
            if lo_band <= rate <= hi_band:
                return lo, rate
            hi, lo = lo, lo * 0.5
            rate = run(lo)
        if lo_band <= rate <= hi_band:
            return lo, rate

    while True:
        mid = 0.5 * (lo + hi)
        rate = run(mid)
        if lo_band <= rate <= hi_band:
            return mid, rate
        if rate < target_hz:
            lo = mid
        else:
            hi = mid


def save_raster_binary(path, steps: np.ndarray, gids: np.ndarray) -> None:
    """Write the raster as a stream of (step u32, neuron u32) pairs,
    little-endian."""
    arr = np.empty((len(steps), 2), dtype="<u4")
    arr[:, 0] = steps
    arr[:, 1] = gids
    with open(path, "wb") as fh:
        fh.write(arr.tobytes())


def load_raster_binary(path) -> Tuple[np.ndarray, np.ndarray]:
    raw = np.fromfile(path, dtype="<u4")
    if raw.size % 2:
        raise ConfigError([f"raster file {path} has an odd number of u32 words"])
    pairs = raw.reshape(-1, 2)
    return pairs[:, 0].astype(np.uint32), pairs[:, 1].astype(np.uint32)


def save_raster_csv(path, steps: np.ndarray, gids: np.ndarray,
                    provenance: Optional[dict] = None) -> None:
    """CSV raster with `step,neuron` header; provenance keys become
    leading `#` comments."""
    with open(path, "w") as fh:
        for key, value in (provenance or {}).items():
            fh.write(f"# {key} = {value}\n")
        fh.write("step,neuron\n")
        for s, g in zip(steps, gids):
            fh.write(f"{int(s)},{int(g)}\n")


def load_raster_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    steps, gids = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("step"):
                continue
            s, g = line.split(",")
            steps.append(int(s))
            gids.append(int(g))
    return np.asarray(steps, dtype=np.uint32), np.asarray(gids, dtype=np.uint32)


def rate_in_window(steps: np.ndarray, n_neurons: int, dt_ms: float,
                   start_step: int, end_step: int) -> float:
    """Mean firing rate (Hz) over raster steps in [start_step, end_step).

    Calibration probes use this to read the settled rate after the
    adaptation transient instead of the run-long average.
    """
    if end_step <= start_step or n_neurons == 0:
        return 0.0
    n = int(((steps >= start_step) & (steps < end_step)).sum())
    window_seconds = (end_step - start_step) * dt_ms / 1000.0
    return n / (n_neurons * window_seconds)


def raster_checksum(steps: np.ndarray, gids: np.ndarray) -> str:
    """SHA-256 over the canonical little-endian encoding sorted by
    (step, neuron); identical rasters give identical digests regardless
    of record order."""
    order = np.lexsort((gids, steps))
    arr = np.empty((len(steps), 2), dtype="<u4")
    arr[:, 0] = np.asarray(steps)[order]
    arr[:, 1] = np.asarray(gids)[order]
    return hashlib.sha256(arr.tobytes()).hexdigest()
