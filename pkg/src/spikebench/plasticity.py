"""Spike-timing dependent plasticity (all-to-all exponential traces).

Weight change for one pre/post spike pair at lag dt = t_post - t_pre:

    dt > 0:  +a_plus  * exp(-dt / tau_plus)
    dt < 0:  -a_minus * exp(+dt / tau_minus)
    dt = 0:  0

The trace implementation keeps one exponentially decaying trace per
pre-synaptic source (decay tau_plus) and per post-synaptic neuron (decay
tau_minus).  Per step: decay both traces, apply depression for this
step's pre spikes against the existing post traces, apply potentiation
for this step's post spikes against the existing pre traces, then bump
the traces of this step's spikes.  Zero-lag pairs therefore contribute
nothing, matching the pair rule, and the total over any spike pattern
equals the all-to-all pairwise sum.

Updates touch excitatory synapses only and are clamped to
[max(w_min, 0), w_max], so excitatory weights never change sign.
Disabled parameters leave every weight bit-identical.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["StdpParams", "stdp_delta_w", "potentiate", "depress", "StdpState"]


@dataclass(frozen=True)
class StdpParams:
    a_plus: float = 0.01
    a_minus: float = 0.012
    tau_plus: float = 20.0
    tau_minus: float = 20.0
    w_min: float = 0.0
    w_max: float = 10.0
    enabled: bool = False

    def __post_init__(self):
        problems = []
        if not self.tau_plus > 0:
            problems.append(f"tau_plus must be > 0, got {self.tau_plus}")
        if not self.tau_minus > 0:
            problems.append(f"tau_minus must be > 0, got {self.tau_minus}")
        if self.w_min > self.w_max:
            problems.append(f"w_min ({self.w_min}) must not exceed w_max ({self.w_max})")
        if self.a_plus < 0 or self.a_minus < 0:
            problems.append("a_plus and a_minus are magnitudes and must be >= 0")
        if problems:
            raise ConfigError(problems)


def stdp_delta_w(dt_pre_post: float, params: StdpParams) -> float:
    """Pairwise weight change for lag dt = t_post - t_pre (ms)."""
    if not math.isfinite(dt_pre_post):
        raise ConfigError([f"spike lag must be finite, got {dt_pre_post}"])
    if dt_pre_post > 0:
        return params.a_plus * math.exp(-dt_pre_post / params.tau_plus)
    if dt_pre_post < 0:
        return -params.a_minus * math.exp(dt_pre_post / params.tau_minus)
    return 0.0


def potentiate(weights: np.ndarray, pre_traces: np.ndarray, params: StdpParams) -> np.ndarray:
    """Potentiation at a post spike: w + a_plus * pre_trace, clamped."""
    return np.clip(weights + params.a_plus * pre_traces, max(params.w_min, 0.0), params.w_max)


def depress(weights: np.ndarray, post_traces: np.ndarray, params: StdpParams) -> np.ndarray:
    """Depression at a pre spike: w - a_minus * post_trace, clamped."""
    return np.clip(weights - params.a_minus * post_traces, max(params.w_min, 0.0), params.w_max)


class StdpState:
    """Trace state bound to one rank's incoming synapse table.

    Mutates ``part.in_weights`` in place.  Pre traces are kept for every
    source that projects onto this rank (indexed by global id), post
    traces for local neurons.  Only synapses from excitatory sources are
    plastic.
    """

    def __init__(self, part, params: StdpParams, dt_ms: float):
        if not params.enabled:
            raise ConfigError(["StdpState requires params.enabled = true"])
        self.part = part
        self.params = params
        self.decay_plus = math.exp(-dt_ms / params.tau_plus)
        self.decay_minus = math.exp(-dt_ms / params.tau_minus)
        n_global = len(part.in_offsets) - 1
        self.pre_trace = np.zeros(n_global, dtype=np.float64)
        self.post_trace = np.zeros(len(part.local_gids), dtype=np.float64)
        # source gid per synapse entry, for potentiation lookups
        counts = np.diff(part.in_offsets)
        self._syn_source = np.repeat(np.arange(n_global, dtype=np.int64), counts)
        self._syn_exc = part.source_excitatory[self._syn_source]
        # transpose: synapse indices grouped by local target, exc sources only
        exc_idx = np.flatnonzero(self._syn_exc)
        order = np.argsort(part.in_targets[exc_idx], kind="stable")
        self._by_target_idx = exc_idx[order]
        tgt_sorted = part.in_targets[self._by_target_idx]
        bounds = np.searchsorted(tgt_sorted, np.arange(len(part.local_gids) + 1))
        self._by_target_bounds = bounds

    def incoming_exc_synapses(self, local_target: int) -> np.ndarray:
        """Synapse-table indices of plastic synapses onto a local neuron."""
        lo, hi = self._by_target_bounds[local_target], self._by_target_bounds[local_target + 1]
        return self._by_target_idx[lo:hi]

    def process_step(self, pre_sources: np.ndarray, post_spiked_local: np.ndarray) -> None:
        """Advance one step: decay, depress, potentiate, bump traces.

        ``pre_sources``: global ids of every neuron that spiked this step
        and projects onto this rank (ascending).  ``post_spiked_local``:
        local indices of this rank's neurons that spiked (ascending).
        """
        p = self.params
        w = self.part.in_weights
        lo_clamp = max(p.w_min, 0.0)
        self.pre_trace *= self.decay_plus
        self.post_trace *= self.decay_minus

        for s in pre_sources:
            if not self.part.source_excitatory[s]:
                continue
            a, b = self.part.in_offsets[s], self.part.in_offsets[s + 1]
            if b > a:
                sl = slice(int(a), int(b))
                w[sl] = np.clip(
                    w[sl] - p.a_minus * self.post_trace[self.part.in_targets[sl]],
                    lo_clamp, p.w_max,
                )
        for j in post_spiked_local:
            idx = self.incoming_exc_synapses(int(j))
            if len(idx):
                w[idx] = np.clip(
                    w[idx] + p.a_plus * self.pre_trace[self._syn_source[idx]],
                    lo_clamp, p.w_max,
                )

        self.pre_trace[pre_sources] += 1.0
        if len(post_spiked_local):
            self.post_trace[post_spiked_local] += 1.0
