#!/usr/bin/env python3
"""Run the desk-scale benchmark and check the event bookkeeping.

Runs 1 simulated second of the 10K-neuron network, prints the measured
counters, and compares the total against the closed-form estimate
neurons * seconds * (rate * fanout + ext_rate * ext_synapses).
"""

import numpy as np

from spikebench import expected_event_count
from spikebench.config import load_bundled_config
from spikebench.distributed import run_simulation
from spikebench.network import build_network

cfg = load_bundled_config("paper-desk")
net = build_network(cfg.grid_spec(), dt_ms=cfg["run.dt_ms"], model=cfg["model.kind"])

seconds = 1.0
print(f"simulating {seconds} s of the desk-scale network...")
metrics, (steps, gids), _, _ = run_simulation(
    net, seconds=seconds, stim=cfg.stimulus(), lif_params=cfg.lif_params(),
)

print(f"spikes:                  {metrics.total_spikes:,}")
print(f"mean rate:               {metrics.mean_rate_hz:.3f} Hz")
print(f"internal synaptic events {metrics.internal_synaptic_events:,}")
print(f"external synaptic events {metrics.external_synaptic_events:,}")
print(f"throughput:              {metrics.events_per_second:,.0f} events/s")

# exact conservation: internal events == sum of the spikers' fanouts
recount = int(net.fanouts[gids].sum())
print(f"recount from raster:     {recount:,} (exact match: "
      f"{recount == metrics.internal_synaptic_events})")

expected = expected_event_count(
    net.n_neurons, seconds, metrics.mean_rate_hz, float(net.fanouts.mean()),
    cfg["stimulus.ext_synapses_per_neuron"], cfg["stimulus.ext_rate_hz"],
)
print(f"closed-form estimate:    {expected:,.0f} "
      f"({100 * (metrics.total_events - expected) / expected:+.3f}% deviation)")

# the headline arithmetic at the reported operating point
print("\nheadline estimate at 5.1 Hz over 3 s:",
      f"{expected_event_count(10000, 3, 5.1, 1195, 594, 3):,.0f} events")
