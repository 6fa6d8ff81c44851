#!/usr/bin/env python3
"""Single-neuron dynamics walkthrough.

Steps the two neuron families under DC drive and prints what each one
does: tonic firing for the regular-spiking class, faster firing for the
fast-spiking class, and progressively lengthening inter-spike intervals
for the adaptive LIF (spike-frequency adaptation).
"""

import numpy as np

from spikebench import (
    AdaptiveLifParams,
    NeuronState,
    izhikevich_preset,
    step_adaptive_lif,
    step_izhikevich,
)


def drive_izhikevich(kind, i_syn, milliseconds=1000):
    params = izhikevich_preset(kind)
    state = NeuronState(v=-70.0, w=-14.0)
    spikes = []
    trace = []
    for t in range(milliseconds):
        state, spiked = step_izhikevich(state, params, i_syn, 1.0, step=t)
        trace.append(state.v)
        if spiked:
            spikes.append(t)
    return spikes, trace


print("== quadratic model, DC input I = 10 ==")
for kind in ("RS", "FS"):
    spikes, _ = drive_izhikevich(kind, 10.0)
    isis = np.diff(spikes)
    print(f"{kind}: {len(spikes)} spikes in 1 s; mean ISI "
          f"{isis.mean():.1f} ms" if len(isis) else f"{kind}: {len(spikes)} spikes")

print()
print("== zero input from the resting point: nothing happens ==")
spikes, trace = drive_izhikevich("RS", 0.0, 200)
print(f"RS at rest: {len(spikes)} spikes, v stays at {trace[-1]:.1f} mV")

print()
print("== adaptive LIF, DC input: inter-spike intervals stretch ==")
params = AdaptiveLifParams()
state = NeuronState(v=params.v_rest, w=0.0)
spikes = []
for t in range(2000):
    state, spiked = step_adaptive_lif(state, params, 2.0, 1.0, step=t)
    if spiked:
        spikes.append(t)
isis = np.diff(spikes)
print(f"{len(spikes)} spikes in 2 s")
print("inter-spike intervals (ms):", isis.tolist())
print(f"calcium after the run: c = {state.w:.3f} (decays with tau_c = {params.tau_c} ms)")
