#!/usr/bin/env python3
"""Energy accounting from measured electrical inputs.

Feeds the two reference measurements (a 220 V supply, clamp readings of
1.15 A over 9.1 s and 0.08 A over 30 s, 235M synaptic events) through
the power/energy/joule-per-event chain and prints the comparison table
with the published-platform reference costs.
"""

from spikebench import PlatformRecord, PowerMeasurement, comparison_report, energy_report
from spikebench.energy import format_comparison_table, format_energy_report

EVENTS = 235_000_000
server = PlatformRecord("server", PowerMeasurement(current=1.15), 9.1, EVENTS)
embedded = PlatformRecord("embedded", PowerMeasurement(current=0.08), 30.0, EVENTS)

for record in (server, embedded):
    report = energy_report(record)
    print(format_energy_report(report, prefix=f"energy.{record.label}"))

cmp = comparison_report(server, embedded)
print(format_comparison_table(cmp))

print("with an idle baseline subtracted the picture shifts:")
for baseline_server, baseline_embedded in ((190.0, 8.8),):
    adjusted = comparison_report(server, embedded,
                                 baseline_a_w=baseline_server,
                                 baseline_b_w=baseline_embedded)
    print(f"  baseline {baseline_server} W / {baseline_embedded} W -> "
          f"energy ratio {adjusted.energy_ratio_ab:.2f}x, "
          f"{adjusted.a.joule_per_event*1e6:.2f} / "
          f"{adjusted.b.joule_per_event*1e6:.2f} uJ per event")
