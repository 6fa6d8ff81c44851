"""Command-line entry point.

Subcommands:

* ``run``        execute a benchmark run, write raster + metrics (+ energy
                 report when power inputs are configured)
* ``calibrate``  find the excitatory weight scale hitting the target rate
                 and write a derived config
* ``report``     turn measured electrical inputs into the energy report
                 and, with two platform records, the comparison table

Exit codes: 0 success, 1 runtime failure, 2 validation failure.

Single-host multi-rank runs execute ranks as threads (``--ranks N``,
transport memory or tcp).  Multi-host runs give each invocation one rank:
``--rank N --cluster FILE`` where FILE holds `rank host:port` lines; each
rank process writes rank-local artifacts.
"""

import argparse
import os
import sys
from dataclasses import replace as dc_replace

from . import distributed, engine as engine_mod, network as network_mod
from .config import (
    RunConfig,
    apply_overrides,
    emit_config,
    load_bundled_config,
    parse_config,
)
from .energy import (
    comparison_report,
    energy_report,
    format_comparison_table,
    format_energy_report,
)
from .errors import (
    CalibrationError,
    ConfigError,
    SpikebenchError,
    UndefinedMetricError,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _load_config(args) -> RunConfig:
    if args.config:
        if os.path.exists(args.config):
            cfg = parse_config(args.config)
        else:
            cfg = load_bundled_config(args.config)
    else:
        cfg = RunConfig()
    cfg = apply_overrides(cfg, args.set or [])
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_values(**{"grid.seed": args.seed, "stimulus.seed": args.seed + 1})
    if getattr(args, "ranks", None) is not None:
        cfg = cfg.with_values(**{"run.ranks": args.ranks})
    if getattr(args, "transport", None) is not None:
        cfg = cfg.with_values(**{"run.transport": args.transport})
    return cfg.require_valid()


def _provenance(cfg: RunConfig) -> dict:
    return {f"config.{k}": v for k, v in cfg.values.items()}


def _write_kv(path, mapping: dict) -> None:
    with open(path, "w") as fh:
        for key, value in mapping.items():
            fh.write(f"{key} = {value}\n")


def _read_kv(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, _, raw = line.partition("=")
            out[key.strip()] = raw.strip()
    return out


def _metrics_doc(cfg: RunConfig, metrics, checksum: str, equivalent: int) -> dict:
    doc = dict(_provenance(cfg))
    doc.update({
        "metrics.n_neurons": metrics.n_neurons,
        "metrics.simulated_seconds": repr(metrics.simulated_seconds),
        "metrics.wall_seconds": repr(metrics.wall_seconds),
        "metrics.total_spikes": metrics.total_spikes,
        "metrics.internal_synaptic_events": metrics.internal_synaptic_events,
        "metrics.external_synaptic_events": metrics.external_synaptic_events,
        "metrics.total_events": metrics.total_events,
        "metrics.mean_rate_hz": repr(metrics.mean_rate_hz),
        "metrics.events_per_second": repr(metrics.events_per_second),
        "metrics.equivalent_synapses": equivalent,
        "metrics.raster_sha256": checksum,
    })
    return doc


def _write_raster(cfg: RunConfig, out_dir: str, steps, gids, suffix: str = "") -> str:
    fmt = cfg["run.raster_format"]
    if fmt == "binary":
        path = os.path.join(out_dir, f"raster{suffix}.bin")
        engine_mod.save_raster_binary(path, steps, gids)
    else:
        path = os.path.join(out_dir, f"raster{suffix}.csv")
        engine_mod.save_raster_csv(path, steps, gids, provenance=_provenance(cfg))
    return path


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    spec = cfg.grid_spec()
    net = network_mod.build_network(spec, dt_ms=cfg["run.dt_ms"], model=cfg["model.kind"])
    stim = cfg.stimulus()
    lif = cfg.lif_params()
    stdp = cfg.stdp_params()
    equivalent = network_mod.count_equivalent_synapses(
        net, cfg["stimulus.ext_synapses_per_neuron"]
    )

    if args.rank is not None:
        if not args.cluster:
            raise ConfigError(["--rank requires --cluster FILE"])
        cluster = distributed.parse_cluster_file(args.cluster)
        metrics, (steps, gids), _ = distributed.run_single_rank(
            net, rank=args.rank, seconds=cfg["run.simulated_seconds"], stim=stim,
            n_ranks=cfg["run.ranks"], cluster=cluster, lif_params=lif,
            stdp_params=stdp, w_exc_scale=cfg["run.w_exc_scale"],
            timeout=cfg["run.timeout_seconds"],
        )
        suffix = f"_rank{args.rank}"
    else:
        metrics, (steps, gids), _, _ = distributed.run_simulation(
            net, seconds=cfg["run.simulated_seconds"], stim=stim,
            n_ranks=cfg["run.ranks"], transport=cfg["run.transport"],
            lif_params=lif, stdp_params=stdp,
            w_exc_scale=cfg["run.w_exc_scale"], timeout=cfg["run.timeout_seconds"],
        )
        suffix = ""

    checksum = engine_mod.raster_checksum(steps, gids)
    raster_path = _write_raster(cfg, out_dir, steps, gids, suffix)
    metrics_path = os.path.join(out_dir, f"metrics{suffix}.kv")
    _write_kv(metrics_path, _metrics_doc(cfg, metrics, checksum, equivalent))

    wrote = [raster_path, metrics_path]
    labels = cfg.power_labels()
    if labels and args.rank is None:
        lines = [f"{k} = {v}" for k, v in _provenance(cfg).items()]
        for label in labels:
            record = cfg.power_record(label)
            if record.synaptic_events == 0:
                record = dc_replace(record, synaptic_events=metrics.total_events)
            report = energy_report(record, baseline_w=cfg[f"power.{label}.baseline_w"])
            lines.append(format_energy_report(report, prefix=f"energy.{label}").rstrip())
        energy_path = os.path.join(out_dir, "energy.kv")
        with open(energy_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        wrote.append(energy_path)

    print(
        f"run complete: {metrics.total_spikes} spikes, "
        f"mean rate {metrics.mean_rate_hz:.3f} Hz, "
        f"{metrics.total_events} synaptic events "
        f"({metrics.events_per_second:.3g} events/s), "
        f"equivalent synapses {equivalent}"
    )
    print(f"raster sha256 {checksum}")
    for path in wrote:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    spec = cfg.grid_spec()
    net = network_mod.build_network(spec, dt_ms=cfg["run.dt_ms"], model=cfg["model.kind"])
    stim = cfg.stimulus()
    lif = cfg.lif_params()
    stdp = cfg.stdp_params()

    dt_ms = cfg["run.dt_ms"]
    warmup_steps = int(round(args.warmup_seconds * 1000.0 / dt_ms))
    probe_steps = int(round(args.probe_seconds * 1000.0 / dt_ms))

    def probe(scale: float) -> float:
        # rate is read over the post-warmup window so the adaptation
        # transient does not bias the estimate of the long-run rate
        _, (steps, _), _, _ = distributed.run_simulation(
            net, seconds=args.warmup_seconds + args.probe_seconds, stim=stim,
            n_ranks=1, lif_params=lif, stdp_params=stdp, w_exc_scale=scale,
        )
        return engine_mod.rate_in_window(
            steps, net.n_neurons, dt_ms, warmup_steps, warmup_steps + probe_steps
        )

    scale, achieved = engine_mod.calibrate_rate(
        probe, target_hz=args.target_hz, band_hz=args.band_hz,
        initial_scale=cfg["run.w_exc_scale"],
    )
    derived = cfg.with_values(**{"run.w_exc_scale": scale})
    out_path = os.path.join(out_dir, "calibrated.cfg")
    with open(out_path, "w") as fh:
        fh.write(emit_config(derived))
    print(f"calibrated w_exc scale {scale!r} (probe rate {achieved:.3f} Hz)")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    labels = cfg.power_labels()
    if not labels:
        raise ConfigError(
            ["no power records configured; set power.<label>.current (labels: server, embedded)"]
        )
    events_from_metrics = None
    if args.metrics:
        doc = _read_kv(args.metrics)
        if "metrics.total_events" in doc:
            events_from_metrics = int(doc["metrics.total_events"])

    records = {}
    for label in labels:
        record = cfg.power_record(label)
        if record.synaptic_events == 0 and events_from_metrics:
            record = dc_replace(record, synaptic_events=events_from_metrics)
        if record.synaptic_events == 0:
            raise UndefinedMetricError(
                f"power.{label}.events is 0 and no --metrics document supplied one; "
                "joule-per-event needs a positive event count"
            )
        records[label] = record

    lines = []
    for label, record in records.items():
        report = energy_report(record, baseline_w=cfg[f"power.{label}.baseline_w"])
        lines.append(format_energy_report(report, prefix=f"energy.{label}").rstrip())
    energy_path = os.path.join(out_dir, "energy.kv")
    with open(energy_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {energy_path}")

    if len(records) == 2:
        a, b = (records[lab] for lab in labels)
        cmp = comparison_report(
            a, b,
            baseline_a_w=cfg[f"power.{labels[0]}.baseline_w"],
            baseline_b_w=cfg[f"power.{labels[1]}.baseline_w"],
        )
        table = format_comparison_table(cmp)
        table_path = os.path.join(out_dir, "comparison.txt")
        with open(table_path, "w") as fh:
            fh.write(table)
        print(table)
        print(f"wrote {table_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikebench",
        description="columnar spiking-network benchmark simulator and energy reporter",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file path or bundled name (e.g. paper-desk)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, help="override grid and stimulus seeds")

    p_run = sub.add_parser("run", help="execute a benchmark run")
    common(p_run)
    p_run.add_argument("--ranks", type=int, help="number of ranks (overrides run.ranks)")
    p_run.add_argument("--rank", type=int,
                       help="run exactly this rank of a multi-process cluster run")
    p_run.add_argument("--cluster", help="cluster file with `rank host:port` lines")
    p_run.add_argument("--transport", choices=["memory", "tcp"],
                       help="transport for single-host multi-rank runs")
    p_run.set_defaults(func=cmd_run)

    p_cal = sub.add_parser("calibrate", help="calibrate the excitatory weight scale")
    common(p_cal)
    p_cal.add_argument("--target-hz", type=float, default=5.1)
    p_cal.add_argument("--band-hz", type=float, default=1.5)
    p_cal.add_argument("--probe-seconds", type=float, default=0.5)
    p_cal.add_argument("--warmup-seconds", type=float, default=0.5)
    p_cal.set_defaults(func=cmd_calibrate)

    p_rep = sub.add_parser("report", help="energy report from measured inputs")
    common(p_rep)
    p_rep.add_argument("--metrics", help="metrics.kv document supplying the event count")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UndefinedMetricError) as err:
        if isinstance(err, ConfigError):
            for problem in err.problems:
                print(f"config error: {problem}", file=sys.stderr)
        else:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except CalibrationError as err:
        print(f"calibration failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except SpikebenchError as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
