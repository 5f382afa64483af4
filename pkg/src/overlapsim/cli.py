"""Command-line surface: validate, fit, optimize, simulate, compare,
sweep-depth, gen.

Exit codes: 0 success, 1 domain violation (invalid graph, infeasible plan,
degenerate fit), 2 I/O or parse failure. Every command is deterministic
given its inputs and seed. Report commands write figures next to their
delimited output unless --no-plot is passed.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .batching import InfeasibleGroup
from .collective import (
    MAX_DEPTH,
    CollectiveSpec,
    Pattern,
    ReduceModel,
    UnsupportedWorkerCount,
    adaptive_depth,
    collective_time,
)
from .costmodel import (
    DegenerateInput,
    NetworkModel,
    batching_threshold,
    load_model,
    measurements_from_csv,
    fit_network_model,
    round_us,
)
from .dag import DagFormatError, dag_to_json, load_dag, validate_dag
from .generator import PRESETS, gen_dag
from .ordering import CycleIntroduced
from .pipeline import run_simulation
from .sim import DeadlockDetected, DepthPolicy, EventLog, SimConfig, compare_scenarios

_DOMAIN_ERRORS = (
    InfeasibleGroup,
    UnsupportedWorkerCount,
    DegenerateInput,
    CycleIntroduced,
    DeadlockDetected,
    ValueError,
)

DEFAULT_SWEEP_SIZES = (
    4_096, 16_384, 65_536, 262_144, 1_048_576,
    4_194_304, 16_777_216, 67_108_864, 104_857_600,
)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_dag(path: str):
    try:
        return load_dag(path)
    except OSError as exc:
        _fail(2, f"cannot read {path}: {exc}")
    except (json.JSONDecodeError, DagFormatError) as exc:
        _fail(2, f"{path}: {exc}")


def _read_model(path: str) -> NetworkModel:
    try:
        return load_model(path)
    except OSError as exc:
        _fail(2, f"cannot read {path}: {exc}")
    except (json.JSONDecodeError, ValueError) as exc:
        _fail(2, f"{path}: {exc}")
    raise AssertionError("unreachable")


def _emit_json(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def sim_options(fn):
    options = [
        click.option("--model", "model_path", required=True, type=click.Path(),
                     help="Fitted network model JSON."),
        click.option("--workers", default=4, show_default=True, type=int),
        click.option("--pattern", default="shuffle", show_default=True,
                     type=click.Choice([p.value for p in Pattern])),
        click.option("--depth", default=None, type=click.IntRange(1, MAX_DEPTH),
                     help="Fixed collective depth (overrides adaptive)."),
        click.option("--adaptive-depth", is_flag=True, default=False,
                     help="Choose depth per group from size and threshold (default)."),
        click.option("--reduce-rate", default=400.0, show_default=True, type=float,
                     help="Application-layer reduce throughput, bytes/us."),
        click.option("--reduce-overhead", default=10.0, show_default=True, type=float,
                     help="Fixed cost per reduce call, us."),
        click.option("--no-batching", is_flag=True, default=False),
        click.option("--no-enforce", is_flag=True, default=False),
        click.option("--no-fp-scheduling", is_flag=True, default=False),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(model_path, workers, pattern, depth, adaptive_depth_flag,
                  reduce_rate, reduce_overhead, no_batching, no_enforce,
                  no_fp_scheduling) -> SimConfig:
    if depth is not None and adaptive_depth_flag:
        raise click.UsageError("--depth and --adaptive-depth are mutually exclusive")
    policy = DepthPolicy(adaptive=False, fixed=depth) if depth is not None else DepthPolicy()
    try:
        return SimConfig(
            workers=workers,
            network=_read_model(model_path),
            reduce=ReduceModel(rate_bytes_per_us=reduce_rate,
                               per_reduce_overhead_us=reduce_overhead),
            pattern=Pattern(pattern),
            depth_policy=policy,
            enforce_order=not no_enforce,
            batching=not no_batching,
            fp_scheduling=not no_fp_scheduling,
        )
    except _DOMAIN_ERRORS as exc:
        _fail(1, str(exc))
        raise AssertionError("unreachable")


@click.group()
@click.version_option()
def main():
    """Optimize and simulate decentralized-aggregation training iterations."""


@main.command()
@click.argument("dag_path", type=click.Path())
def validate(dag_path):
    """Check a graph file; exit 0 only when it is well-formed."""
    dag = _read_dag(dag_path)
    report = validate_dag(dag)
    for line in report.warnings:
        click.echo(f"warning: {line}")
    for line in report.errors:
        click.echo(f"violation: {line}")
    if not report.ok:
        sys.exit(1)
    click.echo(f"ok: {len(dag.ops)} ops, {len(dag.params)} parameters")


@main.command()
@click.argument("measurements_csv", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Model JSON path (default stdout).")
def fit(measurements_csv, out):
    """Fit the linear transfer-time model from measurement samples."""
    try:
        measurements = measurements_from_csv(measurements_csv)
    except OSError as exc:
        _fail(2, f"cannot read {measurements_csv}: {exc}")
    except ValueError as exc:
        _fail(2, f"{measurements_csv}: {exc}")
    try:
        model = fit_network_model(measurements)
    except DegenerateInput as exc:
        _fail(1, str(exc))
    _emit_json(model.to_json(), out)


@main.command()
@click.argument("dag_path", type=click.Path())
@sim_options
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for the emitted artifacts.")
def optimize(dag_path, out_dir, model_path, workers, pattern, depth, adaptive_depth,
             reduce_rate, reduce_overhead, no_batching, no_enforce, no_fp_scheduling):
    """Emit the enforced graph, control-edge sidecar, batch plan, and
    transfer schedule as JSON artifacts."""
    dag = _read_dag(dag_path)
    report = validate_dag(dag)
    if not report.ok:
        _fail(1, "; ".join(report.errors))
    config = _build_config(model_path, workers, pattern, depth, adaptive_depth,
                           reduce_rate, reduce_overhead, no_batching, no_enforce,
                           no_fp_scheduling)
    try:
        _, artifacts = run_simulation(dag, config)
    except _DOMAIN_ERRORS as exc:
        _fail(1, str(exc))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dag_enforced.json").write_text(
        json.dumps(dag_to_json(artifacts.enforced_dag), indent=2) + "\n", encoding="utf-8")
    (out / "control_edges.json").write_text(
        json.dumps([{"from_op": e.from_op, "to_op": e.to_op}
                    for e in artifacts.control_edges], indent=2) + "\n", encoding="utf-8")
    (out / "activation_order.json").write_text(
        json.dumps({"param_ids": list(artifacts.order.param_ids),
                    "cumulative_cost_us": [round_us(c) for c in
                                           artifacts.order.cumulative_cost_us]},
                   indent=2) + "\n", encoding="utf-8")
    (out / "batch_plan.json").write_text(
        json.dumps(artifacts.batch_plan.to_json(), indent=2) + "\n", encoding="utf-8")
    (out / "transfer_schedule.json").write_text(
        json.dumps(artifacts.transfer_schedule.to_json(), indent=2) + "\n", encoding="utf-8")
    click.echo(
        f"wrote {len(artifacts.control_edges)} control edges and "
        f"{len(artifacts.batch_plan.groups)} transfer groups"
    )


@main.command()
@click.argument("dag_path", type=click.Path())
@sim_options
@click.option("--out", type=click.Path(), default=None, help="Metrics JSON path (default stdout).")
@click.option("--events", "events_path", type=click.Path(), default=None,
              help="Write the event log as newline-delimited JSON.")
def simulate(dag_path, out, events_path, model_path, workers, pattern, depth,
             adaptive_depth, reduce_rate, reduce_overhead, no_batching, no_enforce,
             no_fp_scheduling):
    """Simulate one iteration and report T, C, N, alpha, rho, U."""
    dag = _read_dag(dag_path)
    report = validate_dag(dag)
    if not report.ok:
        _fail(1, "; ".join(report.errors))
    config = _build_config(model_path, workers, pattern, depth, adaptive_depth,
                           reduce_rate, reduce_overhead, no_batching, no_enforce,
                           no_fp_scheduling)
    log = EventLog() if events_path else None
    try:
        metrics, _ = run_simulation(dag, config, event_log=log)
    except _DOMAIN_ERRORS as exc:
        _fail(1, str(exc))
    if events_path:
        with open(events_path, "w", encoding="utf-8") as fh:
            for event in log.events:
                fh.write(json.dumps(event) + "\n")
    _emit_json(metrics.to_json(), out)


def _write_csv(path: str | None, header: list[str], rows: list[list]) -> None:
    if path:
        fh = open(path, "w", newline="", encoding="utf-8")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path:
            fh.close()


@main.command()
@click.argument("dag_path", type=click.Path())
@sim_options
@click.option("--out", type=click.Path(), default=None, help="CSV path (default stdout).")
@click.option("--no-plot", is_flag=True, default=False,
              help="Skip the figure rendered next to the CSV.")
def compare(dag_path, out, no_plot, model_path, workers, pattern, depth, adaptive_depth,
            reduce_rate, reduce_overhead, no_batching, no_enforce, no_fp_scheduling):
    """Ablation table: baseline plus one row per cumulative optimization."""
    dag = _read_dag(dag_path)
    report = validate_dag(dag)
    if not report.ok:
        _fail(1, "; ".join(report.errors))
    config = _build_config(model_path, workers, pattern, depth, adaptive_depth,
                           reduce_rate, reduce_overhead, no_batching, no_enforce,
                           no_fp_scheduling)
    try:
        rows = compare_scenarios(dag, config)
    except _DOMAIN_ERRORS as exc:
        _fail(1, str(exc))
    table = [
        [name, round_us(m.T_us), round_us(m.C_us), round_us(m.N_us),
         repr(m.alpha), repr(m.rho), repr(m.U)]
        for name, m in rows
    ]
    _write_csv(out, ["scenario", "T_us", "C_us", "N_us", "alpha", "rho", "U"], table)
    if out and not no_plot:
        from .plots import save_scenario_figure

        figure_path = Path(out).with_suffix(".png")
        save_scenario_figure([(name, m.to_json()) for name, m in rows], figure_path)
        click.echo(f"figure: {figure_path}", err=True)


@main.command(name="sweep-depth")
@click.option("--model", "model_path", required=True, type=click.Path(),
              help="Fitted network model JSON.")
@click.option("--workers", default=4, show_default=True, type=int)
@click.option("--pattern", default="shuffle", show_default=True,
              type=click.Choice([p.value for p in Pattern]))
@click.option("--reduce-rate", default=400.0, show_default=True, type=float)
@click.option("--reduce-overhead", default=10.0, show_default=True, type=float)
@click.option("--sizes", default=",".join(str(s) for s in DEFAULT_SWEEP_SIZES),
              show_default=True, help="Comma-separated payload sizes in bytes.")
@click.option("--depths", default="1,2,4,8", show_default=True,
              help="Comma-separated fixed depths to sweep.")
@click.option("--out", type=click.Path(), default=None, help="CSV path (default stdout).")
@click.option("--no-plot", is_flag=True, default=False,
              help="Skip the figure rendered next to the CSV.")
def sweep_depth(model_path, workers, pattern, reduce_rate, reduce_overhead,
                sizes, depths, out, no_plot):
    """Collective time across payload sizes for fixed depths and the
    adaptive policy."""
    model = _read_model(model_path)
    reduce_model = ReduceModel(rate_bytes_per_us=reduce_rate,
                               per_reduce_overhead_us=reduce_overhead)
    try:
        size_list = [int(s) for s in sizes.split(",") if s]
        depth_list = [int(d) for d in depths.split(",") if d]
        if not size_list or not depth_list:
            raise ValueError("need at least one size and one depth")
        threshold = batching_threshold(model)
        rows = []
        for size in size_list:
            row: dict = {"size_bytes": size}
            for d in depth_list:
                spec = CollectiveSpec(pattern=Pattern(pattern), workers=workers,
                                      data_bytes=size, depth=d)
                row[f"depth_{d}"] = round_us(collective_time(spec, model, reduce_model))
            chosen = adaptive_depth(size, threshold)
            spec = CollectiveSpec(pattern=Pattern(pattern), workers=workers,
                                  data_bytes=size, depth=chosen)
            row["adaptive"] = round_us(collective_time(spec, model, reduce_model))
            row["adaptive_depth"] = chosen
            rows.append(row)
    except _DOMAIN_ERRORS as exc:
        _fail(1, str(exc))

    header = (["size_bytes"] + [f"depth_{d}" for d in depth_list]
              + ["adaptive", "adaptive_depth"])
    _write_csv(out, header, [[row[h] for h in header] for row in rows])
    if out and not no_plot:
        from .plots import save_depth_sweep_figure

        figure_path = Path(out).with_suffix(".png")
        labels = [f"depth_{d}" for d in depth_list] + ["adaptive"]
        save_depth_sweep_figure(rows, labels, figure_path)
        click.echo(f"figure: {figure_path}", err=True)


@main.command()
@click.option("--ops", "n_ops", required=True, type=int, help="Total op count.")
@click.option("--params", "n_params", required=True, type=int, help="Parameter count.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--preset", default="small-heavy", show_default=True,
              type=click.Choice(PRESETS))
@click.option("--fp-fraction", default=0.3, show_default=True, type=float,
              help="Share of compute time spent in the forward pass.")
@click.option("--out", type=click.Path(), default=None, help="DAG JSON path (default stdout).")
def gen(n_ops, n_params, seed, preset, fp_fraction, out):
    """Generate a synthetic training graph."""
    try:
        dag = gen_dag(n_ops, n_params, seed, preset=preset, fp_fraction=fp_fraction)
    except ValueError as exc:
        _fail(1, str(exc))
    _emit_json(dag_to_json(dag), out)


if __name__ == "__main__":
    main()
