"""Command-line entry point: ``latqsim <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config
from .noise import THREADS_ENV

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _cmd_run(args) -> int:
    from .runner import run

    config = parse_config(args.config)
    if args.prefix:
        config.output.prefix = args.prefix
    result = run(config, write_figure=False if args.no_figure else None)
    for path in result.files:
        print(path)
    return EXIT_OK


def _cmd_dump_hamiltonian(args) -> int:
    from .models import build_model
    from .pauli import dumps

    config = parse_config(args.config)
    hamiltonian, layout = build_model(config.model)
    text = dumps(hamiltonian)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.layout:
        Path(args.layout).write_text(json.dumps(layout.to_json(), indent=2) + "\n")
    return EXIT_OK


def _cmd_transpile_report(args) -> int:
    from .backend import Backend
    from .compiler import TrotterPlan, trotterize
    from .models import build_model

    config = parse_config(args.config)
    hamiltonian, _ = build_model(config.model)
    dt = args.dt if args.dt is not None else config.trotter.dt
    steps = args.steps if args.steps is not None else config.trotter.n_steps
    circuit = trotterize(TrotterPlan(hamiltonian, dt, steps, config.trotter.term_order))
    basis = args.basis or config.transpile.basis
    topo = args.topology or config.transpile.topology or "line"
    layout = args.initial_layout or config.transpile.initial_layout
    reference = Backend(basis=basis, initial_layout=layout).compile(circuit)
    target = Backend(basis=basis, topology=topo, initial_layout=layout).compile(circuit)
    rows = [
        ("entangling_count", reference.entangling_count, target.entangling_count),
        ("swap_count", reference.swap_count, target.swap_count),
        ("depth", reference.depth, target.depth),
        ("two_qubit_gates", reference.circuit.two_qubit_count(), target.circuit.two_qubit_count()),
    ]
    out = [f"# basis: {basis}", f"# topology: {topo}", f"# dt: {dt!r}", f"# n_steps: {steps}", "metric,all_to_all,target,delta"]
    out += [f"{m},{a},{b},{b - a}" for m, a, b in rows]
    sys.stdout.write("\n".join(out) + "\n")
    return EXIT_OK


def _read_series(paths):
    from .observables import TimeSeries

    return [TimeSeries.from_csv(Path(p).read_text()) for p in paths]


def _cmd_plotdata(args) -> int:
    from .report import plotdata

    series = _read_series(args.files)
    labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.files]
    text = plotdata(series, labels)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if args.figure:
        from .plotting import plot_series

        plot_series(series, labels, args.figure)
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .report import compare

    reference, other = _read_series([args.reference, args.other])
    report = compare(reference, other)
    text = json.dumps(report.to_dict(), indent=2) + "\n" if args.json else report.to_text()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    # argparse usage errors exit with 2, matching the config-error code
    p = argparse.ArgumentParser(prog="latqsim", description="Lattice-model quantum simulation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--prefix", help="override output.prefix")
    r.add_argument("--no-figure", action="store_true", help="skip figure rendering")
    r.set_defaults(func=_cmd_run)

    d = sub.add_parser("dump-hamiltonian", help="write the model's Pauli sum as text")
    d.add_argument("config")
    d.add_argument("-o", "--output", help="file for the Pauli sum (default: stdout)")
    d.add_argument("--layout", help="file for the qubit layout as JSON")
    d.set_defaults(func=_cmd_dump_hamiltonian)

    t = sub.add_parser("transpile-report", help="entangling-gate counts: all-to-all vs a target topology")
    t.add_argument("config")
    t.add_argument("--topology", help="line, ring, complete (optionally :size) or an edge-list file")
    t.add_argument("--basis", choices=("native_pauli", "cnot_rz"))
    t.add_argument("--initial-layout", choices=("trivial", "greedy"))
    t.add_argument("--steps", type=int, help="override trotter.n_steps")
    t.add_argument("--dt", type=float, help="override trotter.dt")
    t.set_defaults(func=_cmd_transpile_report)

    pd = sub.add_parser("plotdata", help="merge result CSVs into aligned gnuplot columns")
    pd.add_argument("files", nargs="+")
    pd.add_argument("--labels", help="comma-separated series labels (default: file stems)")
    pd.add_argument("-o", "--output", help="output file (default: stdout)")
    pd.add_argument("--figure", help="also render the merged series to this image file")
    pd.set_defaults(func=_cmd_plotdata)

    c = sub.add_parser("compare", help="deviation of OTHER from REFERENCE")
    c.add_argument("reference")
    c.add_argument("other")
    c.add_argument("--json", action="store_true", help="JSON instead of CSV-style text")
    c.add_argument("-o", "--output", help="output file (default: stdout)")
    c.set_defaults(func=_cmd_compare)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ[THREADS_ENV] = str(max(1, args.threads))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
