"""Command line entry point: ``logicnn exp1``, ``logicnn exp2``, ``logicnn export-circuit``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .data import DataError
from .discrete import circuit_from_dict, export_dot
from .expressions import export_expressions
from .harness import (
    ALL_MODELS,
    DATASETS,
    GATE_MODELS,
    default_config,
    load_config,
    render_report,
    run_experiment1,
    run_experiment2,
    write_report,
)
from .network import discretize_network, network_from_dict


def _models(choice: str, pool: tuple[str, ...]) -> tuple[str, ...]:
    return pool if choice in ("both", "all") else (choice,)


def _seeds(text: str) -> tuple[int, ...]:
    """``N`` means seeds 0..N-1; ``a,b,c`` lists seeds explicitly."""
    if "," in text:
        return tuple(int(t) for t in text.split(",") if t.strip())
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("need at least one seed")
    return tuple(range(n))


def _emit(report, args, name: str) -> None:
    if args.out:
        paths = write_report(report, args.out, name)
        print(f"wrote {', '.join(str(p) for p in paths.values())}", file=sys.stderr)
    sys.stdout.buffer.write(render_report(report, args.format))
    sys.stdout.flush()


def cmd_exp1(args) -> int:
    config = default_config("exp1")
    if args.config:
        config = load_config(args.config, config)
    changes = {}
    if args.model:
        changes["models"] = _models(args.model, GATE_MODELS)
    if args.gates:
        changes["gates"] = tuple(g.strip() for g in args.gates.split(",") if g.strip())
    if args.seeds:
        changes["seeds"] = args.seeds
    if args.workers:
        changes["workers"] = args.workers
    if args.out:
        changes["out_dir"] = args.out
    config = config.replace(**changes)
    t0 = time.perf_counter()
    report = run_experiment1(config)
    print(f"exp1 finished in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    _emit(report, args, "exp1")
    return 0


def cmd_exp2(args) -> int:
    config = default_config("exp2", args.dataset)
    if args.config:
        config = load_config(args.config, config)
    changes = {}
    if args.model:
        changes["models"] = _models(args.model, ALL_MODELS)
    if args.seeds:
        changes["seeds"] = args.seeds
    if args.subsample is not None:
        changes["subsample"] = args.subsample
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    if args.workers:
        changes["workers"] = args.workers
    if args.out:
        changes["out_dir"] = args.out
    config = config.replace(**changes)
    t0 = time.perf_counter()
    report = run_experiment2(config, args.data_dir)
    print(f"exp2 finished in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    _emit(report, args, f"exp2_{config.dataset}")
    return 0


def cmd_export(args) -> int:
    data = json.loads(Path(args.checkpoint).read_text())
    fmt = data.get("format")
    if fmt == "logicnn-network":
        circuit = discretize_network(network_from_dict(data))
    elif fmt == "logicnn-circuit":
        circuit = circuit_from_dict(data)
    else:
        raise ValueError(f"{args.checkpoint} is neither a network checkpoint nor a circuit file")
    names = data.get("input_names")
    if args.raw_names:
        names = None
    if args.format == "dot":
        text = export_dot(circuit, names)
    else:
        text = export_expressions(circuit, names, node_budget=args.node_budget or None)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logicnn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seeds", type=_seeds, help="seed count N (0..N-1) or a comma list")
        sp.add_argument("--config", help="key = value config file applied over the defaults")
        sp.add_argument("--out", help="directory for reports and artifacts")
        sp.add_argument("--format", choices=("text", "json", "tsv"), default="text",
                        help="report format printed to stdout")
        sp.add_argument("--workers", type=int, help="parallel worker processes")

    e1 = sub.add_parser("exp1", help="recover each of the 16 gates with a single neuron")
    e1.add_argument("--model", choices=GATE_MODELS + ("both",))
    e1.add_argument("--gates", help="comma separated gate names, e.g. AND,XOR")
    common(e1)
    e1.set_defaults(func=cmd_exp1)

    e2 = sub.add_parser("exp2", help="train and score models on a tabular dataset")
    e2.add_argument("--dataset", choices=DATASETS, required=True)
    e2.add_argument("--model", choices=ALL_MODELS + ("all",))
    e2.add_argument("--subsample", type=int, help="train on a stratified subset of N rows")
    e2.add_argument("--epochs", type=int)
    e2.add_argument("--data-dir", help="directory holding the dataset files")
    common(e2)
    e2.set_defaults(func=cmd_exp2)

    ex = sub.add_parser("export-circuit", help="print a trained network as expressions or DOT")
    ex.add_argument("--checkpoint", required=True, help="network checkpoint or circuit file")
    ex.add_argument("--format", choices=("expr", "dot"), default="expr")
    ex.add_argument("--node-budget", type=int, default=64,
                    help="max operators inlined per expression, 0 for unlimited")
    ex.add_argument("--raw-names", action="store_true", help="name inputs x0, x1, ...")
    ex.add_argument("--output", "-o")
    ex.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ValueError, OSError, KeyError) as exc:
        print(f"logicnn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
