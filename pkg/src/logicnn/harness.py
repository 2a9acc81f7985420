"""Experiment configs, runners and report rendering for the gate and tabular
benchmarks.

Config files are plain ``key = value`` lines; ``#`` starts a comment and list
values are comma separated::

    # short breast cancer run
    models = lnn, mlp
    seeds = 0, 1, 2
    epochs = 50
"""

from __future__ import annotations

import dataclasses
import io
import json
import platform
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .data import BinarizedDataset, prepare_dataset, split_indices
from .discrete import accuracy as circuit_accuracy
from .discrete import model_size_bytes, save_circuit
from .gates import GateKind, gate_from_name
from .network import NetworkConfig, build_network, discretize_network, save_network
from .training import TrainSpec, converge_gate, train, train_mlp, write_history

EXPERIMENTS = ("exp1", "exp2")
GATE_MODELS = ("lnn", "lgn")
ALL_MODELS = ("lnn", "lgn", "mlp")
DATASETS = ("breast", "adult")
REPORT_FORMAT = "logicnn-report"
REPORT_VERSION = 1
EXECUTION_ONLY = ("out_dir", "workers")

# architecture per dataset: (gate layers, gate width, mlp hidden widths)
ARCHITECTURES = {
    "breast": (5, 128, (8, 8)),
    "adult": (5, 256, (32, 32)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "exp1"
    models: tuple[str, ...] = GATE_MODELS
    dataset: str | None = None
    layers: int = 1
    width: int = 1
    mlp_hidden: tuple[int, ...] = ()
    seeds: tuple[int, ...] = tuple(range(10))
    gates: tuple[str, ...] = tuple(g.name for g in GateKind)
    # optimizer and schedule
    lr: float = 0.01
    max_iterations: int | None = 1000
    epochs: int = 0
    batch_size: int = 100
    loss_kind: str = "bce"
    tau: float | None = None
    eval_every: int = 1
    # data handling
    val_fraction: float = 0.0
    test_fraction: float = 0.3
    thresholds: int = 8
    subsample: int | None = None
    # network construction
    pairing: str = "random"
    lgn_init: str = "normal"
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        allowed = GATE_MODELS if self.experiment == "exp1" else ALL_MODELS
        if not self.models or any(m not in allowed for m in self.models):
            raise ValueError(f"models must be drawn from {allowed}, got {self.models}")
        if len(set(self.models)) != len(self.models):
            raise ValueError("models listed twice")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.experiment == "exp1":
            for g in self.gates:
                gate_from_name(g)
            if not self.gates:
                raise ValueError("at least one gate is required")
            if self.max_iterations is None or self.max_iterations < 1:
                raise ValueError("exp1 needs max_iterations >= 1")
        else:
            if self.dataset not in DATASETS:
                raise ValueError(f"exp2 needs dataset in {DATASETS}, got {self.dataset!r}")
            if self.epochs < 1:
                raise ValueError("exp2 needs epochs >= 1")
            if not 0 <= self.val_fraction < 1:
                raise ValueError("val_fraction must be in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def train_spec(self, seed: int) -> TrainSpec:
        return TrainSpec(
            epochs=self.epochs,
            batch_size=self.batch_size,
            loss_kind=self.loss_kind,
            tau=self.tau,
            lr=self.lr,
            shuffle_seed=seed,
            max_iterations=self.max_iterations,
            eval_every=self.eval_every,
            select_best=self.val_fraction > 0,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def run_settings(self) -> dict:
        """Everything that shapes results; output location and worker count do not."""
        d = self.to_dict()
        for key in EXECUTION_ONLY:
            d.pop(key)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls(**fixed)


def default_config(experiment: str, dataset: str | None = None) -> ExperimentConfig:
    """Reference settings: gate recovery runs 1000 Adam steps at lr 0.01;
    tabular runs train up to 200 epochs at batch size 100."""
    if experiment == "exp1":
        return ExperimentConfig()
    if experiment != "exp2":
        raise ValueError(f"unknown experiment {experiment!r}")
    if dataset not in ARCHITECTURES:
        raise ValueError(f"unknown dataset {dataset!r}; choose from {DATASETS}")
    layers, width, hidden = ARCHITECTURES[dataset]
    return ExperimentConfig(
        experiment="exp2", models=ALL_MODELS, dataset=dataset, layers=layers, width=width,
        mlp_hidden=hidden, gates=(), max_iterations=None, epochs=200, batch_size=100,
        loss_kind="ce", val_fraction=0.2, eval_every=1 if dataset == "breast" else 5,
    )


# -- config files -------------------------------------------------------------

_NONE = ("", "none", "null")


def _parse_value(raw: str, current: Any, name: str):
    text = raw.strip()
    if isinstance(current, tuple) or name in ("models", "seeds", "gates", "mlp_hidden"):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if name in ("seeds", "mlp_hidden"):
            return tuple(int(t) for t in items)
        return tuple(items)
    if text.lower() in _NONE and name in _OPTIONAL:
        return None
    kind = _FIELD_TYPES.get(name, str)
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


_FIELD_TYPES = {"layers": int, "width": int, "lr": float, "max_iterations": int, "epochs": int,
                "batch_size": int, "tau": float, "eval_every": int, "val_fraction": float,
                "test_fraction": float, "thresholds": int, "subsample": int, "workers": int}
_OPTIONAL = {"dataset", "max_iterations", "tau", "subsample", "out_dir"}


def parse_config_text(text: str, base: ExperimentConfig) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    changes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            changes[key] = _parse_value(value, getattr(base, key), key)
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return base.replace(**changes)


def load_config(path: str | Path, base: ExperimentConfig) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), base)


# -- reports ------------------------------------------------------------------


def environment_stamp() -> dict:
    import scipy

    return {
        "logicnn": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    environment: dict
    runs: list[dict] = field(default_factory=list)
    aggregates: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "version": REPORT_VERSION, **dataclasses.asdict(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        if data.get("format") != REPORT_FORMAT or data.get("version") != REPORT_VERSION:
            raise ValueError("not a report file of a supported version")
        return cls(data["experiment"], data["config"], data["environment"],
                   list(data["runs"]), list(data["aggregates"]))


def _plain(d: dict) -> dict:
    """The JSON view of ``d`` (tuples become lists), so reports compare equal
    after a round trip."""
    return json.loads(json.dumps(d))


def _mean(xs: Sequence[float]) -> float:
    # statistics works in exact rationals, so this is the correctly rounded mean
    return float(statistics.mean(xs))


def _stdev(xs: Sequence[float]) -> float:
    return float(statistics.stdev(xs)) if len(xs) > 1 else 0.0


def _map(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# -- experiment 1 -------------------------------------------------------------


def _exp1_task(task) -> dict:
    gate, kind, seed, max_iterations, lr, lgn_init = task
    res = converge_gate(gate_from_name(gate), kind, seed, max_iterations, lr, lgn_init=lgn_init)
    return res.to_dict()


def run_experiment1(config: ExperimentConfig) -> ExperimentReport:
    """Gate recovery for every (gate, model, seed). Runs that never reach the
    target are kept, flagged ``converged = False``, and count as
    ``max_iterations`` in the means."""
    if config.experiment != "exp1":
        raise ValueError("run_experiment1 needs an exp1 config")
    gates = [gate_from_name(g).name for g in config.gates]
    tasks = [(g, m, s, config.max_iterations, config.lr, config.lgn_init)
             for m in config.models for g in gates for s in config.seeds]
    runs = _map(_exp1_task, tasks, config.workers)
    for r in runs:
        r["model"] = r.pop("kind")
        r["gate"] = r.pop("target")
    aggregates = []
    for m in config.models:
        mine = [r for r in runs if r["model"] == m]
        for g in gates + [None]:
            rows = [r for r in mine if g is None or r["gate"] == g]
            its = [r["iterations"] for r in rows]
            aggregates.append({
                "model": m,
                "gate": g if g is not None else "ALL",
                "runs": len(rows),
                "accuracy": _mean([1.0 if r["converged"] else 0.0 for r in rows]),
                "mean_iterations": _mean(its),
                "std_iterations": _stdev(its),
                "failures": sum(not r["converged"] for r in rows),
            })
    return ExperimentReport("exp1", _plain(config.run_settings()), environment_stamp(), runs, aggregates)


# -- experiment 2 -------------------------------------------------------------


def _with_validation(train_ds: BinarizedDataset, fraction: float, seed: int):
    if fraction <= 0:
        return train_ds, None
    fit_idx, val_idx = split_indices(train_ds.y, fraction, seed)
    return train_ds.subset(fit_idx), train_ds.subset(val_idx)


def _exp2_task(task) -> dict:
    config, model, seed, data_dir = task
    train_ds, test_ds = prepare_dataset(config.dataset, seed=seed, data_dir=data_dir,
                                        test_fraction=config.test_fraction,
                                        thresholds=config.thresholds,
                                        subsample=config.subsample)
    fit_ds, val_ds = _with_validation(train_ds, config.val_fraction, seed)
    spec = config.train_spec(seed)
    row = {"model": model, "seed": seed, "train_rows": len(fit_ds),
           "val_rows": len(val_ds) if val_ds is not None else 0, "test_rows": len(test_ds),
           "features": train_ds.n_features}
    stem = f"{config.dataset}_{model}_s{seed}"
    out = Path(config.out_dir) if config.out_dir else None
    if model == "mlp":
        mlp, history, acc = train_mlp(fit_ds, spec, config.mlp_hidden, seed, test_ds, val_ds)
        row.update(test_accuracy=acc, real_test_accuracy=acc,
                   size_bytes=mlp.param_bytes(4), size_kind="float32_params",
                   architecture="x".join(str(w) for w in config.mlp_hidden))
    else:
        net = build_network(NetworkConfig(
            input_width=train_ds.n_features, layers=config.layers,
            neurons_per_layer=config.width, neuron_kind=model, seed=seed,
            class_count=train_ds.class_count, pairing=config.pairing, lgn_init=config.lgn_init))
        history = train(net, fit_ds, spec, test_ds, val_ds).history
        circuit = discretize_network(net)
        row.update(test_accuracy=circuit_accuracy(circuit, test_ds.x, test_ds.y),
                   real_test_accuracy=history[-1]["test_real_acc"],
                   size_bytes=model_size_bytes(circuit), size_kind="gate_bits",
                   architecture=f"{config.layers}x{config.width}")
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            save_network(net, out / f"{stem}.net.json", input_names=train_ds.feature_names)
            save_circuit(circuit, out / f"{stem}.circuit.json", input_names=train_ds.feature_names)
    row["selected_epoch"] = next((r["epoch"] for r in history if r.get("selected")), history[-1]["epoch"])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_history(history, out / f"{stem}.history.jsonl")
    return row


def run_experiment2(config: ExperimentConfig, data_dir: str | Path | None = None) -> ExperimentReport:
    """Train each model per seed, freeze gate nets to circuits, and score the
    frozen circuits (MLPs as is) on the held-out test rows."""
    if config.experiment != "exp2":
        raise ValueError("run_experiment2 needs an exp2 config")
    data_dir = str(data_dir) if data_dir is not None else None
    tasks = [(config, m, s, data_dir) for m in config.models for s in config.seeds]
    runs = _map(_exp2_task, tasks, config.workers)
    aggregates = []
    for m in config.models:
        rows = [r for r in runs if r["model"] == m]
        accs = [r["test_accuracy"] for r in rows]
        aggregates.append({
            "model": m,
            "runs": len(rows),
            "mean_accuracy": _mean(accs),
            "std_accuracy": _stdev(accs),
            "min_accuracy": min(accs),
            "max_accuracy": max(accs),
            "size_bytes": rows[0]["size_bytes"],
            "size_kind": rows[0]["size_kind"],
        })
    return ExperimentReport("exp2", _plain(config.run_settings()), environment_stamp(), runs, aggregates)


def run_experiment(config: ExperimentConfig, data_dir=None) -> ExperimentReport:
    if config.experiment == "exp1":
        return run_experiment1(config)
    return run_experiment2(config, data_dir)


# -- rendering ----------------------------------------------------------------

MODEL_TITLES = {"lnn": "Logic Neural Network", "lgn": "Logic Gate Network", "mlp": "Multi-Layer Perceptron"}


def format_size(n_bytes: int) -> str:
    if n_bytes < 1024:
        return f"{n_bytes}B"
    return f"{n_bytes / 1024:.1f}KB"


def _table(header: list[str], rows: list[list[str]]) -> str:
    cols = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda r: "  ".join(str(x).ljust(w) for x, w in zip(r, cols)).rstrip()
    rule = "  ".join("-" * w for w in cols)
    return "\n".join([line(header), rule] + [line(r) for r in rows])


def _text_exp1(report: ExperimentReport) -> str:
    models = report.config["models"]
    agg = {(a["model"], a["gate"]): a for a in report.aggregates}
    gates = [a["gate"] for a in report.aggregates if a["model"] == models[0]]
    header = ["Gate"]
    for m in models:
        header += [f"{m.upper()} acc", f"{m.upper()} iters", f"{m.upper()} std", f"{m.upper()} fail"]
    rows = []
    for g in gates:
        row = [g]
        for m in models:
            a = agg[(m, g)]
            row += [f"{a['accuracy']:.2f}", f"{a['mean_iterations']:.1f}",
                    f"{a['std_iterations']:.1f}", str(a["failures"])]
        rows.append(row)
    seeds = report.config["seeds"]
    title = f"Gate recovery over {len(seeds)} seeds, max {report.config['max_iterations']} iterations"
    return title + "\n\n" + _table(header, rows) + "\n"


def _text_exp2(report: ExperimentReport) -> str:
    header = ["Model", "Architecture", "Accuracy", "Std", "Space", "Runs"]
    rows = []
    for a in report.aggregates:
        arch = next(r["architecture"] for r in report.runs if r["model"] == a["model"])
        rows.append([MODEL_TITLES[a["model"]], arch, f"{a['mean_accuracy']:.3f}",
                     f"{a['std_accuracy']:.3f}", format_size(a["size_bytes"]), str(a["runs"])])
    title = f"Test accuracy on {report.config['dataset']} (gate nets scored as frozen circuits)"
    return title + "\n\n" + _table(header, rows) + "\n"


def _tsv(report: ExperimentReport) -> str:
    keys: list[str] = []
    for rec in report.runs + report.aggregates:
        keys += [k for k in rec if k not in keys]
    buf = io.StringIO()
    buf.write("\t".join(["row"] + keys) + "\n")
    for kind, recs in (("run", report.runs), ("aggregate", report.aggregates)):
        for rec in recs:
            cells = [kind] + ["" if rec.get(k) is None else str(rec.get(k, "")) for k in keys]
            buf.write("\t".join(cells) + "\n")
    return buf.getvalue()


def render_report(report: ExperimentReport, fmt: str = "text") -> bytes:
    if fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n"
    elif fmt == "tsv":
        text = _tsv(report)
    elif fmt == "text":
        text = _text_exp1(report) if report.experiment == "exp1" else _text_exp2(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return text.encode("utf-8")


def parse_report(data: bytes | str) -> ExperimentReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return ExperimentReport.from_dict(json.loads(data))


def write_report(report: ExperimentReport, out_dir: str | Path, name: str | None = None) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = name or report.experiment
    paths = {}
    for fmt, ext in (("json", "json"), ("tsv", "tsv"), ("text", "txt")):
        p = out / f"{name}.report.{ext}"
        p.write_bytes(render_report(report, fmt))
        paths[fmt] = p
    return paths
