import json
from fractions import Fraction

import pytest

from logicnn.harness import (
    ExperimentConfig,
    ExperimentReport,
    default_config,
    format_size,
    parse_config_text,
    parse_report,
    render_report,
    run_experiment1,
    run_experiment2,
    write_report,
)

pytestmark = pytest.mark.filterwarnings("ignore:column .* not seen during fitting")

ALL_GATES = ["FALSE", "AND", "A_NIMPLIES_B", "A", "B_NIMPLIES_A", "B", "XOR", "OR",
             "NOR", "XNOR", "NOT_B", "B_IMPLIES_A", "NOT_A", "A_IMPLIES_B", "NAND", "TRUE"]


def test_default_config_snapshot_exp1():
    d = default_config("exp1").to_dict()
    assert d["models"] == ("lnn", "lgn")
    assert d["max_iterations"] == 1000
    assert d["lr"] == 0.01
    assert d["loss_kind"] == "bce"
    assert d["seeds"] == tuple(range(10))
    assert list(d["gates"]) == ALL_GATES


@pytest.mark.parametrize("dataset,width,hidden", [("breast", 128, (8, 8)), ("adult", 256, (32, 32))])
def test_default_config_snapshot_exp2(dataset, width, hidden):
    c = default_config("exp2", dataset)
    assert (c.layers, c.width, c.mlp_hidden) == (5, width, hidden)
    assert c.epochs == 200 and c.batch_size == 100 and c.lr == 0.01
    assert c.models == ("lnn", "lgn", "mlp")
    assert c.max_iterations is None
    assert c.val_fraction == 0.2 and c.test_fraction == 0.3 and c.thresholds == 8
    spec = c.train_spec(3)
    assert spec.shuffle_seed == 3 and spec.select_best and spec.tau is None


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(models=("mlp",))
    with pytest.raises(ValueError):
        ExperimentConfig(gates=("MAYBE",))
    with pytest.raises(ValueError):
        default_config("exp2", "mnist")
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="exp2", dataset="breast", epochs=0)
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=())


def test_config_file_parsing():
    text = """
    # quick run
    models = lnn, mlp
    seeds = 0, 2,4
    epochs = 5      # short
    tau = none
    mlp-hidden = 4, 4
    lr = 0.05
    subsample = 100
    """
    c = parse_config_text(text, default_config("exp2", "breast"))
    assert c.models == ("lnn", "mlp") and c.seeds == (0, 2, 4)
    assert c.epochs == 5 and c.tau is None and c.mlp_hidden == (4, 4)
    assert c.lr == 0.05 and c.subsample == 100
    for bad in ("nonsense = 1", "epochs", "epochs = many"):
        with pytest.raises(ValueError):
            parse_config_text(bad, default_config("exp2", "breast"))


def test_config_dict_round_trip():
    c = default_config("exp2", "adult").replace(seeds=(1, 2))
    assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def _small_exp1(**kw):
    return default_config("exp1").replace(gates=("AND", "XOR", "TRUE"), seeds=(0, 1, 2), **kw)


def test_exp1_report_rows_and_aggregates():
    report = run_experiment1(_small_exp1())
    assert len(report.runs) == 2 * 3 * 3
    for model in ("lnn", "lgn"):
        for gate in ("AND", "XOR", "TRUE", "ALL"):
            agg = next(a for a in report.aggregates if a["model"] == model and a["gate"] == gate)
            rows = [r for r in report.runs if r["model"] == model and (gate == "ALL" or r["gate"] == gate)]
            its = [r["iterations"] for r in rows]
            assert agg["runs"] == len(rows)
            # exact rational mean, rounded once
            assert agg["mean_iterations"] == float(Fraction(sum(its), len(its)))
            assert agg["accuracy"] == float(Fraction(sum(r["converged"] for r in rows), len(rows)))
            assert agg["failures"] == sum(not r["converged"] for r in rows)


def test_exp1_gate_filter():
    report = run_experiment1(default_config("exp1").replace(gates=("XOR",), seeds=(0,)))
    assert {r["gate"] for r in report.runs} == {"XOR"}
    assert len(report.runs) == 2


def test_exp1_non_convergence_counts_as_max():
    report = run_experiment1(_small_exp1(max_iterations=2))
    failed = [r for r in report.runs if not r["converged"]]
    assert failed and all(r["iterations"] == 2 for r in failed)
    agg = next(a for a in report.aggregates if a["model"] == "lnn" and a["gate"] == "ALL")
    assert agg["failures"] == sum(1 for r in failed if r["model"] == "lnn")


def test_exp1_workers_do_not_change_result():
    serial = render_report(run_experiment1(_small_exp1()), "json")
    pooled = render_report(run_experiment1(_small_exp1(workers=2)), "json")
    assert serial == pooled


def test_render_formats():
    report = run_experiment1(_small_exp1())
    for fmt in ("text", "json", "tsv"):
        assert render_report(report, fmt) == render_report(report, fmt)
    assert parse_report(render_report(report, "json")) == report
    tsv = render_report(report, "tsv").decode().splitlines()
    kinds = [line.split("\t")[0] for line in tsv[1:]]
    assert kinds.count("run") == len(report.runs)
    assert kinds.count("aggregate") == len(report.aggregates)
    text = render_report(report, "text").decode()
    assert "LNN iters" in text and "ALL" in text
    with pytest.raises(ValueError):
        render_report(report, "xml")


def test_report_embeds_config_and_environment(tmp_path):
    c = _small_exp1(out_dir=str(tmp_path), workers=1)
    report = run_experiment1(c)
    assert ExperimentConfig.from_dict(report.config) == c.replace(out_dir=None)
    assert "out_dir" not in report.config and "workers" not in report.config
    assert set(report.environment) == {"logicnn", "python", "numpy", "scipy"}


def test_format_size():
    assert format_size(320) == "320B"
    assert format_size(640) == "640B"
    assert format_size(1434) == "1.4KB"
    assert format_size(15 * 1024) == "15.0KB"


def test_exp2_small_breast_run(tmp_path):
    c = default_config("exp2", "breast").replace(seeds=(0,), epochs=3, out_dir=str(tmp_path))
    report = run_experiment2(c)
    by_model = {r["model"]: r for r in report.runs}
    assert by_model["lnn"]["size_bytes"] == 320 and by_model["lgn"]["size_bytes"] == 320
    assert by_model["mlp"]["size_kind"] == "float32_params"
    feats = by_model["mlp"]["features"]
    assert by_model["mlp"]["size_bytes"] == 4 * (feats * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2)
    assert by_model["lnn"]["test_rows"] == 86
    for model in ("lnn", "lgn"):
        assert (tmp_path / f"breast_{model}_s0.net.json").exists()
        assert (tmp_path / f"breast_{model}_s0.circuit.json").exists()
    assert (tmp_path / "breast_mlp_s0.history.jsonl").exists()
    agg = {a["model"]: a for a in report.aggregates}
    assert agg["lnn"]["mean_accuracy"] == by_model["lnn"]["test_accuracy"]
    text = render_report(report, "text").decode()
    assert "320B" in text and "Multi-Layer Perceptron" in text
    paths = write_report(report, tmp_path)
    assert parse_report(paths["json"].read_bytes()) == report


def test_exp2_missing_data_is_actionable(tmp_path):
    from logicnn.data import DataError

    c = default_config("exp2", "breast").replace(seeds=(0,), epochs=1, models=("lnn",))
    with pytest.raises(DataError, match="does not exist"):
        run_experiment2(c, data_dir=tmp_path)


def test_report_from_dict_rejects_other_formats():
    with pytest.raises(ValueError):
        ExperimentReport.from_dict({"format": "x"})
