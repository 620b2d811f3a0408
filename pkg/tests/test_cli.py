"""End-to-end command-line workflows on temporary CSV data."""

import csv
import subprocess
import sys

import numpy as np
import pytest

from semistruct.cli import main
from semistruct.serialize import load_model, read_csv_columns


def write_csv(path, table):
    names = list(table)
    n = len(table[names[0]])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            writer.writerow([table[name][i] for name in names])


@pytest.fixture
def workspace(tmp_path):
    rng = np.random.default_rng(7)
    n = 60
    x0 = rng.normal(size=n)
    x1 = rng.normal(size=n)
    z0 = rng.normal(size=n)
    z1 = rng.normal(size=n)
    y = 1.0 + 2.0 * x0 - 1.0 * x1 + 0.1 * rng.normal(size=n)
    data_path = tmp_path / "data.csv"
    write_csv(data_path, {"y": y, "x0": x0, "x1": x1, "z0": z0, "z1": z1})
    config_path = tmp_path / "config.ini"
    config_path.write_text(
        f"""\
[data]
csv = {data_path}
target = y
unstructured = z0, z1

[terms]
intercept = true
linear = x0, x1

[network]
hidden = 6
dropout = 0.0

[train]
mode = unconstrained
batch_size = 16
max_epochs = 5
patience = 3
seed = 1
"""
    )
    return tmp_path, str(config_path), str(data_path)


def run(argv):
    return main(argv)


def train_and_pho(workspace, subdir="run"):
    tmp_path, config, _ = workspace
    out = tmp_path / subdir
    assert run(["train", "--config", config, "--out", str(out)]) == 0
    model = str(out / "model.txt")
    assert (
        run(["pho", "--config", config, "--model", model, "--out", str(out)])
        == 0
    )
    return out


class TestTrain:
    def test_writes_model_and_history(self, workspace, capsys):
        tmp_path, config, _ = workspace
        out = tmp_path / "out"
        assert run(["train", "--config", config, "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "rows = 60" in stdout
        assert "design_columns = 3" in stdout
        assert "epochs_run = " in stdout
        model = load_model(str(out / "model.txt"))
        assert model.mode == "unconstrained"
        assert model.z_columns == ("z0", "z1")
        history = read_csv_columns(str(out / "history.csv"))
        assert list(history) == ["epoch", "train_loss", "val_loss"]

    def test_seed_flag_overrides_config(self, workspace):
        tmp_path, config, _ = workspace
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run(["train", "--config", config, "--out", str(out_a)]) == 0
        assert (
            run(
                [
                    "train", "--config", config, "--out", str(out_b),
                    "--seed", "99",
                ]
            )
            == 0
        )
        beta_a = load_model(str(out_a / "model.txt")).beta
        beta_b = load_model(str(out_b / "model.txt")).beta
        assert not np.array_equal(beta_a, beta_b)

    def test_spline_term_syntax(self, workspace):
        tmp_path, config, data_path = workspace
        cfg = tmp_path / "spline.ini"
        cfg.write_text(
            open(config).read().replace(
                "linear = x0, x1", "linear = x1\nspline = x0:6:2:1"
            )
        )
        out = tmp_path / "sp"
        assert run(["train", "--config", str(cfg), "--out", str(out)]) == 0
        model = load_model(str(out / "model.txt"))
        spec = next(t for t in model.design.terms if t.kind == "bspline")
        assert (spec.num_basis, spec.degree, spec.penalty_order) == (6, 2, 1)


class TestPipeline:
    def test_full_roundtrip(self, workspace, capsys):
        tmp_path, config, data_path = workspace
        out = train_and_pho(workspace)
        stdout = capsys.readouterr().out
        assert "method = pho" in stdout
        assert "ortho_residual = " in stdout
        assert "ev_structured = " in stdout

        model = str(out / "model.txt")
        pho = str(out / "pho.txt")
        assert (
            run(
                [
                    "decompose", "--config", config, "--model", model,
                    "--pho", pho, "--out", str(out),
                ]
            )
            == 0
        )
        table = read_csv_columns(str(out / "decomposition.csv"))
        assert list(table) == ["eta_str", "eta_unstr"]
        assert len(table["eta_str"]) == 60

        assert (
            run(
                [
                    "importance", "--config", config, "--model", model,
                    "--pho", pho, "--out", str(out),
                ]
            )
            == 0
        )
        imp = read_csv_columns(str(out / "importance.csv"))
        assert list(imp) == ["measure", "term", "value"]
        measures = list(imp["measure"])
        assert measures[:2] == ["ev_structured", "ev_unstructured"]
        assert measures[2:] == ["mcfadden_r2"] * 3
        assert imp["term"][2:] == ["intercept", "x0", "x1"]

    def test_decompose_on_new_rows(self, workspace):
        tmp_path, config, _ = workspace
        out = train_and_pho(workspace)
        rng = np.random.default_rng(1)
        new_path = tmp_path / "new.csv"
        write_csv(
            new_path,
            {
                "x0": rng.normal(size=9),
                "x1": rng.normal(size=9),
                "z0": rng.normal(size=9),
                "z1": rng.normal(size=9),
            },
        )
        cfg = tmp_path / "new.ini"
        cfg.write_text(
            f"[data]\ncsv = {new_path}\ntarget = y\n"
            "\n[terms]\nlinear = x0, x1\n"
        )
        out2 = tmp_path / "new_out"
        assert (
            run(
                [
                    "decompose", "--config", str(cfg),
                    "--model", str(out / "model.txt"),
                    "--pho", str(out / "pho.txt"),
                    "--out", str(out2),
                ]
            )
            == 0
        )
        table = read_csv_columns(str(out2 / "decomposition.csv"))
        assert len(table["eta_str"]) == 9

    def test_importance_rejects_mismatched_rows(self, workspace):
        tmp_path, config, _ = workspace
        out = train_and_pho(workspace)
        rng = np.random.default_rng(2)
        new_path = tmp_path / "short.csv"
        write_csv(
            new_path,
            {
                "y": rng.normal(size=5),
                "x0": rng.normal(size=5),
                "x1": rng.normal(size=5),
                "z0": rng.normal(size=5),
                "z1": rng.normal(size=5),
            },
        )
        cfg = tmp_path / "short.ini"
        cfg.write_text(
            f"[data]\ncsv = {new_path}\ntarget = y\n"
        )
        code = run(
            [
                "importance", "--config", str(cfg),
                "--model", str(out / "model.txt"),
                "--pho", str(out / "pho.txt"),
                "--out", str(tmp_path / "x"),
            ]
        )
        assert code == 3


class TestDeterminism:
    def test_identical_commands_write_identical_bytes(self, workspace):
        out1 = train_and_pho(workspace, "run1")
        out2 = train_and_pho(workspace, "run2")
        for name in (
            "model.txt", "history.csv", "pho.txt", "pho_contributions.csv",
        ):
            a = (out1 / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"


class TestExitCodes:
    def test_unknown_config_section_is_usage_error(self, workspace):
        tmp_path, config, _ = workspace
        bad = tmp_path / "bad.ini"
        bad.write_text(open(config).read() + "\n[mystery]\nknob = 1\n")
        assert run(["train", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_unknown_config_key_is_usage_error(self, workspace):
        tmp_path, config, _ = workspace
        bad = tmp_path / "bad2.ini"
        bad.write_text(open(config).read() + "\n[pho]\nturbo = yes\n")
        assert run(["train", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_missing_config_file_is_usage_error(self, tmp_path):
        assert (
            run(["train", "--config", str(tmp_path / "none.ini")]) == 2
        )

    def test_malformed_spline_entry_is_usage_error(self, workspace):
        tmp_path, config, _ = workspace
        bad = tmp_path / "bad3.ini"
        bad.write_text(
            open(config).read().replace(
                "linear = x0, x1", "spline = x0:lots"
            )
        )
        assert run(["train", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_negative_lambda_is_usage_error(self, workspace):
        tmp_path, config, _ = workspace
        out = train_and_pho(workspace)
        code = run(
            [
                "pho", "--config", config,
                "--model", str(out / "model.txt"),
                "--out", str(out), "--lambda", "-1",
            ]
        )
        # method defaults to plain pho, which ignores lambda; force phogam.
        gam_cfg = tmp_path / "gam.ini"
        gam_cfg.write_text(open(config).read() + "\n[pho]\nmethod = phogam\n")
        code = run(
            [
                "pho", "--config", str(gam_cfg),
                "--model", str(out / "model.txt"),
                "--out", str(out), "--lambda", "-1",
            ]
        )
        assert code == 2

    def test_missing_data_file_is_data_error(self, workspace):
        tmp_path, config, _ = workspace
        bad = tmp_path / "bad4.ini"
        bad.write_text(
            open(config).read().replace("data.csv", "gone.csv")
        )
        assert run(["train", "--config", str(bad), "--out", str(tmp_path)]) == 3

    def test_missing_target_column_is_data_error(self, workspace):
        tmp_path, config, _ = workspace
        bad = tmp_path / "bad5.ini"
        bad.write_text(open(config).read().replace("target = y", "target = yy"))
        assert run(["train", "--config", str(bad), "--out", str(tmp_path)]) == 3

    def test_singular_streaming_system_is_numerical_error(self, workspace):
        # A dead (all-zero) structured column makes the accumulated Gram
        # matrix singular on the streaming path.
        tmp_path, config, data_path = workspace
        table = read_csv_columns(data_path)
        table["x1"] = np.zeros(60)
        dead_path = tmp_path / "dead.csv"
        write_csv(dead_path, table)
        cfg = tmp_path / "dead.ini"
        cfg.write_text(
            open(config).read().replace(str(data_path), str(dead_path))
            + "\n[pho]\nminibatch_rows = 0\nminibatch_size = 16\n"
        )
        out = tmp_path / "dead_out"
        assert run(["train", "--config", str(cfg), "--out", str(out)]) == 0
        code = run(
            [
                "pho", "--config", str(cfg),
                "--model", str(out / "model.txt"),
                "--out", str(out),
            ]
        )
        assert code == 4


class TestExperimentCommand:
    def test_linear_toy_run(self, workspace, capsys):
        tmp_path, _, _ = workspace
        cfg = tmp_path / "exp.ini"
        cfg.write_text(
            """\
[experiment]
n = 40
p = 2
q = 5
replicates = 1
hidden = 6
max_epochs = 2
patience = 2
batch_size = 16
"""
        )
        out = tmp_path / "exp_out"
        assert (
            run(
                [
                    "experiment", "linear", "--config", str(cfg),
                    "--out", str(out),
                ]
            )
            == 0
        )
        table = read_csv_columns(str(out / "linear_report.csv"))
        assert set(table["method"]) == {"Unconstrained", "PHO", "ONO"}

    def test_error_rate_toy_run_and_filename_mapping(self, workspace):
        tmp_path, _, _ = workspace
        cfg = tmp_path / "er.ini"
        cfg.write_text(
            """\
[experiment]
n = 300
batch_sizes = 1, 20, 50
max_epochs = 1
patience = 1
train_batch_size = 128
"""
        )
        out = tmp_path / "er_out"
        assert (
            run(
                [
                    "experiment", "error-rate", "--config", str(cfg),
                    "--out", str(out),
                ]
            )
            == 0
        )
        table = read_csv_columns(str(out / "error_rate_report.csv"))
        assert "slope_loglog" in set(table["metric"])

    def test_threads_flag_does_not_change_report(self, workspace):
        tmp_path, _, _ = workspace
        cfg = tmp_path / "thr.ini"
        cfg.write_text(
            """\
[experiment]
n = 40
p = 2
q = 5
replicates = 2
hidden = 6
max_epochs = 2
patience = 2
batch_size = 16
"""
        )
        outs = []
        for threads, sub in (("1", "t1"), ("3", "t3")):
            out = tmp_path / sub
            assert (
                run(
                    [
                        "experiment", "linear", "--config", str(cfg),
                        "--out", str(out), "--threads", threads,
                    ]
                )
                == 0
            )
            outs.append((out / "linear_report.csv").read_bytes())
        assert outs[0] == outs[1]


class TestConsoleEntryPoint:
    def test_installed_script_runs_train(self, workspace):
        tmp_path, config, _ = workspace
        out = tmp_path / "script_out"
        proc = subprocess.run(
            [
                sys.executable, "-c",
                "import sys; from semistruct.cli import main; "
                "sys.exit(main(sys.argv[1:]))",
                "train", "--config", config, "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "model.txt").exists()
