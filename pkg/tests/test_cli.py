import json
import subprocess
import sys

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from aimrom.cli import main
from aimrom.serialize import read_table


def _write(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return path


def _invoke(args):
    return CliRunner().invoke(main, [str(a) for a in args])


def _run_proc(args):
    return subprocess.run(
        [sys.executable, "-m", "aimrom.cli"] + [str(a) for a in args],
        capture_output=True, text=True,
    )


SIM_DOC = {"model": "chafee", "ic": [1.0, 0.5, 0.1], "final_time": 0.5, "dt": 0.001}

SAMPLE_DOC = {
    "model": "chafee",
    "ic_box": [[-1.2, 1.2], [-0.6, 0.6], [-0.4, 0.4]],
    "n_trajectories": 6,
    "transient_time": 0.2,
    "sample_time": 0.5,
    "snapshot_stride": 50,
    "dt": 0.001,
    "seed": 7,
}


def test_module_entry_point_shows_commands():
    proc = _run_proc(["--help"])
    assert proc.returncode == 0
    for cmd in ("simulate", "sample", "train", "postprocess", "evaluate", "ensemble"):
        assert cmd in proc.stdout


def test_simulate_outputs(tmp_path):
    cfg = _write(tmp_path / "sim.yaml", SIM_DOC)
    res = _invoke(["simulate", "--config", cfg, "--out", tmp_path / "out"])
    assert res.exit_code == 0, res.output
    lines = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 502  # header + 501 states
    assert lines[0] == "t,a1,a2,a3"
    header, data, comments = read_table(tmp_path / "out" / "field.csv")
    assert data.shape == (501, 66)  # t + 65 grid values
    assert comments and comments[0].startswith("x: ")
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config"]["model"] == "chafee"
    assert "final state" in res.output and "wall time" in res.output


def test_simulate_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path / "sim.yaml", SIM_DOC)
    assert _invoke(["simulate", "--config", cfg, "--out", tmp_path / "a"]).exit_code == 0
    assert _invoke(["simulate", "--config", cfg, "--out", tmp_path / "b"]).exit_code == 0
    for name in ("trajectory.csv", "field.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_toy_writes_no_field(tmp_path):
    doc = {"model": "toy", "epsilon": 0.01, "ic": [1.5, 0.5], "final_time": 1.0, "dt": 0.001}
    cfg = _write(tmp_path / "toy.yaml", doc)
    res = _invoke(["simulate", "--config", cfg, "--out", tmp_path / "out"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "out" / "trajectory.csv").exists()
    assert not (tmp_path / "out" / "field.csv").exists()


def test_unknown_model_exits_2(tmp_path):
    cfg = _write(tmp_path / "bad.yaml", dict(SIM_DOC, model="navier"))
    proc = _run_proc(["simulate", "--config", cfg, "--out", tmp_path / "out"])
    assert proc.returncode == 2
    assert "navier" in proc.stderr


def test_unknown_key_reports_line(tmp_path):
    cfg = _write(tmp_path / "bad.yaml", dict(SIM_DOC, typo_key=3))
    proc = _run_proc(["simulate", "--config", cfg, "--out", tmp_path / "out"])
    assert proc.returncode == 2
    assert "typo_key" in proc.stderr and "line" in proc.stderr


def test_invalid_yaml_exits_2(tmp_path):
    cfg = tmp_path / "broken.yaml"
    cfg.write_text("model: [unclosed\n")
    proc = _run_proc(["simulate", "--config", cfg, "--out", tmp_path / "out"])
    assert proc.returncode == 2


def test_missing_config_file_exits_2(tmp_path):
    proc = _run_proc(["simulate", "--config", tmp_path / "absent.yaml", "--out", tmp_path])
    assert proc.returncode == 2


def test_blowup_exits_3(tmp_path):
    doc = {"model": "ks", "ic": [1.0, 0.5, 0.1, 0, 0, 0, 0, 0],
           "final_time": 1.0, "dt": 0.01}
    cfg = _write(tmp_path / "blow.yaml", doc)
    proc = _run_proc(["simulate", "--config", cfg, "--out", tmp_path / "out"])
    assert proc.returncode == 3
    assert "numeric failure" in proc.stderr


def test_sample_snapshot_count(tmp_path):
    cfg = _write(tmp_path / "sample.yaml", SAMPLE_DOC)
    res = _invoke(["sample", "--config", cfg, "--out", tmp_path / "out"])
    assert res.exit_code == 0, res.output
    header, data, _ = read_table(tmp_path / "out" / "snapshots.csv")
    assert header == ["traj_id", "t", "a1", "a2", "a3"]
    # 6 trajectories, snapshots at strides 0..500 step 50 -> 11 each
    assert data.shape[0] == 66
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["n_snapshots"] == 66


def _sampled(tmp_path):
    cfg = _write(tmp_path / "sample.yaml", SAMPLE_DOC)
    assert _invoke(["sample", "--config", cfg, "--out", tmp_path / "data"]).exit_code == 0
    return tmp_path / "data" / "snapshots.csv"


def _closure_doc(data, store):
    return {
        "kind": "closure", "alias": "cl", "data": str(data), "store": str(store),
        "n_low": 2, "hidden": [16, 16],
        "train": {"learning_rate": 0.002, "epochs": 20, "batch_size": 32, "seed": 0},
    }


def _hash_from(output):
    for line in output.splitlines():
        if line.startswith("model hash:"):
            return line.split(":", 1)[1].strip()
    raise AssertionError(f"no model hash line in:\n{output}")


def test_train_closure_reruns_reuse_hash(tmp_path):
    data = _sampled(tmp_path)
    cfg = _write(tmp_path / "train.yaml", _closure_doc(data, tmp_path / "store"))
    res1 = _invoke(["train", "--config", cfg, "--out", tmp_path / "t1"])
    assert res1.exit_code == 0, res1.output
    res2 = _invoke(["train", "--config", cfg, "--out", tmp_path / "t2"])
    assert res2.exit_code == 0, res2.output
    assert _hash_from(res1.output) == _hash_from(res2.output)
    assert (tmp_path / "t1" / "loss.csv").exists()
    aliases = json.loads((tmp_path / "store" / "aliases.json").read_text())
    assert aliases["cl"] == _hash_from(res1.output)


def test_seed_override_changes_hash(tmp_path):
    data = _sampled(tmp_path)
    cfg = _write(tmp_path / "train.yaml", _closure_doc(data, tmp_path / "store"))
    res1 = _invoke(["train", "--config", cfg, "--out", tmp_path / "t1"])
    res2 = _invoke(["train", "--config", cfg, "--out", tmp_path / "t2", "--seed", "1"])
    assert res1.exit_code == 0 and res2.exit_code == 0
    assert _hash_from(res1.output) != _hash_from(res2.output)


def test_train_pod_writes_energy(tmp_path):
    data = _sampled(tmp_path)
    doc = {"kind": "pod", "alias": "pod", "data": str(data), "store": str(tmp_path / "store")}
    cfg = _write(tmp_path / "pod.yaml", doc)
    res = _invoke(["train", "--config", cfg, "--out", tmp_path / "out"])
    assert res.exit_code == 0, res.output
    header, data_, _ = read_table(tmp_path / "out" / "energy.csv")
    assert header == ["mode", "cumulative_energy"]
    assert data_.shape[0] == 3
    assert data_[-1, 1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(data_[:, 1]) >= -1e-15)


def test_train_dmap_latent_map_and_lift_chain(tmp_path):
    # 1d curve embedded in 3d: pruning must keep exactly one coordinate
    t = np.linspace(0.0, 1.0, 80)
    pts = np.column_stack([t, 0.5 * t, -0.25 * t])
    lines = ["a1,a2,a3"] + [",".join("%.17g" % v for v in row) for row in pts]
    data = tmp_path / "line.csv"
    data.write_text("\n".join(lines) + "\n")
    store = tmp_path / "store"

    dmap_doc = {"kind": "dmap", "alias": "dm", "data": str(data), "store": str(store),
                "n_eigs": 6}
    cfg = _write(tmp_path / "dmap.yaml", dmap_doc)
    res = _invoke(["train", "--config", cfg, "--out", tmp_path / "d"])
    assert res.exit_code == 0, res.output
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["config"]["kind"] == "dmap"

    lift_doc = {"kind": "lift", "alias": "lift", "dmap": "dm", "store": str(store),
                "delta": 1e-8}
    cfg = _write(tmp_path / "lift.yaml", lift_doc)
    res = _invoke(["train", "--config", cfg, "--out", tmp_path / "l"])
    assert res.exit_code == 0, res.output

    lm_doc = {"kind": "latent-map", "alias": "lm", "dmap": "dm", "store": str(store),
              "n_low": 2, "hidden": [8], "train": {"epochs": 3, "seed": 0}}
    cfg = _write(tmp_path / "lm.yaml", lm_doc)
    res = _invoke(["train", "--config", cfg, "--out", tmp_path / "m"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "m" / "loss.csv").exists()

    aliases = json.loads((store / "aliases.json").read_text())
    assert set(aliases) == {"dm", "lift", "lm"}


EVAL_PIPELINE = {
    "model": "chafee", "latent_route": "fourier", "dynamics": "truncated",
    "closure": "euler-galerkin", "ic": [1.0, 0.5, 0.1], "final_time": 1.0, "dt": 0.001,
}


def test_evaluate_writes_metrics_and_plots(tmp_path):
    cfg = _write(tmp_path / "eval.yaml", {"pipeline": EVAL_PIPELINE})
    res = _invoke(["evaluate", "--config", cfg, "--out", tmp_path / "out"])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert doc["label"] == "chafee/fourier/truncated/euler-galerkin"
    assert doc["corrected"]["mape_final"] < doc["raw"]["mape_final"]
    assert set(doc["decomposition"]) == {
        "delta_low", "delta_closure_mass", "delta_truncated", "delta_corrected"}
    # the printed summary must reproduce the stored value exactly
    assert ("MAPE corrected: %.17g" % doc["corrected"]["mape_final"]) in res.output
    _, series, _ = read_table(tmp_path / "out" / "error_series.csv")
    assert series.shape == (1001, 2)
    for name in ("overlay.svg", "error_series.svg"):
        text = (tmp_path / "out" / name).read_text()
        assert text.startswith("<svg") and "provenance" in text


def test_postprocess_writes_corrected_state(tmp_path):
    cfg = _write(tmp_path / "pp.yaml", {"pipeline": EVAL_PIPELINE, "plots": False})
    res = _invoke(["postprocess", "--config", cfg, "--out", tmp_path / "out"])
    assert res.exit_code == 0, res.output
    header, data, _ = read_table(tmp_path / "out" / "corrected.csv")
    assert header == ["a1", "a2", "a3"]
    doc = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert np.array_equal(data[0], np.asarray(doc["corrected_coeffs"]))
    assert not (tmp_path / "out" / "overlay.svg").exists()


def test_evaluate_missing_artifact_exits_4(tmp_path):
    data = _sampled(tmp_path)
    cfg = _write(tmp_path / "train.yaml", _closure_doc(data, tmp_path / "store"))
    assert _invoke(["train", "--config", cfg, "--out", tmp_path / "t"]).exit_code == 0
    doc = {"pipeline": dict(EVAL_PIPELINE, closure="mlp"),
           "store": str(tmp_path / "store"), "artifacts": {"closure-net": "typo"}}
    cfg = _write(tmp_path / "eval.yaml", doc)
    proc = _run_proc(["evaluate", "--config", cfg, "--out", tmp_path / "out"])
    assert proc.returncode == 4
    assert "typo" in proc.stderr and "cl" in proc.stderr


def test_ensemble_outputs_and_determinism(tmp_path):
    doc = {
        "pipelines": [EVAL_PIPELINE, dict(EVAL_PIPELINE, closure="none")],
        "ic_box": [[0.5, 1.2], [-0.5, 0.5], [-0.2, 0.2]],
        "n_ic": 4, "seed": 3, "bins": 5, "plots": True,
    }
    cfg = _write(tmp_path / "ens.yaml", doc)
    res = _invoke(["ensemble", "--config", cfg, "--out", tmp_path / "a"])
    assert res.exit_code == 0, res.output
    samples = (tmp_path / "a" / "samples.csv").read_text().splitlines()
    assert samples[0] == "config,ic_index,value"
    assert len(samples) == 9  # header + 2 configs x 4 ics
    hist = (tmp_path / "a" / "histogram.csv").read_text().splitlines()
    assert len(hist) == 11  # header + 2 configs x 5 bins
    assert (tmp_path / "a" / "histogram.svg").read_text().startswith("<svg")
    assert _invoke(["ensemble", "--config", cfg, "--out", tmp_path / "b"]).exit_code == 0
    assert (tmp_path / "a" / "samples.csv").read_bytes() == \
        (tmp_path / "b" / "samples.csv").read_bytes()
