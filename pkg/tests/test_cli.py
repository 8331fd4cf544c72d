import dataclasses
import json
import os

import numpy as np
import pytest

from fewshotkit.backbone import load_checkpoint
from fewshotkit.cli import config as cfgmod
from fewshotkit.cli.commands import (
    cmd_episodes,
    cmd_eval,
    cmd_gen_data,
    cmd_hardness,
    cmd_pretrain,
    cmd_sweep,
)
from fewshotkit.cli.main import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from fewshotkit.datakit import file_checksum, load_episodes
from fewshotkit.errors import ConfigError, GridError
from fewshotkit.metrics import RESULTS_COLUMNS, SWEEP_COLUMNS, read_csv

SMALL = """
[data]
n_classes = 30
dim = 8
samples_per_class = 40
center_scale = 1.5

[pretrain]
hidden = 16, 16
cycles = 1, 2
batch_size = 64

[adapt]
epochs = 3

[eval]
protocols = 5w1s, 5w2s
n_episodes = 4

[sweep]
values = 1, 5, 15, 30
n_episodes = 3
methods = init_only, transductive
"""


def small_cfg(out, **run):
    cfg = cfgmod.parse(SMALL)
    return dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, out_dir=str(out), **run))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = small_cfg(out)
    for cmd in (cmd_gen_data, cmd_pretrain, cmd_episodes, cmd_eval, cmd_hardness):
        cmd(cfg)
    return cfg, out


def test_config_roundtrip():
    for cfg in (cfgmod.RunConfig(), cfgmod.parse(SMALL)):
        assert cfgmod.parse(cfgmod.serialize(cfg)) == cfg


def test_default_protocol_fields():
    cfg = cfgmod.RunConfig()
    assert cfg.protocols() == [(5, 1, 15), (5, 5, 15)]
    assert cfg.eval.n_episodes == 200
    assert cfgmod.parse_protocol("10w1s5q", 15) == (10, 1, 5)


@pytest.mark.parametrize("text", [
    "[eval]\nwho = 1\n",
    "[nonsense]\nx = 1\n",
    "[run]\nseed = abc\n",
    "[split]\nfractions = 0.5, 0.2, 0.2\n",
    "[eval]\nmethods = init_only, magic\n",
    "[eval]\nprotocols = 5-way\n",
])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        cfgmod.parse(text)


def test_out_dir_env(monkeypatch):
    monkeypatch.setenv(cfgmod.OUT_ENV, "/tmp/elsewhere")
    assert cfgmod.RunConfig().out_dir == "/tmp/elsewhere"


def test_init_config_and_exit_codes(tmp_path):
    path = tmp_path / "c.ini"
    assert main(["init-config", str(path)]) == EXIT_OK
    assert cfgmod.load(path) == cfgmod.RunConfig()
    bad = tmp_path / "bad.ini"
    bad.write_text("[split]\nfractions = 0.9, 0.2, 0.2\n")
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["pretrain", "--out", str(tmp_path / "empty")]) == EXIT_IO


def test_numeric_exit_code(tmp_path):
    csv = tmp_path / "nan.csv"
    rows = [f"{c},{'nan' if c == 0 and i == 0 else i * 0.1},{c}.0" for c in range(10) for i in range(6)]
    csv.write_text("\n".join(rows) + "\n")
    cfgp = tmp_path / "c.ini"
    cfgp.write_text(f"[data]\npath = {csv}\ndim = 2\n[pretrain]\nhidden = 4\ncycles = 1\n")
    out = str(tmp_path / "o")
    assert main(["pretrain", "--config", str(cfgp), "--out", out]) == EXIT_NUMERIC
    man = json.loads(open(os.path.join(out, "manifest_pretrain.json")).read())
    assert man["status"] == "failed" and "epoch" in man["error"]


def test_gen_data_deterministic(pipeline, tmp_path):
    cfg, out = pipeline
    other = small_cfg(tmp_path)
    cmd_gen_data(other)
    assert file_checksum(out / "dataset.fsds") == file_checksum(tmp_path / "dataset.fsds")
    cmd_gen_data(small_cfg(tmp_path / "s", seed=9))
    assert file_checksum(out / "dataset.fsds") != file_checksum(tmp_path / "s" / "dataset.fsds")


def test_pretrain_outputs_and_determinism(pipeline, tmp_path):
    cfg, out = pipeline
    loss = read_csv(out / "pretrain_loss.csv")
    assert len(loss) == 3 and list(loss[0]) == ["epoch", "lr", "loss"]
    again = small_cfg(tmp_path)
    cmd_gen_data(again)
    cmd_pretrain(again)
    assert file_checksum(out / "backbone.fsbb") == file_checksum(tmp_path / "backbone.fsbb")


def test_pool_changes_class_count(tmp_path):
    sizes = {}
    for pool in ("train", "train+val"):
        cfg = small_cfg(tmp_path / pool.replace("+", "_"))
        cfg = dataclasses.replace(cfg, split=dataclasses.replace(cfg.split, pool=pool))
        cmd_gen_data(cfg)
        cmd_pretrain(cfg)
        sizes[pool] = load_checkpoint(os.path.join(cfg.out_dir, "backbone.fsbb")).n_logits
    assert sizes == {"train": 18, "train+val": 24}


def test_episode_files(pipeline, tmp_path):
    cfg, out = pipeline
    eps = load_episodes(out / "episodes" / "5w1s15q.fsep")
    assert len(eps) == 4 and eps[0].protocol == "5w1s15q"
    again = small_cfg(tmp_path)
    cmd_gen_data(again)
    cmd_episodes(again)
    for name in ("5w1s15q.fsep", "5w2s15q.fsep"):
        assert file_checksum(out / "episodes" / name) == \
            file_checksum(tmp_path / "episodes" / name)


def test_infeasible_grid_names_entry(pipeline, tmp_path):
    cfg = small_cfg(tmp_path)
    cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, protocols=("50w1s",)))
    cmd_gen_data(cfg)
    with pytest.raises(GridError, match="50w1s"):
        cmd_episodes(cfg)


def test_eval_outputs(pipeline):
    cfg, out = pipeline
    rows = read_csv(out / "results.csv")
    assert tuple(rows[0]) == RESULTS_COLUMNS
    assert len(rows) == 3 * 4 * 2
    summary = json.loads((out / "summary.json").read_text())
    for proto in ("5w1s15q", "5w2s15q"):
        for m in ("init_only", "finetune", "transductive"):
            block = summary["protocols"][proto][m]
            assert {"mean", "std", "ci95", "q25", "median", "q75"} <= set(block)
    man = json.loads((out / "manifest_eval.json").read_text())
    assert man["status"] == "ok"
    assert man["outputs"]["results.csv"] == file_checksum(out / "results.csv")
    assert man["seeds"]["master"] == 0 and "config" in man


def test_eval_parallel_equals_serial(pipeline):
    cfg, out = pipeline
    serial = (out / "results.csv").read_bytes()
    cmd_eval(dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, workers=2)))
    assert (out / "results.csv").read_bytes() == serial


def test_eval_dim_mismatch(pipeline, tmp_path):
    cfg, out = pipeline
    other = small_cfg(tmp_path)
    other = dataclasses.replace(other, data=dataclasses.replace(other.data, dim=6))
    cmd_gen_data(other)
    cmd_episodes(other)
    (tmp_path / "backbone.fsbb").write_bytes((out / "backbone.fsbb").read_bytes())
    with pytest.raises(Exception, match="dim"):
        cmd_eval(other)


def test_hardness_outputs(pipeline):
    cfg, out = pipeline
    fits = json.loads((out / "hardness_fit.json").read_text())["methods"]
    assert set(fits) == {"init_only", "finetune", "transductive"}
    for block in fits.values():
        assert {"intercept", "slope", "area", "residual_rms", "pearson_r"} <= set(block)
    rows = read_csv(out / "hardness.csv")
    assert len(rows) == 24 and all(np.isfinite(float(r["omega"])) for r in rows)


def test_sweep_rows(pipeline):
    cfg, out = pipeline
    cmd_sweep(cfg)
    rows = read_csv(out / "sweep_query_shot.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 4 * 2
    assert [r["value"] for r in rows if r["method"] == "transductive"] == ["1", "5", "15", "30"]


def test_sweep_infeasible_value(pipeline, tmp_path):
    cfg = small_cfg(tmp_path)
    cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, values=(15, 60)))
    cmd_gen_data(cfg)
    cmd_pretrain(cfg)
    with pytest.raises(GridError, match="query_shot=60"):
        cmd_sweep(cfg)


@pytest.mark.filterwarnings("ignore:non-negative slope")
def test_cli_end_to_end(tmp_path):
    cfgp = tmp_path / "c.ini"
    cfgp.write_text(SMALL)
    out = str(tmp_path / "o")
    for cmd in ("gen-data", "pretrain", "episodes", "eval", "hardness"):
        assert main([cmd, "--config", str(cfgp), "--out", out, "--episodes-per-protocol", "2",
                     "--method", "init_only", "--method", "transductive"]) == EXIT_OK
    assert len(read_csv(os.path.join(out, "results.csv"))) == 2 * 2 * 2
