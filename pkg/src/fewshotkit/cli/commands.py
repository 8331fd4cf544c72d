"""Implementation of the CLI subcommands.

Each command reads the files produced by the earlier stages from the run's
output directory and writes a manifest before and after its work.
"""
from __future__ import annotations

import concurrent.futures as cf
import dataclasses
import os
import platform
import time

from .. import __version__
from ..backbone import load_checkpoint, pretrain, save_checkpoint
from ..datakit import (
    SyntheticSpec,
    derive_seed,
    file_checksum,
    load_csv,
    load_dataset,
    load_episodes,
    make_synthetic,
    mint_episodes,
    protocol_name,
    save_dataset,
    save_episodes,
    split_classes,
)
from ..errors import ContractError, GridError
from ..fewshot import evaluate_episode
from ..metrics import (
    HARDNESS_COLUMNS,
    LOSS_COLUMNS,
    RESULTS_COLUMNS,
    SCHEMA_VERSION,
    SWEEP_COLUMNS,
    ReferenceExtractor,
    correlate,
    fit_hardness_curve,
    hardness,
    read_csv,
    summarize,
    write_csv,
    write_json,
)
from ..ndgrad import BACKEND
from . import config as cfgmod

DATASET_FILE = "dataset.fsds"
CHECKPOINT_FILE = "backbone.fsbb"
LOSS_FILE = "pretrain_loss.csv"
RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.json"
HARDNESS_FILE = "hardness.csv"
FIT_FILE = "hardness_fit.json"
EPISODE_DIR = "episodes"


class Manifest:
    """Provenance record written when a command starts and rewritten when it ends."""

    def __init__(self, cfg, command):
        self.path = os.path.join(cfg.out_dir, f"manifest_{command}.json")
        self.t0 = time.perf_counter()
        self.data = {
            "command": command,
            "tool_version": __version__,
            "kernel_backend": BACKEND,
            "python": platform.python_version(),
            "config": cfg.to_dict(),
            "seeds": seeds(cfg),
            "inputs": {},
            "outputs": {},
            "status": "running",
        }

    def add_input(self, path):
        self.data["inputs"][os.path.relpath(path, os.path.dirname(self.path))] = file_checksum(path)

    def add_output(self, path):
        self.data["outputs"][os.path.relpath(path, os.path.dirname(self.path))] = file_checksum(path)

    def write(self):
        write_json(self.path, self.data)

    def finish(self, status="ok", error=None):
        self.data["status"] = status
        self.data["wall_clock_seconds"] = time.perf_counter() - self.t0
        if error is not None:
            self.data["error"] = f"{type(error).__name__}: {error}"
        self.write()


def seeds(cfg):
    m = cfg.run.seed
    return {
        "master": m,
        "data": derive_seed(m, "data"),
        "split": derive_seed(m, "split"),
        "pretrain": derive_seed(m, "pretrain"),
        "episodes": derive_seed(m, "episodes"),
        "sweep": derive_seed(m, "sweep"),
    }


def _run(cfg, command, body):
    os.makedirs(cfg.out_dir, exist_ok=True)
    man = Manifest(cfg, command)
    man.write()
    try:
        body(man)
    except BaseException as exc:
        man.finish("failed", exc)
        raise
    man.finish()
    return man


def _need(path, what):
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found at {path}; run the earlier stage first")
    return path


def _out(cfg, name):
    return os.path.join(cfg.out_dir, name)


def load_run_dataset(cfg, man=None):
    if cfg.data.path:
        path = _need(cfg.data.path, "dataset")
        ds = load_csv(path) if path.endswith(".csv") else load_dataset(path)
    else:
        path = _need(_out(cfg, DATASET_FILE), "dataset file")
        ds = load_dataset(path)
    if man is not None:
        man.add_input(path)
    return ds


def run_split(cfg, ds):
    return split_classes(ds, cfg.split.fractions, seeds(cfg)["split"])


# gen-data -------------------------------------------------------------------

def cmd_gen_data(cfg):
    def body(man):
        d = cfg.data
        spec = SyntheticSpec(d.n_classes, d.dim, d.samples_per_class, d.center_scale,
                             d.noise_sigma, seeds(cfg)["data"], d.name)
        ds = make_synthetic(spec)
        split = run_split(cfg, ds)
        path = _out(cfg, DATASET_FILE)
        save_dataset(path, ds)
        write_json(_out(cfg, "split.json"), dataclasses.asdict(split))
        man.add_output(path)
        man.data["dataset"] = {"classes": len(ds.classes), "dim": ds.dim,
                               "split_sizes": [len(split.train), len(split.val), len(split.test)]}
    return _run(cfg, "gen-data", body)


# pretrain -------------------------------------------------------------------

def cmd_pretrain(cfg):
    def body(man):
        ds = load_run_dataset(cfg, man)
        split = run_split(cfg, ds)
        pool = split.part(cfg.split.pool)
        pcfg = cfg.pretrain_config(seeds(cfg)["pretrain"])
        res = pretrain(ds, pool, pcfg)
        ckpt = _out(cfg, CHECKPOINT_FILE)
        save_checkpoint(ckpt, res.params, {"pretrain": pcfg.to_dict(), "pool": cfg.split.pool,
                                           "class_ids": list(pool)})
        rows = [{"epoch": i, "lr": lr, "loss": loss}
                for i, (lr, loss) in enumerate(zip(res.lr_trace, res.loss_trace))]
        write_csv(_out(cfg, LOSS_FILE), LOSS_COLUMNS, rows)
        for p in (ckpt, _out(cfg, LOSS_FILE)):
            man.add_output(p)
        man.data["pretrain"] = {"n_classes": len(pool), "initial_loss": res.initial_loss,
                                "final_loss": res.loss_trace[-1],
                                "train_accuracy": res.train_accuracy}
    return _run(cfg, "pretrain", body)


# episodes -------------------------------------------------------------------

def episode_path(cfg, way, shot, query):
    return os.path.join(cfg.out_dir, EPISODE_DIR, protocol_name(way, shot, query) + ".fsep")


def check_entry(name, way, shot, query, ds, test):
    min_size = min(ds.class_size(c) for c in test)
    if way > len(test):
        raise GridError(f"grid entry {name}: way {way} exceeds {len(test)} test classes")
    if shot < 1 or query < 1:
        raise GridError(f"grid entry {name}: shot and query shot must be >= 1")
    if shot + query > min_size:
        raise GridError(f"grid entry {name}: needs {shot + query} samples per class, "
                        f"smallest test class has {min_size}")


def check_grid(cfg, ds, split):
    for way, shot, query in cfg.protocols():
        check_entry(protocol_name(way, shot, query), way, shot, query, ds, split.test)


def cmd_episodes(cfg):
    def body(man):
        ds = load_run_dataset(cfg, man)
        split = run_split(cfg, ds)
        check_grid(cfg, ds, split)
        os.makedirs(os.path.join(cfg.out_dir, EPISODE_DIR), exist_ok=True)
        master = seeds(cfg)["episodes"]
        for way, shot, query in cfg.protocols():
            eps = mint_episodes(ds, split.test, way, shot, query, cfg.eval.n_episodes, master)
            path = episode_path(cfg, way, shot, query)
            save_episodes(path, eps)
            man.add_output(path)
    return _run(cfg, "episodes", body)


# eval -----------------------------------------------------------------------

_worker = {}


def _worker_init(ckpt_path, adapt_cfg):
    _worker.clear()
    _worker["theta"] = load_checkpoint(ckpt_path)
    _worker["adapt"] = adapt_cfg
    _worker["episodes"] = {}


def _worker_episodes(path):
    cache = _worker["episodes"]
    if path not in cache:
        cache[path] = load_episodes(path)
    return cache[path]


def _eval_task(task):
    path, index, method = task
    ep = _worker_episodes(path)[index]
    r = evaluate_episode(_worker["theta"], ep, method, _worker["adapt"])
    return {"protocol": ep.protocol, "episode": index, "way": ep.way, "shot": ep.shot,
            "query_shot": ep.query_shot, "method": method, "accuracy": r.accuracy,
            "entropy_before": r.entropy_before, "entropy_after": r.entropy_after}


def run_tasks(tasks, ckpt_path, adapt_cfg, workers):
    """Evaluate ``tasks`` in order; results keep task order for any worker count."""
    if workers <= 1:
        _worker_init(ckpt_path, adapt_cfg)
        return [_eval_task(t) for t in tasks]
    with cf.ProcessPoolExecutor(workers, initializer=_worker_init,
                                initargs=(ckpt_path, adapt_cfg)) as pool:
        return list(pool.map(_eval_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _check_dims(theta, episodes, path):
    for ep in episodes[:1]:
        if ep.dim != theta.in_dim:
            raise ContractError(f"{path}: episode dim {ep.dim} != checkpoint input dim "
                                f"{theta.in_dim}")


def summary_block(rows):
    out = {}
    for r in rows:
        out.setdefault(r["protocol"], {}).setdefault(r["method"], []).append(100.0 * r["accuracy"])
    return {p: {m: summarize(v).to_json() for m, v in ms.items()} for p, ms in out.items()}


def cmd_eval(cfg):
    def body(man):
        ckpt = _need(_out(cfg, CHECKPOINT_FILE), "checkpoint")
        man.add_input(ckpt)
        theta = load_checkpoint(ckpt)
        tasks = []
        for way, shot, query in cfg.protocols():
            path = _need(episode_path(cfg, way, shot, query), "episode file")
            man.add_input(path)
            eps = load_episodes(path)
            _check_dims(theta, eps, path)
            for i in range(len(eps)):
                for m in cfg.eval.methods:
                    tasks.append((path, i, m))
        rows = run_tasks(tasks, ckpt, cfg.adapt, cfg.run.workers)
        write_csv(_out(cfg, RESULTS_FILE), RESULTS_COLUMNS, rows)
        write_json(_out(cfg, SUMMARY_FILE), {"schema": SCHEMA_VERSION, "unit": "accuracy_percent",
                                             "protocols": summary_block(rows)})
        man.add_output(_out(cfg, RESULTS_FILE))
        man.add_output(_out(cfg, SUMMARY_FILE))
    return _run(cfg, "eval", body)


# hardness -------------------------------------------------------------------

def cmd_hardness(cfg):
    def body(man):
        results = _need(_out(cfg, RESULTS_FILE), "results CSV")
        ref_path = _need(cfg.hardness.reference or _out(cfg, CHECKPOINT_FILE),
                         "reference extractor checkpoint")
        man.add_input(results)
        man.add_input(ref_path)
        phi = ReferenceExtractor(load_checkpoint(ref_path), cfg.hardness.mode,
                                 cfg.hardness.relu_before_norm)
        rows = read_csv(results)
        omegas = {}
        episodes = {}
        for row in rows:
            key = (row["protocol"], int(row["episode"]))
            if key in omegas:
                continue
            proto = row["protocol"]
            if proto not in episodes:
                way, shot, query = cfgmod.parse_protocol(proto, 0)
                path = episode_path(cfg, way, shot, query)
                if not os.path.exists(path):
                    raise ContractError(f"results reference protocol {proto} but {path} is missing")
                man.add_input(path)
                episodes[proto] = load_episodes(path)
            eps = episodes[proto]
            if key[1] >= len(eps):
                raise ContractError(f"results reference episode {key[1]} of {proto}, "
                                    f"file has {len(eps)}")
            ep = eps[key[1]]
            phi.check_disjoint(ep.classes)
            omegas[key] = hardness(ep, phi, key[1]).omega
        out_rows, points = [], {}
        for row in rows:
            omega = omegas[(row["protocol"], int(row["episode"]))]
            acc = float(row["accuracy"])
            out_rows.append({**{c: row[c] for c in HARDNESS_COLUMNS if c in row},
                             "accuracy": acc, "omega": omega})
            points.setdefault(row["method"], []).append((omega, 100.0 * acc))
        write_csv(_out(cfg, HARDNESS_FILE), HARDNESS_COLUMNS, out_rows)
        fits = {}
        for method, pts in points.items():
            fit = fit_hardness_curve(pts)
            block = fit.to_json()
            block["pearson_r"] = correlate(pts) if len(pts) >= 3 else None
            fits[method] = block
        write_json(_out(cfg, FIT_FILE), {"schema": SCHEMA_VERSION, "reference": ref_path,
                                         "methods": fits})
        man.add_output(_out(cfg, HARDNESS_FILE))
        man.add_output(_out(cfg, FIT_FILE))
    return _run(cfg, "hardness", body)


# sweep ----------------------------------------------------------------------

def sweep_protocols(cfg):
    s = cfg.sweep
    out = []
    for v in s.values:
        way, shot, query = s.way, s.shot, s.query_shot
        if s.axis == "way":
            way = int(v)
        elif s.axis == "shot":
            shot = int(v)
        else:
            query = int(v)
        out.append((int(v), way, shot, query))
    return out


def cmd_sweep(cfg):
    def body(man):
        ds = load_run_dataset(cfg, man)
        split = run_split(cfg, ds)
        ckpt = _need(_out(cfg, CHECKPOINT_FILE), "checkpoint")
        man.add_input(ckpt)
        os.makedirs(os.path.join(cfg.out_dir, EPISODE_DIR, "sweep"), exist_ok=True)
        tasks, index = [], []
        for value, way, shot, query in sweep_protocols(cfg):
            check_entry(f"{cfg.sweep.axis}={value}", way, shot, query, ds, split.test)
            eps = mint_episodes(ds, split.test, way, shot, query, cfg.sweep.n_episodes,
                                seeds(cfg)["sweep"])
            path = os.path.join(cfg.out_dir, EPISODE_DIR, "sweep",
                                protocol_name(way, shot, query) + ".fsep")
            save_episodes(path, eps)
            for m in cfg.sweep.methods:
                for i in range(len(eps)):
                    tasks.append((path, i, m))
                index.append((value, m, len(eps)))
        rows = run_tasks(tasks, ckpt, cfg.adapt, cfg.run.workers)
        out, pos = [], 0
        for value, m, n in index:
            st = summarize([100.0 * r["accuracy"] for r in rows[pos:pos + n]])
            pos += n
            out.append({"axis": cfg.sweep.axis, "value": value, "method": m, "n": n,
                        "mean": st.mean, "std": st.std, "ci95": st.ci95})
        path = _out(cfg, f"sweep_{cfg.sweep.axis}.csv")
        write_csv(path, SWEEP_COLUMNS, out)
        man.add_output(path)
    return _run(cfg, "sweep", body)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain": cmd_pretrain,
    "episodes": cmd_episodes,
    "eval": cmd_eval,
    "hardness": cmd_hardness,
    "sweep": cmd_sweep,
}
