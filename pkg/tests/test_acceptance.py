"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line
that is printed in the terminal summary."""
import dataclasses
import math
import zlib

import numpy as np
import pytest

from fewshotkit.cli import config as cfgmod
from fewshotkit.cli.commands import cmd_episodes, cmd_eval, cmd_gen_data, cmd_pretrain, seeds
from fewshotkit.errors import ConfigError
from fewshotkit.fewshot import AdaptConfig, build_model, evaluate_episode, head_logits, predict
from fewshotkit.fewshot.adapt import init_from_embeddings
from fewshotkit.metrics import (
    ReferenceExtractor,
    correlate,
    fit_hardness_curve,
    hardness,
    hardness_from_embeddings,
    log_odds_of_error,
    read_csv,
    summarize,
)
from fewshotkit.ndgrad import no_grad

from .conftest import ACCEPT_CFG, ACCEPT_SEEDS, ACCEPTANCE, accept_episodes
from .gradcheck import check_op
from .test_ndgrad import CASES

pytestmark = pytest.mark.acceptance


def record(num, title, ok, detail):
    ACCEPTANCE[num] = (bool(ok), title, detail)
    assert ok, f"criterion {num} ({title}) failed: {detail}"


episodes = accept_episodes


@pytest.fixture(scope="module")
def theta(accept_backbone):
    return accept_backbone.params


def test_c01_gradient_oracle():
    worst, name = 0.0, ""
    for case in sorted(CASES):
        build, sample = CASES[case]
        r = np.random.default_rng(zlib.crc32(case.encode()))
        for _ in range(5):
            err = check_op(build, sample(r), h=1e-5)
            if err > worst:
                worst, name = err, case
    record(1, "gradient oracle", worst < 1e-4,
           f"{len(CASES)} ops x 5 points, max rel err {worst:.2e} ({name}) < 1e-4")


def test_c02_support_init_exactness():
    head = init_from_embeddings(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 0], 1)
    err = np.abs(head.w.data - [[0.70711, 0.70711]]).max()
    exact = np.abs(head.w.data - math.sqrt(0.5)).max()
    rng = np.random.default_rng(0)
    emb = np.abs(rng.normal(size=(20, 7)))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    h5 = init_from_embeddings(emb, np.repeat(np.arange(5), 4), 5)
    norm_err = np.abs(np.linalg.norm(h5.w.data, axis=1) - 1).max()
    ok = exact < 1e-9 and err < 1e-5 and norm_err < 1e-9 and not head.b.data.any() \
        and not h5.b.data.any()
    record(2, "support-init exactness", ok,
           f"w={head.w.data[0].round(5).tolist()} (|w-sqrt(.5)|={exact:.1e}), b=0, "
           f"row-norm err {norm_err:.1e}")


def test_c03_one_shot_support_consistency(accept_data, theta):
    eps = episodes(accept_data, 5, 1, 500, stream="support-consistency")
    good = 0
    for ep in eps:
        m = build_model(theta, ep.support_x, ep.support_y, 5, ACCEPT_CFG.adapt)
        with no_grad():
            scores = head_logits(m, ep.support_x).data
        good += int(np.array_equal(predict(scores), ep.support_y))
    record(3, "1-shot support consistency", good == len(eps),
           f"{good}/{len(eps)} episodes label every support with its own class")


def test_c04_method_ordering(accept_table):
    res, seconds = accept_table
    mean = {m: 100 * np.mean([r.accuracy for r in rs]) for m, rs in res.items()}
    gain = mean["transductive"] - mean["init_only"]
    ok = (60 <= mean["init_only"] <= 80 and gain >= 2
          and mean["transductive"] >= mean["finetune"] - 0.5 and seconds < 300)
    record(4, "method ordering", ok,
           f"init {mean['init_only']:.2f}, finetune {mean['finetune']:.2f}, "
           f"transductive {mean['transductive']:.2f} (gain {gain:+.2f}) over 200 episodes "
           f"in {seconds:.0f}s")


def test_c05_entropy_descent(accept_table):
    res, _ = accept_table
    trans = res["transductive"]
    frac = np.mean([r.entropy_after < r.entropy_before for r in trans])
    record(5, "entropy descent", frac >= 0.95,
           f"query entropy fell on {100 * frac:.1f}% of {len(trans)} episodes (need >= 95%)")


def test_c06_hardness_validity(accept_data, theta):
    phi = ReferenceExtractor(theta)
    pts = []
    for way, n in ((5, 34), (10, 33), (20, 33)):
        for ep in episodes(accept_data, way, 1, n, stream="hardness"):
            phi.check_disjoint(ep.classes)
            acc = evaluate_episode(theta, ep, "transductive", ACCEPT_CFG.adapt).accuracy
            pts.append((hardness(ep, phi).omega, 100 * acc))
    r = correlate(pts)
    fit = fit_hardness_curve(pts)
    ok = r <= -0.5 and fit.slope < 0 and fit.residual_rms < 15
    record(6, "hardness validity", ok,
           f"r={r:.3f}, slope {fit.slope:.1f}, residual RMS {fit.residual_rms:.2f} "
           f"over {len(pts)} mixed-way episodes")


def test_c07_hardness_worked_values():
    half = log_odds_of_error([0.5] * 10)
    hand = hardness_from_embeddings(np.eye(2), [0, 1], np.array([[1.0, 0.0]]), [0], 2)
    ok = half == 0.0 and abs(hand + 1.0) < 1e-9
    record(7, "hardness worked values", ok, f"omega(p=.5)={half}, 2-way hand case {hand:.12f}")


def test_c08_scaling_trends(accept_data, theta):
    cfg = ACCEPT_CFG.adapt

    def mean_acc(way, shot):
        eps = episodes(accept_data, way, shot, 100, stream="scaling")
        return 100 * np.mean([evaluate_episode(theta, ep, "transductive", cfg).accuracy
                              for ep in eps])

    ways = {w: mean_acc(w, 1) for w in (5, 10, 20)}
    shots = {s: mean_acc(5, s) for s in (1, 2, 5)}
    ok = ways[5] >= ways[10] >= ways[20] and shots[1] <= shots[2] <= shots[5]
    fmt = lambda d, k: ", ".join(f"{v}{k}: {a:.1f}" for v, a in d.items())  # noqa: E731
    record(8, "scaling trends", ok, f"ways [{fmt(ways, 'w')}]; shots [{fmt(shots, 's')}]")


def test_c09_statistics_exactness():
    s = summarize([0.5, 0.7])
    xs = np.linspace(0, 10, 11)
    fit = fit_hardness_curve([(x, 100 - 10 * x) for x in xs])
    ok = (abs(s.mean - 0.6) < 1e-6 and abs(s.std - 0.141421) < 1e-6
          and abs(s.ci95 - 0.196000) < 1e-6 and abs(fit.area - 500) < 1e-6)
    record(9, "statistics exactness", ok,
           f"mean {s.mean:.6f}, std {s.std:.6f}, ci95 {s.ci95:.6f}, area {fit.area:.6f}")


GRID = ("5w1s", "5w5s", "10w1s")


@pytest.fixture(scope="module")
def grid_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_run")
    text = cfgmod.serialize(ACCEPT_CFG).replace("protocols = 5w1s, 5w5s",
                                                "protocols = " + ", ".join(GRID))
    text = text.replace("n_episodes = 200", "n_episodes = 30", 1)
    cfg = cfgmod.parse(text)
    cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, out_dir=str(out)))
    for cmd in (cmd_gen_data, cmd_pretrain, cmd_episodes, cmd_eval):
        cmd(cfg)
    return cfg, out


def test_c10_reproducibility(grid_run):
    cfg, out = grid_run
    first = (out / "results.csv").read_bytes()
    cmd_eval(cfg)
    second = (out / "results.csv").read_bytes()
    cmd_eval(dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, workers=4)))
    parallel = (out / "results.csv").read_bytes()
    ok = first == second == parallel
    record(10, "reproducibility", ok,
           f"rerun identical: {first == second}, 4 workers == serial: {first == parallel} "
           f"({len(first)} bytes)")


def test_c11_protocol_uniformity(grid_run):
    cfg, out = grid_run
    rows = read_csv(out / "results.csv")
    protos = sorted({r["protocol"] for r in rows})
    expected = sorted(f"{p}15q" for p in GRID)
    try:
        cfgmod.parse("[eval.5w1s]\nepochs = 10\n")
        per_protocol_rejected = False
    except ConfigError:
        per_protocol_rejected = True
    n = cfg.eval.n_episodes * len(cfg.eval.methods) * len(GRID)
    ok = protos == expected and len(rows) == n and per_protocol_rejected
    record(11, "protocol uniformity", ok,
           f"{len(GRID)} protocols {protos} from one config, {len(rows)} rows, one adapt "
           f"section (per-protocol sections rejected: {per_protocol_rejected})")
