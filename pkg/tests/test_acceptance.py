"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they execute.
"""

import io
import json
import math
import os
import time

import numpy as np
import pytest
from scipy import stats as scipy_stats

from scribbleprop.cli import main as cli_main
from scribbleprop.core import (load_dataset_index, save_image, save_labelmap,
                               save_scribbles)
from scribbleprop.energy import total_energy
from scribbleprop.evaluation import (SynthSpec, generate_synthetic, miou,
                                     shorten_scribbles)
from scribbleprop.features import FEATURE_DIM, superpixel_features
from scribbleprop.mincut import FlowNetwork, alpha_expansion, max_flow
from scribbleprop.predictor import RefPredictorModel, cross_entropy_loss_grad, predict
from scribbleprop.superpixel import segment_fh
from scribbleprop.trainer import (TrainConfig, alternate_train, build_context,
                                  propagate_image)

from helpers import exhaustive_argmin, exhaustive_min_energy, random_problem

NOISY_STD = 25.0
N_IMAGES = 20


def report(num, ok, detail):
    print(f"\n[ACCEPTANCE] criterion {num:02d} {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# shared datasets

@pytest.fixture(scope="module")
def clean_set():
    return [generate_synthetic(SynthSpec(seed=s, noise_std=0.0)) for s in range(N_IMAGES)]


@pytest.fixture(scope="module")
def noisy_set():
    return [generate_synthetic(SynthSpec(seed=s, noise_std=NOISY_STD))
            for s in range(N_IMAGES)]


@pytest.fixture(scope="module")
def noisy_dataset(tmp_path_factory, noisy_set):
    root = tmp_path_factory.mktemp("noisy")
    for sub in ("images", "masks", "scribbles"):
        os.makedirs(root / sub)
    index = []
    gts = {}
    for i, (img, gt, sset) in enumerate(noisy_set):
        name = f"img_{i:03d}"
        save_image(img, root / "images" / f"{name}.png")
        save_labelmap(gt, root / "masks" / f"{name}.png")
        sset.image_ref = name
        save_scribbles(sset, root / "scribbles" / f"{name}.json")
        gts[name] = gt
        index.append({"image": f"images/{name}.png",
                      "scribbles": f"scribbles/{name}.json", "mask": None})
    (root / "index.json").write_text(json.dumps(index))
    return load_dataset_index(root / "index.json"), gts


def mean_dataset_miou(state, gts):
    return float(np.mean([miou(state.labelmaps[n], gts[n], 8).mean for n in gts]))


@pytest.fixture(scope="module")
def trained_states(noisy_dataset):
    dataset, gts = noisy_dataset
    return {
        ("pairwise", 1): alternate_train(dataset, TrainConfig(outer_iterations=1)),
        ("pairwise", 3): alternate_train(dataset, TrainConfig(outer_iterations=3)),
        ("no_pairwise", 3): alternate_train(
            dataset, TrainConfig(outer_iterations=3, use_pairwise=False)),
    }


# ---------------------------------------------------------------------------

def enumerate_min_cut(n, arcs, s, t):
    """Vectorized brute-force min cut over all source-side subsets."""
    if not arcs:
        return 0.0
    others = np.array([v for v in range(n) if v not in (s, t)], dtype=np.int64)
    k = len(others)
    subsets = np.arange(1 << k)[:, None] >> np.arange(k) & 1  # (2^k, k)
    in_side = np.zeros((1 << k, n), dtype=bool)
    in_side[:, s] = True
    if k:
        in_side[:, others] = subsets.astype(bool)
    us = np.array([a[0] for a in arcs])
    vs = np.array([a[1] for a in arcs])
    caps = np.array([a[2] for a in arcs], dtype=np.float64)
    crossing = in_side[:, us] & ~in_side[:, vs]
    return float((crossing * caps).sum(axis=1).min())


def test_criterion_1_max_flow_oracle():
    rng = np.random.default_rng(1000)
    solve_time = 0.0
    failures = 0
    for _ in range(200):
        n = int(rng.integers(4, 13))
        s, t = 0, n - 1
        arcs = []
        net = FlowNetwork(n, s, t)
        for u in range(n):
            for v in range(n):
                if u != v and rng.random() < 0.35:
                    cap = float(rng.integers(0, 21))
                    net.add_arc(u, v, cap)
                    arcs.append((u, v, cap))
        t0 = time.perf_counter()
        got = max_flow(net).max_flow_value
        solve_time += time.perf_counter() - t0
        if got != enumerate_min_cut(n, arcs, s, t):
            failures += 1
    report(1, failures == 0 and solve_time < 1.0,
           f"max_flow == brute-force min cut on {200 - failures}/200 networks, "
           f"solver time {solve_time:.3f}s (< 1s)")


def test_criterion_2_binary_exactness():
    # both labelings are scored by the same total_energy so the equality
    # check is exact, free of summation-order float noise in the oracle
    rng = np.random.default_rng(2000)
    failures = 0
    for _ in range(100):
        n = int(rng.integers(2, 15))
        problem = random_problem(rng, n, 2)
        y = alpha_expansion(problem)
        y_star = exhaustive_argmin(problem)
        if total_energy(problem, y) > total_energy(problem, y_star):
            failures += 1
    report(2, failures == 0,
           f"alpha-expansion exactly minimal on {100 - failures}/100 binary problems")


def test_criterion_3_potts_bound():
    rng = np.random.default_rng(3000)
    failures = 0
    exact = 0
    for _ in range(100):
        n = int(rng.integers(2, 11))
        problem = random_problem(rng, n, 3)
        got = total_energy(problem, alpha_expansion(problem))
        best = exhaustive_min_energy(problem)
        if got > 2.0 * best + 1e-9:
            failures += 1
        if abs(got - best) <= 1e-9:
            exact += 1
    report(3, failures == 0,
           f"3-label energy within 2x optimum on {100 - failures}/100 problems; "
           f"empirical exact-match rate {exact}/100")


def test_criterion_4_monotone_descent(noisy_set):
    rng = np.random.default_rng(4000)
    worst = -math.inf
    moves = 0
    traces = []
    for _ in range(60):
        n = int(rng.integers(2, 12))
        num_labels = int(rng.integers(2, 5))
        problem = random_problem(rng, n, num_labels, forbid_prob=0.2)
        trace = []
        alpha_expansion(problem, trace=trace)
        traces.append(trace)
    # image-scale solves from the synthetic suite
    config = TrainConfig()
    for img, gt, sset in noisy_set[:5]:
        ctx = build_context(img, sset, config)
        from scribbleprop.energy import build_problem
        triples = [(i, j, w) for (i, j), w in zip(ctx.edges, ctx.weights)]
        problem = build_problem(ctx.scr_table, triples, ctx.universe)
        trace = []
        alpha_expansion(problem, trace=trace)
        traces.append(trace)
    for trace in traces:
        for before, after in zip(trace, trace[1:]):
            moves += 1
            worst = max(worst, after - before)
    report(4, worst <= 1e-9,
           f"energy non-increasing over {moves} expansion moves "
           f"(worst increase {worst:.2e} <= 1e-9)")


def test_criterion_5_clean_propagation(clean_set):
    segment_fh(clean_set[0][0], k=100.0, sigma=0.5, min_size=50)  # warm the jit
    t0 = time.perf_counter()
    scores = []
    for img, gt, sset in clean_set:
        labelmap, _ = propagate_image(img, sset)
        scores.append(miou(labelmap, gt, 8).mean)
    elapsed = time.perf_counter() - t0
    mean = float(np.mean(scores))
    report(5, mean >= 0.95 and elapsed < 10.0,
           f"clean-set mean mIoU {mean:.4f} (>= 0.95) in {elapsed:.2f}s (< 10s)")


def test_criterion_6_pairwise_direction(trained_states, noisy_dataset):
    _, gts = noisy_dataset
    with_pw = mean_dataset_miou(trained_states[("pairwise", 3)], gts)
    without_pw = mean_dataset_miou(trained_states[("no_pairwise", 3)], gts)
    report(6, with_pw >= without_pw,
           f"mean mIoU with pairwise {with_pw:.4f} >= without {without_pw:.4f}")


def test_criterion_7_scribble_length_direction(noisy_set):
    ratios = [1.0, 0.8, 0.5, 0.3, 0.0]
    means = []
    for ratio in ratios:
        scores = []
        for seed, (img, gt, sset) in enumerate(noisy_set):
            short = shorten_scribbles(sset, ratio, seed=seed)
            labelmap, _ = propagate_image(img, short)
            scores.append(miou(labelmap, gt, 8).mean)
        means.append(float(np.mean(scores)))
    rho = scipy_stats.spearmanr(ratios, means).statistic
    ok = means[0] >= means[-1] and rho >= 0.0
    detail = ", ".join(f"r={r:g}:{m:.3f}" for r, m in zip(ratios, means))
    report(7, ok, f"mIoU by length ratio [{detail}]; spearman {rho:.3f} >= 0")


def test_criterion_8_alternating_improvement(trained_states, noisy_dataset):
    _, gts = noisy_dataset
    after_1 = mean_dataset_miou(trained_states[("pairwise", 1)], gts)
    after_3 = mean_dataset_miou(trained_states[("pairwise", 3)], gts)
    report(8, after_3 >= after_1 - 0.01,
           f"mean propagated mIoU after 3 iters {after_3:.4f} >= "
           f"after 1 iter {after_1:.4f} - 0.01")


def test_criterion_9_gradient_check():
    rng = np.random.default_rng(9000)
    worst = 0.0
    for _ in range(20):
        n, num_labels = 5, int(rng.integers(2, 5))
        feats1 = np.concatenate([rng.random((n, FEATURE_DIM)), np.ones((n, 1))], axis=1)
        y = rng.integers(0, num_labels, size=n)
        w = rng.normal(scale=0.5, size=(num_labels, FEATURE_DIM + 1))
        l2 = float(rng.choice([0.0, 1e-4, 1e-2]))
        _, grad = cross_entropy_loss_grad(w, feats1, y, l2)
        h = 1e-5
        for r in range(num_labels):
            for c in range(FEATURE_DIM + 1):
                wp, wm = w.copy(), w.copy()
                wp[r, c] += h
                wm[r, c] -= h
                lp, _ = cross_entropy_loss_grad(wp, feats1, y, l2)
                lm, _ = cross_entropy_loss_grad(wm, feats1, y, l2)
                fd = (lp - lm) / (2 * h)
                denom = max(abs(fd), abs(grad[r, c]), 1e-8)
                worst = max(worst, abs(fd - grad[r, c]) / denom)
    report(9, worst < 1e-4,
           f"analytic vs central-difference gradient max rel err {worst:.2e} < 1e-4")


def test_criterion_10_normalization_partition_invariants(clean_set, noisy_set):
    worst_hist = 0.0
    worst_logp = 0.0
    partitions_ok = True
    config = TrainConfig()
    rng = np.random.default_rng(10000)
    for img, gt, sset in clean_set[:5] + noisy_set[:5]:
        spmap = segment_fh(img)
        ids = spmap.ids
        partitions_ok &= ids.min() == 0 and ids.max() == spmap.count - 1
        partitions_ok &= bool((np.bincount(ids.ravel(), minlength=spmap.count) > 0).all())
        feats = superpixel_features(img, spmap)
        worst_hist = max(worst_hist,
                         float(np.abs(feats[:, :75].sum(axis=1) - 1.0).max()),
                         float(np.abs(feats[:, 75:].sum(axis=1) - 1.0).max()))
        universe = sorted({int(v) for v in np.unique(gt.labels)})
        model = RefPredictorModel(universe,
                                  rng.normal(scale=2.0, size=(len(universe), FEATURE_DIM + 1)))
        logp = predict(model, img, spmap, feats=feats)
        worst_logp = max(worst_logp,
                         float(np.abs(np.exp(logp.values).sum(axis=2) - 1.0).max()))
    ok = partitions_ok and worst_hist <= 1e-9 and worst_logp <= 1e-6
    report(10, ok,
           f"partitions exact; histogram sum err {worst_hist:.2e} <= 1e-9; "
           f"log-prob exp-sum err {worst_logp:.2e} <= 1e-6")


def test_criterion_11_cli_service_equivalence(tmp_path, noisy_set):
    from fastapi.testclient import TestClient
    from PIL import Image

    from scribbleprop.service import create_app

    matches = 0
    with TestClient(create_app()) as client:
        for i in (0, 1):
            img, gt, sset = noisy_set[i]
            img_path = tmp_path / f"img{i}.png"
            save_image(img, img_path)
            scr_path = tmp_path / f"scr{i}.json"
            save_scribbles(sset, scr_path)
            out = tmp_path / f"out{i}"
            assert cli_main(["propagate", str(img_path), str(scr_path),
                             "--out", str(out)]) == 0
            cli_png = (out / "labels.png").read_bytes()
            cli_energy = json.loads((out / "stats.json").read_text())["energy"]

            buf = io.BytesIO()
            Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
            sid = client.post("/sessions", content=buf.getvalue()).json()["id"]
            client.put(f"/sessions/{sid}/scribbles",
                       json=json.loads(scr_path.read_text()))
            r = client.post(f"/sessions/{sid}/propagate", json={})
            service_png = client.get(f"/sessions/{sid}/labels.png").content
            if service_png == cli_png and r.json()["energy"] == cli_energy:
                matches += 1
    report(11, matches == 2,
           f"byte-identical label PNGs and equal energies on {matches}/2 images")
