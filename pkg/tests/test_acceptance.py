"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

The search comparison (criteria 5 and 6) trains ~1,500 networks. Its runs are
persisted under ``runs/acceptance`` (override with ACTEVO_ACCEPTANCE_DIR) and
resumed on the next invocation, so only the first run pays the full cost.

    pytest tests/test_acceptance.py -v -s
"""

import json
import math
import os
import signal
import statistics
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from actevo.cli import run_gradcheck
from actevo.config import DataSpec, SearchConfig, dump_config_text
from actevo.expr import count_space, enumerate_s1, parse
from actevo.nn import NetworkConfig, TrainConfig, init_network, loss_and_grads, train
from actevo.persist import RESULTS_NAME, RunManifest, read_results, run_to_dir
from actevo.rng import derive_seed, make_rng
from actevo.search import best_so_far_acc, best_so_far_loss, fitness, train_candidate

from conftest import tiny_config
from test_nn import SMOOTH, _numeric_grads

VERDICTS: list[str] = []
ROOT = Path(__file__).resolve().parents[1]
RUN_DIR = Path(os.environ.get("ACTEVO_ACCEPTANCE_DIR", ROOT / "runs" / "acceptance"))


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    print(line)


def stable_lines(path):
    out = []
    for line in Path(path).read_text().splitlines():
        rec = json.loads(line)
        rec.pop("train_seconds", None)
        out.append(json.dumps(rec))
    return out


def test_1_combinatorics():
    t0 = time.perf_counter()
    n1 = len(enumerate_s1())
    n2 = count_space(2)
    elapsed = time.perf_counter() - t0
    ok = n1 == 3456 and n2 == 41_278_242_816 and elapsed < 1.0
    verdict(1, ok, f"|S1|={n1}, |S2|={n2:,} in {elapsed:.2f}s")
    assert ok


def test_2_fitness_arithmetic():
    p = fitness([0.9, 0.1])
    r1 = p[0] / p[1]
    q = fitness([-0.01, -10.0])
    r2 = q[0] / q[1]
    ok = abs(r1 - math.exp(0.8)) <= 1e-9 and abs(r2 / math.exp(9.99) - 1) <= 1e-9
    verdict(2, ok, f"ratios {r1:.4f} (e^0.8) and {r2:,.1f} (e^9.99)")
    assert ok


def test_3_gradient_suite():
    t0 = time.perf_counter()
    errors = run_gradcheck("all-operators", n_points=100, h=1e-5, seed=0)
    worst_op = max(errors, key=errors.get)

    rng = make_rng(2024)
    X = rng.uniform(-1, 1, size=(8, 2))
    y = rng.integers(0, 3, 8)
    net_worst = 0.0
    for _ in range(5):
        ops = [SMOOTH[int(rng.integers(len(SMOOTH)))] for _ in range(2)]
        act = parse(f"{['add', 'sub', 'mul'][int(rng.integers(3))]}({ops[0]}(x), {ops[1]}(x))")
        net = init_network(NetworkConfig(2, 3, (4,), batch_norm=False), rng)
        _, analytic, _ = loss_and_grads(net, net.params, act, X, y)
        numeric = _numeric_grads(net, act, X, y)
        for k in analytic:
            a, n = analytic[k], numeric[k]
            err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-7)
            net_worst = max(net_worst, float(err.max()))
    elapsed = time.perf_counter() - t0
    ok = len(errors) == 31 and errors[worst_op] <= 1e-5 and net_worst <= 1e-4 and elapsed < 60
    verdict(3, ok, f"{len(errors)} operators, worst {worst_op} {errors[worst_op]:.2e}; "
                   f"network {net_worst:.2e}; {elapsed:.1f}s")
    assert ok


def test_4_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tiny_config(population=10, generations=3)
    run_to_dir(cfg, tmp_path / "a")
    run_to_dir(cfg, tmp_path / "b")
    a, b = stable_lines(tmp_path / "a" / RESULTS_NAME), stable_lines(tmp_path / "b" / RESULTS_NAME)
    elapsed = time.perf_counter() - t0
    ok = a == b and len(a) == 31 and elapsed < 600
    verdict(4, ok, f"{len(a)} lines identical apart from train_seconds: {a == b}; {elapsed:.1f}s")
    assert ok


# -- criteria 5 and 6: evolution vs random search on the default task ---------------

SEEDS = range(5)


def comparison_config(strategy: str, seed: int) -> SearchConfig:
    return SearchConfig(strategy=strategy, space_depth=2, population=20, elite=2, random_inject=4,
                        generations=8, fitness="loss_based", master_seed=seed,
                        train=TrainConfig(epochs=20))


@pytest.fixture(scope="module")
def comparison():
    runs = {}
    for seed in SEEDS:
        for strategy in ("evolution", "random"):
            cfg = comparison_config(strategy, seed)
            out = RUN_DIR / f"{strategy}-seed{seed}"
            runs[strategy, seed] = run_to_dir(cfg, out, resume=True)
    return runs


@pytest.mark.slow
def test_5_evolution_beats_random(comparison):
    wins, rows = 0, []
    for seed in SEEDS:
        evo = best_so_far_loss(comparison["evolution", seed])[-1]
        rnd = best_so_far_loss(comparison["random", seed])[-1]
        wins += evo <= rnd
        rows.append(f"seed {seed}: evo {evo:.4f} vs random {rnd:.4f}")
    med_evo = statistics.median(best_so_far_loss(comparison["evolution", s])[-1] for s in SEEDS)
    med_rnd = statistics.median(best_so_far_loss(comparison["random", s])[-1] for s in SEEDS)
    ok = wins >= 4
    verdict(5, ok, f"evolution <= random in {wins}/5 seeds (medians {med_evo:.4f} vs "
                   f"{med_rnd:.4f}); " + "; ".join(rows))
    assert ok


@pytest.mark.slow
def test_6_monotone_best_so_far(comparison):
    curves = [best_so_far_acc(comparison["evolution", s]) for s in SEEDS]
    ok = all(all(b >= a for a, b in zip(c, c[1:])) for c in curves)
    verdict(6, ok, "best-so-far val_acc per generation: " +
            "; ".join(" ".join(f"{v:.3f}" for v in c) for c in curves))
    assert ok


def test_7_known_good_functions_train():
    cfg = SearchConfig()
    data = cfg.data.build()
    results = {}
    for name in ("relu", "swish", "tanh_nmin", "atan_nmin"):
        tree = parse(name, extended_alphabet=name == "atan_nmin")
        results[name] = [train_candidate(tree, derive_seed("known-good", s), cfg, data)
                         for s in range(3)]
    ok = all(m.status == "completed" and m.final_val_acc >= 0.85
             for ms in results.values() for m in ms)
    verdict(7, ok, "; ".join(f"{k} " + "/".join(f"{m.final_val_acc:.3f}" for m in ms)
                             for k, ms in results.items()))
    assert ok


SINGULAR = "diveps(one(x), nmin(x))"


def singular_evaluator(tree, seed, cfg, data):
    """Train normally, except that the singular candidate gets a first layer whose
    every pre-activation is exactly -epsilon, the pole of diveps(., nmin(x))."""
    if str(tree) != SINGULAR:
        return train_candidate(tree, seed, cfg, data)
    net_cfg = replace(cfg.network_config(data), batch_norm=False)
    net = init_network(net_cfg, make_rng(derive_seed(seed, "init")))
    net.params["W0"][:] = 0.0
    net.params["b0"][:] = -cfg.policy.epsilon
    return train(net, tree, data, replace(cfg.train, seed=derive_seed(seed, "shuffle")), cfg.policy)


def test_8_divergence_handling(tmp_path):
    t0 = time.perf_counter()
    cfg = SearchConfig(population=8, elite=1, random_inject=2, generations=3,
                       initial_exprs=(SINGULAR,), master_seed=3,
                       train=TrainConfig(epochs=5), data=DataSpec(n_per_class=300))
    result = run_to_dir(cfg, tmp_path, evaluator=singular_evaluator)
    _, recs = read_results(tmp_path / RESULTS_NAME)
    first = result.generations[0]
    cand = first.candidates[0]
    weight = float(first.fitness_vector[0])
    capped = cand.val_loss == 20.0 and cand.val_acc == 0.0 and cand.metrics.status == "diverged"
    completed = len(result.generations) == 3 and len(recs) == 24
    elapsed = time.perf_counter() - t0
    # without the engineered weights, the same tree under normal training
    plain = train_candidate(parse(SINGULAR), 0, cfg, cfg.data.build())
    ok = capped and weight < 1e-6 and completed and elapsed < 300
    verdict(8, ok, f"status={cand.metrics.status} loss={cand.val_loss} acc={cand.val_acc} "
                   f"fitness weight {weight:.2e}; run completed {len(result.generations)} "
                   f"generations; unengineered run: {plain.status}; {elapsed:.1f}s")
    assert ok


def test_9_resume(tmp_path):
    """Kill a CLI search mid-run, resume it, and compare against an uninterrupted run."""
    t0 = time.perf_counter()
    cfg = replace(tiny_config(population=10, generations=6),
                  train=TrainConfig(epochs=6, batch_size=32),
                  data=DataSpec(n_per_class=200, val_per_class=40, test_per_class=10))
    ini = tmp_path / "run.ini"
    ini.write_text(dump_config_text(cfg))
    cmd = [sys.executable, "-m", "actevo", "search", "--config", str(ini)]

    subprocess.run(cmd + ["--out", str(tmp_path / "full")], check=True, capture_output=True)

    cut = tmp_path / "cut"
    proc = subprocess.Popen(cmd + ["--out", str(cut)], stdout=subprocess.DEVNULL,
                            stderr=subprocess.DEVNULL)
    killed_at = None
    while proc.poll() is None:
        try:
            done = RunManifest.read(cut).completed_generations
            lines = len((cut / RESULTS_NAME).read_text().splitlines())
        except (OSError, ValueError):
            done, lines = 0, 0
        if done >= 2 and lines > 1 + 10 * done:
            proc.send_signal(signal.SIGKILL)
            killed_at = (done, lines - 1)
            break
        time.sleep(0.01)
    proc.wait()
    subprocess.run(cmd + ["--out", str(cut), "--resume"], check=True, capture_output=True)

    full, resumed = stable_lines(tmp_path / "full" / RESULTS_NAME), stable_lines(cut / RESULTS_NAME)
    elapsed = time.perf_counter() - t0
    ok = killed_at is not None and full == resumed and elapsed < 900
    verdict(9, ok, f"killed after {killed_at[0] if killed_at else '?'} generations "
                   f"({killed_at[1] if killed_at else '?'} records); resumed output identical: "
                   f"{full == resumed}; {elapsed:.1f}s")
    assert ok
