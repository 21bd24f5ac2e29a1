import csv
import json
from collections import Counter

import numpy as np
import pytest

from actevo import numerics
from actevo.cli import best_per_generation, main
from actevo.config import SearchConfig, dump_config_text
from actevo.persist import (CANDIDATE_KEYS, MANIFEST_NAME, RESULTS_NAME, ResumeMismatch,
                            RunManifest, load_result, read_results, run_to_dir)

from conftest import fake_evaluator, tiny_config


class Interrupt(Exception):
    pass


def stable(path):
    """Result lines with the wall-clock field removed."""
    out = []
    for line in open(path):
        rec = json.loads(line)
        rec.pop("train_seconds", None)
        out.append(json.dumps(rec))
    return out


def test_results_file_layout(tmp_path):
    cfg = tiny_config(population=6, elite=1, random_inject=1, generations=2)
    run_to_dir(cfg, tmp_path, evaluator=fake_evaluator)
    header, recs = read_results(tmp_path / RESULTS_NAME)
    assert header["record"] == "run_header" and header["elites_reevaluated"] is False
    assert header["policy"]["epsilon"] == 1e-7
    assert len(recs) == 12
    assert all(tuple(r) == CANDIDATE_KEYS for r in recs)
    assert all(r["run_id"] == cfg.run_id() and r["extended_alphabet"] is False for r in recs)
    manifest = RunManifest.read(tmp_path)
    assert manifest.completed_generations == 2
    assert SearchConfig.from_dict(header["config"]).digest() == manifest.config_digest


def test_load_result_rebuilds_history(tmp_path):
    cfg = tiny_config()
    live = run_to_dir(cfg, tmp_path, evaluator=fake_evaluator)
    back = load_result(tmp_path / RESULTS_NAME)
    assert back.config == cfg
    assert [(c.id, c.val_acc, c.seed) for c in back.history] == \
        [(c.id, c.val_acc, c.seed) for c in live.history]
    assert back.generations[-1].best_so_far.id == live.generations[-1].best_so_far.id


def _interrupt_after_generation(k):
    def hook(rec):
        if rec.index == k:
            raise Interrupt
    return hook


def _interrupt_after_calls(n):
    calls = {"n": 0}

    def evaluator(tree, seed, cfg, data):
        calls["n"] += 1
        if calls["n"] > n:
            raise Interrupt
        return fake_evaluator(tree, seed, cfg, data)
    return evaluator


@pytest.mark.parametrize("strategy", ["evolution", "random"])
def test_resume_after_generation_boundary(tmp_path, strategy):
    cfg = tiny_config(strategy=strategy, generations=10)
    run_to_dir(cfg, tmp_path / "full", evaluator=fake_evaluator)
    with pytest.raises(Interrupt):
        run_to_dir(cfg, tmp_path / "cut", evaluator=fake_evaluator,
                   on_generation=_interrupt_after_generation(4))
    assert RunManifest.read(tmp_path / "cut").completed_generations == 5
    run_to_dir(cfg, tmp_path / "cut", resume=True, evaluator=fake_evaluator)
    assert stable(tmp_path / "full" / RESULTS_NAME) == stable(tmp_path / "cut" / RESULTS_NAME)


def test_resume_mid_generation_drops_partial_records(tmp_path):
    cfg = tiny_config(generations=6)
    run_to_dir(cfg, tmp_path / "full", evaluator=fake_evaluator)
    with pytest.raises(Interrupt):
        run_to_dir(cfg, tmp_path / "cut", evaluator=_interrupt_after_calls(23))
    # a torn final line, as left by a hard kill
    with open(tmp_path / "cut" / RESULTS_NAME, "a") as fh:
        fh.write('{"run_id": "evol')
    run_to_dir(cfg, tmp_path / "cut", resume=True, evaluator=fake_evaluator)
    assert stable(tmp_path / "full" / RESULTS_NAME) == stable(tmp_path / "cut" / RESULTS_NAME)


def test_resume_with_other_config_is_refused(tmp_path):
    run_to_dir(tiny_config(), tmp_path, evaluator=fake_evaluator)
    with pytest.raises(ResumeMismatch):
        run_to_dir(tiny_config(master_seed=99), tmp_path, resume=True, evaluator=fake_evaluator)


def test_resume_of_finished_run_is_a_no_op(tmp_path):
    cfg = tiny_config()
    run_to_dir(cfg, tmp_path, evaluator=fake_evaluator)
    before = stable(tmp_path / RESULTS_NAME)
    r = run_to_dir(cfg, tmp_path, resume=True, evaluator=_interrupt_after_calls(0))
    assert stable(tmp_path / RESULTS_NAME) == before and r.trainings == 0


# -- command line -------------------------------------------------------------

def _write_config(tmp_path, cfg):
    p = tmp_path / "run.ini"
    p.write_text(dump_config_text(cfg))
    return p


def test_cli_search_smoke(tmp_path, capsys):
    cfg = tiny_config(population=6, elite=1, random_inject=1, generations=2)
    ini = _write_config(tmp_path, cfg)
    assert main(["search", "--config", str(ini), "--out", str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / RESULTS_NAME).read_text().splitlines()
    assert len(lines) == 13
    assert main(["search", "--config", str(ini), "--out", str(tmp_path / "out"), "--resume"]) == 0
    assert main(["search", "--config", str(ini), "--out", str(tmp_path / "out"), "--resume",
                 "--seed", "12345"]) == 3


def test_cli_search_seed_and_alphabet_flags(tmp_path):
    cfg = tiny_config(population=4, elite=1, random_inject=1, generations=1)
    ini = _write_config(tmp_path, cfg)
    assert main(["search", "--config", str(ini), "--out", str(tmp_path / "o"),
                 "--seed", "5", "--extended-alphabet"]) == 0
    header, recs = read_results(tmp_path / "o" / RESULTS_NAME)
    assert header["config"]["search"]["master_seed"] == 5
    assert all(r["extended_alphabet"] for r in recs)


def test_cli_malformed_config(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[search]\npopulation = many\n")
    assert main(["search", "--config", str(ini), "--out", str(tmp_path / "o")]) == 2
    assert "[search] population" in capsys.readouterr().err
    ini.write_text("[search]\npopulation\n")
    assert main(["search", "--config", str(ini), "--out", str(tmp_path / "o")]) == 2
    assert "line  2" in capsys.readouterr().err


def test_cli_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["search"])
    assert info.value.code == 2


def _table(out):
    rows = [line.split() for line in out.splitlines() if line and not line.startswith("#")]
    return [list(map(float, r[:3])) for r in rows[1:]], rows[1:]


def test_cli_eval(capsys):
    assert main(["eval", "swish", "0"]) == 0
    (row,), _ = _table(capsys.readouterr().out)
    assert row == [0.0, 0.0, 0.5]
    assert main(["eval", "relu", "-1"]) == 0
    (row,), _ = _table(capsys.readouterr().out)
    assert row == [-1.0, 0.0, 0.0]
    assert main(["eval", "relu"]) == 0
    rows, _ = _table(capsys.readouterr().out)
    xs = [r[0] for r in rows]
    assert len(xs) == 101 and xs[0] == -5 and xs[-1] == 5
    np.testing.assert_allclose(np.diff(xs), 0.1, atol=1e-6)


def test_cli_eval_flags_non_finite(capsys):
    assert main(["eval", "diveps(one(x), nmin(x))", "--", "1", "-1e-7"]) == 0
    _, raw = _table(capsys.readouterr().out)
    assert "non-finite" not in " ".join(raw[0]) and "non-finite" in " ".join(raw[1])


def test_cli_eval_bad_expression(capsys):
    assert main(["eval", "relu(x)"]) == 2
    assert main(["eval", "mul(atan(x), nmin(x))"]) == 2
    assert main(["eval", "atan_nmin", "1", "--extended-alphabet"]) == 0


def test_cli_gradcheck(capsys):
    assert main(["gradcheck", "all-operators"]) == 0
    out = capsys.readouterr().out
    assert "31/31 passed" in out
    assert main(["gradcheck", "add(id(x), zero(x))", "--tol", "1e-10"]) == 0


def test_cli_gradcheck_negative_control(monkeypatch, capsys):
    good = numerics.UNARY["sigmoid"]

    def bad(x, p):
        v, d, m = good(x, p)
        return v, d + 1e-3, m

    monkeypatch.setitem(numerics.UNARY, "sigmoid", bad)
    assert main(["gradcheck", "all-operators"]) == 1
    assert "sigmoid" in [line.split()[0] for line in capsys.readouterr().out.splitlines()
                         if line.endswith("FAIL")]


def test_cli_enumerate(capsys):
    assert main(["enumerate"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3456 and lines[0] == "add(abs(x), abs(x))"
    assert main(["enumerate", "--depth", "2", "--count"]) == 0
    assert capsys.readouterr().out.strip() == "41278242816"
    assert main(["enumerate", "--count", "--extended-alphabet"]) == 0
    assert capsys.readouterr().out.strip() == "3750"


def _csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_cli_report(tmp_path):
    run_to_dir(tiny_config(generations=6), tmp_path, evaluator=fake_evaluator)
    assert main(["report", str(tmp_path / RESULTS_NAME), "--top", "5"]) == 0
    curve = _csv(tmp_path / "curve_best_per_gen.csv")
    assert [int(r["generation"]) for r in curve] == list(range(6))
    best = [float(r["best_val_acc_so_far"]) for r in curve]
    assert all(b >= a for a, b in zip(best, best[1:]))
    board = _csv(tmp_path / "leaderboard.csv")
    assert len(board) == 5 and len({r["expr"] for r in board}) == 5
    assert set(board[0]) >= {"expr", "val_acc", "val_loss"}
    assert main(["report", str(tmp_path / "missing.jsonl")]) == 2


def test_report_random_search_reordering(tmp_path):
    run_to_dir(tiny_config(strategy="random", generations=5), tmp_path, evaluator=fake_evaluator)
    _, recs = read_results(tmp_path / RESULTS_NAME)
    perm = [3, 0, 4, 2, 1]
    shuffled = [dict(r, generation=perm[r["generation"]]) for r in recs]
    a = Counter(row[1] for row in best_per_generation(recs))
    b = Counter(row[1] for row in best_per_generation(shuffled))
    assert a == b


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "actevo", "enumerate", "--count"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "3456"


def test_manifest_is_next_to_results(tmp_path):
    run_to_dir(tiny_config(generations=1), tmp_path, evaluator=fake_evaluator)
    assert (tmp_path / MANIFEST_NAME).exists()
