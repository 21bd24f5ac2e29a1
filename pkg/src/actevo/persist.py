"""JSON Lines persistence, run manifests and resume.

A results file starts with one ``run_header`` record carrying the full
configuration, followed by one record per evaluated candidate, flushed as
soon as the candidate is done. ``manifest.json`` next to it tracks how many
generations are complete.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from .config import SearchConfig
from .expr import count_space, parse
from .nn import TrainingMetrics
from .search import Candidate, GenerationRecord, SearchResult, run_search, train_candidate

RESULTS_NAME = "results.jsonl"
MANIFEST_NAME = "manifest.json"
CANDIDATE_KEYS = ("run_id", "strategy", "generation", "slot", "expr", "origin", "status",
                  "val_acc", "val_loss", "train_seconds", "seed", "extended_alphabet")


class ResumeMismatch(RuntimeError):
    pass


@dataclass
class RunManifest:
    run_id: str
    config_digest: str
    output_dir: str
    completed_generations: int = 0

    def write(self, out_dir: Path) -> None:
        tmp = out_dir / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2) + "\n")
        os.replace(tmp, out_dir / MANIFEST_NAME)

    @classmethod
    def read(cls, out_dir: Path) -> RunManifest:
        return cls(**json.loads((out_dir / MANIFEST_NAME).read_text()))


def header_record(cfg: SearchConfig) -> dict[str, Any]:
    return {
        "record": "run_header",
        "run_id": cfg.run_id(),
        "config_digest": cfg.digest(),
        "config": cfg.to_dict(),
        "policy": cfg.policy.to_dict(),
        "elites_reevaluated": False,
    }


def candidate_record(c: Candidate, cfg: SearchConfig) -> dict[str, Any]:
    return {
        "run_id": cfg.run_id(),
        "strategy": cfg.strategy,
        "generation": c.generation,
        "slot": c.slot,
        "expr": c.id,
        "origin": c.origin,
        "status": c.metrics.status,
        "val_acc": float(c.metrics.final_val_acc),
        "val_loss": float(c.metrics.final_val_loss),
        "train_seconds": round(float(c.train_seconds), 6),
        "seed": int(c.seed),
        "extended_alphabet": cfg.extended_alphabet,
    }


def dumps(rec: dict) -> str:
    return json.dumps(rec, allow_nan=False, separators=(", ", ": "))


def read_results(path: str | Path) -> tuple[dict | None, list[dict]]:
    """Header (or None) and candidate records of a results file. A torn last line is ignored."""
    header, records = None, []
    with open(path) as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            rec = json.loads(line)
            if rec.get("record") == "run_header":
                header = rec
            else:
                records.append(rec)
    return header, records


def generation_sizes(cfg: SearchConfig) -> list[int]:
    if cfg.strategy == "exhaustive":
        total = count_space(1, cfg.extended_alphabet)
        n = cfg.population
        return [min(n, total - start) for start in range(0, total, n)]
    return [cfg.population] * cfg.generations


def candidate_from_record(rec: dict, extended: bool) -> Candidate:
    metrics = TrainingMetrics(rec["val_loss"], rec["val_acc"], [], rec["status"])
    return Candidate(parse(rec["expr"], extended), rec["origin"], rec["generation"], rec["slot"],
                     metrics, rec["seed"], rec["train_seconds"])


def complete_generations(records: list[dict], cfg: SearchConfig) -> list[list[dict]]:
    """Leading generations whose records are all present, in slot order."""
    by_gen: dict[int, list[dict]] = {}
    for r in records:
        by_gen.setdefault(r["generation"], []).append(r)
    out = []
    for g, size in enumerate(generation_sizes(cfg)):
        recs = sorted(by_gen.get(g, []), key=lambda r: r["slot"])
        if len(recs) != size:
            break
        out.append(recs)
    return out


def _restored(gens: list[list[dict]], cfg: SearchConfig) -> list[GenerationRecord]:
    out = []
    for g, recs in enumerate(gens):
        cands = [candidate_from_record(r, cfg.extended_alphabet) for r in recs]
        # fitness and best-so-far are recomputed by the engine on resume
        out.append(GenerationRecord(g, cands, None, None))  # type: ignore[arg-type]
    return out


def run_to_dir(cfg: SearchConfig, out_dir: str | Path, *, resume: bool = False, jobs: int = 1,
               evaluator=train_candidate, on_generation=None) -> SearchResult:
    """Run a search, persisting every candidate to ``out_dir/results.jsonl``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = out / RESULTS_NAME
    digest = cfg.digest()
    done: list[list[dict]] = []

    if resume and (out / MANIFEST_NAME).exists():
        manifest = RunManifest.read(out)
        if manifest.config_digest != digest:
            raise ResumeMismatch(
                f"config digest {digest[:12]} does not match the run in {out} "
                f"({manifest.config_digest[:12]})")
        if results.exists():
            header, records = read_results(results)
            if header is not None and header.get("config_digest") != digest:
                raise ResumeMismatch("results header was written by a different config")
            done = complete_generations(records, cfg)

    manifest = RunManifest(cfg.run_id(), digest, str(out), len(done))
    with open(results, "w") as fh:
        fh.write(dumps(header_record(cfg)) + "\n")
        for recs in done:
            for r in recs:
                fh.write(dumps(r) + "\n")
        fh.flush()
        manifest.write(out)

        def sink(c: Candidate) -> None:
            fh.write(dumps(candidate_record(c, cfg)) + "\n")
            fh.flush()

        def generation_done(rec: GenerationRecord) -> None:
            manifest.completed_generations = rec.index + 1
            manifest.write(out)
            if on_generation is not None:
                on_generation(rec)

        return run_search(cfg, evaluator=evaluator, jobs=jobs, sink=sink,
                          resume_from=_restored(done, cfg), on_generation=generation_done)


def load_result(path: str | Path) -> SearchResult:
    """Rebuild a SearchResult (without per-epoch curves) from a results file."""
    from .search import fitness, top_k

    header, records = read_results(path)
    if header is None:
        raise ValueError(f"{path} has no run_header record")
    cfg = SearchConfig.from_dict(header["config"])
    gens: dict[int, list[Candidate]] = {}
    for r in records:
        gens.setdefault(r["generation"], []).append(candidate_from_record(r, cfg.extended_alphabet))
    out, history = [], []
    for g in sorted(gens):
        cands = sorted(gens[g], key=lambda c: c.slot)
        history.extend(cands)
        p = fitness([c.score(cfg.fitness) for c in cands])
        out.append(GenerationRecord(g, cands, p, top_k(history, 1)[0]))
    return SearchResult(cfg, out)
