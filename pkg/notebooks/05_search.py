"""Evolution against random search, persisted, resumed and reported.

A deliberately small run so it finishes in a few minutes on one core. The
full comparison lives in tests/test_acceptance.py.
Run: python notebooks/05_search.py [output dir]
"""

import sys
from pathlib import Path

from actevo.cli import main as cli
from actevo.config import SearchConfig
from actevo.nn import TrainConfig
from actevo.persist import RESULTS_NAME, run_to_dir
from actevo.search import best_so_far_acc, best_so_far_loss, top_k

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/notebook")
common = dict(population=12, elite=2, random_inject=3, generations=4, master_seed=1,
              train=TrainConfig(epochs=10))

results = {}
for strategy in ("evolution", "random"):
    cfg = SearchConfig(strategy=strategy, **common)
    # resume=True makes a rerun pick up finished generations instead of retraining
    results[strategy] = run_to_dir(cfg, out / strategy, resume=True)
    r = results[strategy]
    print(f"{strategy:9s} trainings {r.trainings:3d} cache hits {r.cache_hits:3d}")
    print("  best-so-far val_loss:", [round(v, 4) for v in best_so_far_loss(r)])
    print("  best-so-far val_acc: ", [round(v, 3) for v in best_so_far_acc(r)])

for c in top_k(results["evolution"], 3):
    print(f"  {c.val_acc:.3f} {c.val_loss:.4f} {c.id}")

cli(["report", str(out / "evolution" / RESULTS_NAME), "--top", "5"])
