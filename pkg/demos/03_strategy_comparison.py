"""
FedAvg, FedSGD and FedAvgen on the desk-scale task
==================================================

Runs the three aggregation strategies on one shared federation and prints
accuracy, loss and compute per round, followed by the comparison report.
"""

import sys

from fedlab.config import config_from_mapping
from fedlab.fedsim import build_federation, run_experiment
from fedlab.reporting import compare_report, summarize, summary_document

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = config_from_mapping({"seed": seed, "rounds": 30})

# every strategy starts from the same shards and initial weights
fed = build_federation(cfg)
print("clients:", len(fed.shards), " label histograms:", [s.histogram().tolist() for s in fed.shards[:3]], "...")

runs = {name: run_experiment(cfg, name, fed) for name in cfg.strategies}

print("\nround " + "".join(f"{name:>22}" for name in runs))
for r in range(0, cfg.rounds, 5):
    cells = [f"{recs[r].accuracy:.3f} / {recs[r].loss:.4f}" for recs in runs.values()]
    print(f"{r + 1:5d} " + "".join(f"{c:>22}" for c in cells))

# client compute per round is fixed by the payload kind
for name, recs in runs.items():
    print(f"{name:9s} client MACs per round: {recs[0].total_client_macs:>12,}  "
          f"server MACs per round: {recs[0].server_macs:>9,}")

summary = summary_document({k: summarize(v, cfg.accuracy_threshold) for k, v in runs.items()},
                           cfg.seed, cfg.rounds, cfg.accuracy_threshold)
print()
print(compare_report([(f"seed{seed}", summary)]))
