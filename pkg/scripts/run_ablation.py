"""Run the six-row ablation on a generated world and print the table.

Generates the data and the simulator first when they are missing.

    python scripts/run_ablation.py --config configs/default.json --seeds 0,1,2
"""

import argparse
import sys
from pathlib import Path

from futuregraph.cli import main
from futuregraph.config import RunConfig


def run(config: str | None, seeds: str | None) -> int:
    cfg = RunConfig.load(config) if config else RunConfig()
    common = ["--config", config] if config else []
    if not (Path(cfg.data_dir) / "train.jsonl").exists():
        if code := main(["gen", *common]):
            return code
    if not (Path(cfg.out_dir) / "sim.ckpt").exists():
        if code := main(["pretrain-sim", *common]):
            return code
    return main(["ablate", *common] + (["--seeds", seeds] if seeds else []))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seeds", help="comma-separated seeds (default: from the config)")
    a = ap.parse_args()
    sys.exit(run(a.config, a.seeds))
