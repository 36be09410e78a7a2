"""Generate a world, pretrain the simulator, train, evaluate and export one future graph.

    python scripts/run_pipeline.py --config configs/smoke.json
"""

import argparse
import sys

from futuregraph.cli import main

STAGES = (["gen"], ["pretrain-sim"], ["train"], ["eval", "--split", "val"], ["eval"],
          ["export-graph", "--sample", "0"])


def run(config: str | None, verbose: bool) -> int:
    common = (["--config", config] if config else [])
    for stage in STAGES:
        argv = (["-v"] if verbose else []) + stage[:1] + common + stage[1:]
        print(f"$ futuregraph {' '.join(argv)}", flush=True)
        code = main(argv)
        if code:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON run config (defaults when omitted)")
    ap.add_argument("-v", "--verbose", action="store_true")
    a = ap.parse_args()
    sys.exit(run(a.config, a.verbose))
