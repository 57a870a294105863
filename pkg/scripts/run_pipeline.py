"""End-to-end synthetic pipeline: synth -> pairwise (CKNNA) -> condense -> tree.

Usage: python3 scripts/run_pipeline.py OUT_DIR [--threads T] [--n N] [--d D]

Writes synth/ (embeddings + manifest), cknna.csv, condensed.csv and tree.nwk
into OUT_DIR. Re-running with any thread count gives byte-identical files.
"""
import argparse
import sys
from pathlib import Path

from repalign.cli import main as repalign


def run(out, threads=1, n=2000, d=64, models=5, k=25, seed=0):
    out = Path(out)
    steps = [
        ["synth", "--out", str(out / "synth"), "--models", str(models), "--n", str(n), "--d", str(d),
         "--noise", "0.2", "0.4", "0.8", "1.2", "2.0", "--groups", "2", "--baseline", "--seed", str(seed)],
        ["pairwise", "--manifest", str(out / "synth" / "manifest.json"), "--metric", "cknna", "--k", str(k),
         "--threads", str(threads), "--out", str(out / "cknna.csv")],
        ["condense", "--matrix", str(out / "cknna.csv"), "--manifest", str(out / "synth" / "manifest.json"),
         "--out", str(out / "condensed.csv")],
        ["tree", "--matrix", str(out / "cknna.csv"), "--alpha", "0.5", "--clip-negative",
         "--out", str(out / "tree.nwk")],
    ]
    if models != 5:
        steps[0][steps[0].index("--noise") + 1:steps[0].index("--groups")] = ["0.5"]
    for argv in steps:
        code = repalign(argv)
        if code != 0:
            raise SystemExit(f"step {argv[0]} failed with exit code {code}")
    return {name: out / name for name in ("cknna.csv", "condensed.csv", "tree.nwk")}


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--models", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    for name, path in run(a.out, a.threads, a.n, a.d, a.models, seed=a.seed).items():
        print(f"{name}: {path}")
    sys.exit(0)
