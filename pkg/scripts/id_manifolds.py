"""TwoNN and MLE intrinsic dimension on uniform samples of known manifolds.

Usage: python3 scripts/id_manifolds.py [--n 10000] [--seeds 10] [--k 50]
"""
import argparse
import warnings

import numpy as np

from repalign.data import EmbeddingSet
from repalign.intrinsic_dim import mle_id, twonn_id
from repalign.synth import uniform_manifold

ap = argparse.ArgumentParser()
ap.add_argument("--n", type=int, default=10_000)
ap.add_argument("--seeds", type=int, default=10)
ap.add_argument("--k", type=int, default=50)
ap.add_argument("--kinds", nargs="+", default=["line", "disk", "cube5", "cube10"])
args = ap.parse_args()
warnings.simplefilter("ignore")

print("manifold,true_d,twonn_mean,twonn_min,twonn_max,mle_mean,mle_min,mle_max")
for kind in args.kinds:
    tw, ml = [], []
    for seed in range(args.seeds):
        pts, d = uniform_manifold(kind, args.n, seed)
        s = EmbeddingSet(kind, pts)
        tw.append(twonn_id(s).value)
        ml.append(mle_id(s, args.k).value)
    tw, ml = np.array(tw), np.array(ml)
    print(f"{kind},{d},{tw.mean():.3f},{tw.min():.3f},{tw.max():.3f},{ml.mean():.3f},{ml.min():.3f},{ml.max():.3f}")
