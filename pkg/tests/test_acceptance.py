"""Acceptance criteria. Each test prints one ``[ACCEPT n] PASS|FAIL`` line.

Run alone with ``python3 -m pytest tests/test_acceptance.py -v``.
"""
import itertools
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from repalign import oracles
from repalign.data import EmbeddingSet, normalize_rows
from repalign.energy import EnergyTable, composition_matrix, energy_regression_mae
from repalign.global_metrics import dcor, information_imbalance, rank_table
from repalign.intrinsic_dim import mle_id, twonn_id
from repalign.kernel import center_kernel, cknna, embedding_cka, hsic, inner_product_kernel
from repalign.phylo import DistanceMatrix, jsd, neighbor_joining, to_newick
from repalign.synth import SharedLatentSpec, random_baseline, shared_latent_pair, uniform_manifold

from test_phylo import four_point_pairs, parse_newick, path_lengths, random_tree

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "scripts"))
import run_pipeline  # noqa: E402


@pytest.fixture
def report(capsys):
    def emit(num, title, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {num:2d}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        return ok

    return emit


def _gauss(n, d, seed):
    return normalize_rows(EmbeddingSet(f"s{seed}", np.random.default_rng(seed).normal(size=(n, d))))


def test_01_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst = {name: 0.0 for name in ("cknna", "cka", "hsic", "dcor", "ranks")}
    for inst in range(50):
        n = (16, 64, 128)[inst % 3]
        d = (3, 8, 17)[inst % 3]
        f, g = _gauss(n, d, 2 * inst), _gauss(n, d + 1, 2 * inst + 1)
        k = max(2, n // 8)
        worst["cknna"] = max(worst["cknna"], abs(cknna(f, g, k) - oracles.oracle_cknna(f, g, k)))
        worst["cka"] = max(worst["cka"], abs(embedding_cka(f, g) - oracles.oracle_cka(f, g)))
        kc = center_kernel(inner_product_kernel(f), "scalar")
        lc = center_kernel(inner_product_kernel(g), "scalar")
        worst["hsic"] = max(worst["hsic"], abs(hsic(kc, lc) - oracles.oracle_hsic(kc, lc)))
        worst["dcor"] = max(worst["dcor"], abs(dcor(f, g) - oracles.oracle_dcor(f, g)))
        distance = ("euclidean", "inner-product")[inst % 2]
        diff = np.abs(rank_table(f, distance).ranks - np.array(oracles.oracle_ranks(f, distance)))
        worst["ranks"] = max(worst["ranks"], float(diff.max()))
    elapsed = time.perf_counter() - t0
    ok = all(v <= 1e-10 for v in worst.values()) and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {elapsed:.1f}s"
    assert report(1, "oracle equivalence", ok, detail)


def test_02_self_alignment(report):
    worst = 0.0
    for i in range(20):
        d = (2, 512)[i % 2]
        f = EmbeddingSet("f", np.random.default_rng(100 + i).normal(size=(400, d)))
        worst = max(worst, abs(cknna(f, f, 25) - 1), abs(dcor(f, f) - 1))
    assert report(2, "self-alignment", worst <= 1e-10, f"max |value - 1| = {worst:.1e}")


def test_03_null_calibration(report):
    ck, dc = [], []
    for seed in range(20):
        f, g = random_baseline(1000, 32, 2 * seed), random_baseline(1000, 32, 2 * seed + 1)
        ck.append(abs(cknna(f, g, 25)))
        dc.append(dcor(f, g))
    ok = max(ck) < 0.1 and max(dc) < 0.15
    assert report(3, "null calibration", ok, f"max |cknna| {max(ck):.4f} (<0.1), max dcor {max(dc):.4f} (<0.15)")


def test_04_k_monotonicity(report):
    t0 = time.perf_counter()
    ks = (2, 25, 50, 100)
    table = np.zeros((10, len(ks)))
    for seed in range(10):
        f, g = shared_latent_pair(SharedLatentSpec(2000, 8, 32, 32, 0.5, "linear", seed))
        table[seed] = [cknna(f, g, k) for k in ks]
    means = table.mean(axis=0)
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(np.diff(means) >= -0.02)) and elapsed < 300
    detail = ", ".join(f"k={k}: {m:.3f}" for k, m in zip(ks, means)) + f"; {elapsed:.1f}s"
    assert report(4, "k-monotonicity", ok, detail)


def test_05_intrinsic_dimension(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for kind in ("line", "disk", "cube5", "cube10"):
        tw, ml = [], []
        for seed in range(10):
            pts, true_d = uniform_manifold(kind, 10_000, seed)
            s = EmbeddingSet(kind, pts)
            tw.append(twonn_id(s).value)
            ml.append(mle_id(s, 50).value)
        tw, ml = np.array(tw), np.array(ml)
        tw_ok = bool(np.all(np.abs(tw / true_d - 1) <= 0.15))
        ml_ok = bool(np.all(np.abs(ml / true_d - 1) <= 0.15))
        agree = bool(np.all(np.abs(tw - ml) / np.maximum(tw, ml) <= 0.2))
        ok &= tw_ok and ml_ok and agree
        lines.append(f"{kind}(d={true_d}) twonn [{tw.min():.2f},{tw.max():.2f}]{'' if tw_ok else '!'} "
                     f"mle [{ml.min():.2f},{ml.max():.2f}]{'' if ml_ok else '!'}{'' if agree else ' disagree'}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 180
    assert report(5, "intrinsic dimension", ok, "; ".join(lines) + f"; {elapsed:.1f}s")


def test_06_information_imbalance(report):
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        z, w = rng.normal(size=(2000, 2)), rng.normal(size=(2000, 2))
        p = information_imbalance(EmbeddingSet("f", np.hstack([z, w])), EmbeddingSet("g", z))
        wins += p.forward < p.backward
    f = EmbeddingSet("f", np.random.default_rng(99).normal(size=(2000, 4)))
    self_ii = information_imbalance(f, f).forward
    indep = [information_imbalance(EmbeddingSet("a", np.random.default_rng(s).normal(size=(2000, 4))),
                                   EmbeddingSet("b", np.random.default_rng(s + 50).normal(size=(2000, 4))))
             for s in range(3)]
    ind_vals = [v for p in indep for v in (p.forward, p.backward)]
    ok = wins >= 9 and self_ii == 2 / 2000 and all(0.9 <= v <= 1.1 for v in ind_vals)
    detail = (f"f->g < g->f in {wins}/10; delta(f,f) = {self_ii!r}; independent in "
              f"[{min(ind_vals):.3f}, {max(ind_vals):.3f}]")
    assert report(6, "information imbalance", ok, detail)


def test_07_neighbor_joining(report):
    ok, worst = True, 0.0
    for seed in range(25):
        rng = np.random.default_rng(1000 + seed)
        m = int(rng.integers(4, 13))
        truth = random_tree(m, rng)
        d = truth.leaf_distances()
        got = neighbor_joining(DistanceMatrix(truth.labels, d))
        want, have = truth.splits(), got.splits()
        ok &= set(want) == set(have) and four_point_pairs(got.leaf_distances()) == four_point_pairs(d)
        if set(want) == set(have):
            worst = max(worst, max(abs(have[s] - w) for s, w in want.items()))
        adj, leaves = parse_newick(to_newick(got, precision=12))
        back = path_lengths(adj, leaves)
        for i, j in itertools.combinations(range(m), 2):
            worst = max(worst, abs(back[truth.labels[i], truth.labels[j]] - d[i, j]))
    ok &= worst <= 1e-9
    assert report(7, "neighbor joining", ok, f"25 trees, topology {'exact' if ok else 'WRONG'}, "
                                            f"max length error {worst:.1e}")


def test_08_jsd(report):
    p = np.array([0.1, 0.2, 0.7])
    direct = 0.5 * (0.5 * math.log2(0.5 / 0.75) + 0.5 * math.log2(0.5 / 0.25)) + 0.5 * math.log2(1 / 0.75)
    checks = [jsd(p, p) == 0.0, jsd([1, 0], [0, 1]) == 1.0, abs(jsd([0.5, 0.5], [1, 0]) - direct) <= 1e-12]
    rng = np.random.default_rng(8)
    violations = 0
    for _ in range(10_000):
        a, b, c = rng.dirichlet(np.full(6, 0.3), size=3)
        violations += math.sqrt(jsd(a, c)) > math.sqrt(jsd(a, b)) + math.sqrt(jsd(b, c)) + 1e-12
    ok = all(checks) and violations == 0
    assert report(8, "JSD correctness", ok, f"identities {checks}, triangle violations {violations}/10000")


def test_09_energy_invariance(report):
    from scipy.linalg import null_space

    worst_shift, worst_orth = 0.0, 0.0
    elements = ("Fe", "H", "Li", "N", "O")
    for seed in range(10):
        rng = np.random.default_rng(seed)
        counts = rng.integers(0, 6, size=(200, len(elements)))
        counts[counts.sum(axis=1) == 0, 0] = 1
        comps = [{e: int(c) for e, c in zip(elements, row) if c} for row in counts]
        c = composition_matrix(comps, elements)
        e_true = c @ rng.normal(-4, 1, len(elements)) + rng.normal(0, 0.2, 200)
        basis = null_space(np.column_stack([np.ones(200), c]).T)
        s = basis @ rng.normal(size=basis.shape[1])
        t = EnergyTable([str(i) for i in range(200)], comps, e_true, {
            "shift": e_true + c @ rng.normal(0, 3, len(elements)) + rng.normal(0, 20),
            "orth": e_true + s,
        })
        worst_shift = max(worst_shift, energy_regression_mae(t, "shift"))
        worst_orth = max(worst_orth, abs(energy_regression_mae(t, "orth") - np.mean(np.abs(s))))
    ok = worst_shift <= 1e-8 and worst_orth <= 1e-8
    assert report(9, "energy-MAE invariance", ok,
                  f"shifted MAE {worst_shift:.1e}, |MAE - mean|s|| {worst_orth:.1e}")


def test_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    runs = [run_pipeline.run(tmp_path / f"run{r}", threads=1) for r in range(3)]
    runs += [run_pipeline.run(tmp_path / f"threads{t}", threads=t) for t in (4, 8)]
    names = list(runs[0])
    ok = all(r[n].read_bytes() == runs[0][n].read_bytes() for r in runs[1:] for n in names)
    emb = sorted((tmp_path / "run0" / "synth").glob("*.emb"))
    ok &= all((tmp_path / "threads8" / "synth" / p.name).read_bytes() == p.read_bytes() for p in emb)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    assert report(10, "determinism", ok, f"3 runs + threads 4, 8 byte-identical: {ok}; {elapsed:.1f}s")


SCALE_SCRIPT = """
import json, resource, time, warnings
warnings.simplefilter("ignore")
from repalign.aggregation import pairwise_matrix
from repalign.synth import shared_latent_views
t0 = time.perf_counter()
sets = shared_latent_views(20000, 16, [256] * 10, [0.5] * 10, "linear", 0, [f"m{i}" for i in range(10)])
m = pairwise_matrix(sets, "cknna", {"k": 25})
print(json.dumps({"seconds": time.perf_counter() - t0, "missing": len(m.missing),
                  "diag": float(abs(m.values.diagonal() - 1).max()),
                  "peak_mb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024}))
"""


@pytest.mark.slow
def test_11_scale(report):
    r = subprocess.run([sys.executable, "-c", SCALE_SCRIPT], capture_output=True, text=True, timeout=1800)
    if r.returncode != 0:
        report(11, "scale", False, r.stderr.strip().splitlines()[-1] if r.stderr else "crashed")
        pytest.fail(r.stderr)
    res = json.loads(r.stdout.strip().splitlines()[-1])
    # a dense N x N float64 matrix alone would need 20000^2 * 8 B = 3052 MiB
    budget_mb = 2048
    ok = res["missing"] == 0 and res["diag"] <= 1e-10 and res["peak_mb"] < budget_mb
    assert report(11, "scale", ok, f"10 models, N=20000, d=256 in {res['seconds']:.0f}s, "
                                   f"peak RSS {res['peak_mb']:.0f} MiB (< {budget_mb}), "
                                   f"missing cells {res['missing']}")
