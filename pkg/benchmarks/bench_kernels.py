"""Compare the compiled and pure-Python kernels on a planted corpus.

    python benchmarks/bench_kernels.py [--pairs 5000] [--epochs 50] [--repeat 3]

Both backends must return bit-identical results; the script checks that before
reporting timings.
"""

import argparse
import random
import time

import numpy as np

from crossplat import _backend
from crossplat.features import FeatureContext
from crossplat.interests import build_vocabulary, item_interests
from crossplat.svm import SVMParams, train_linear_svm
from crossplat.synth import SynthSpec, generate_corpus


def best_of(repeat, fn):
    times, result = [], None
    for _ in range(repeat):
        started = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - started)
    return min(times), result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=5000)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    corpus, _ = generate_corpus(SynthSpec())
    interests = item_interests(corpus, build_vocabulary(corpus))
    rng = random.Random(0)
    users, items = corpus.users(), sorted(interests)
    pairs = [(rng.choice(users), rng.choice(items)) for _ in range(args.pairs)]

    def featurize(backend):
        # a fresh context per call so packing cost is included equally
        return FeatureContext.from_corpus(corpus, interests).featurize_pairs(pairs, backend)

    X = featurize("python")
    noise = np.random.default_rng(0)
    score = X @ noise.normal(size=X.shape[1]) + noise.normal(0.0, 0.3, len(X))
    y = np.where(score > np.median(score), 1, -1)

    def fit(backend):
        return train_linear_svm(X, y, SVMParams(epochs=args.epochs), backend=backend)

    backends = sorted(_backend.AVAILABLE)
    print(f"backends: {', '.join(backends)} (default {_backend.NAME})")
    print(f"corpus: {len(corpus.activities)} activities, {len(items)} items; {args.pairs} pairs; "
          f"SVM {len(X)} rows x {args.epochs} epochs")
    rows = {}
    for name in backends:
        t_feat, feats = best_of(args.repeat, lambda: featurize(name))
        t_svm, model = best_of(args.repeat, lambda: fit(name))
        rows[name] = (t_feat, t_svm, feats, model)
    ref = rows["python"]
    for name, (t_feat, t_svm, feats, model) in rows.items():
        same = np.array_equal(feats, ref[2]) and np.array_equal(model.weights, ref[3].weights)
        print(f"{name:>8}: featurize {t_feat * 1e3:9.1f} ms ({ref[0] / t_feat:6.1f}x)   "
              f"svm {t_svm * 1e3:9.1f} ms ({ref[1] / t_svm:6.1f}x)   identical to python: {same}")


if __name__ == "__main__":
    main()
