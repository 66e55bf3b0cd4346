"""Train one CNN scale on the synthetic 3-class set and score a held-out split.

Prints a JSON summary. Run with ``OMP_NUM_THREADS=1`` (and the BLAS
equivalents) for a single-core timing.
"""

import argparse
import json
import time

import numpy as np

from respikit import synth
from respikit.classifier import ModelConfig, TrainConfig, build_model, classify_recording, preprocess, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train-per-class", type=int, default=100)
    ap.add_argument("--test-per-class", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--kernels", type=int, default=8)
    ap.add_argument("--dropout", type=float, default=0.25)
    ap.add_argument("--step", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    train_set = [(preprocess(b), y) for b, y in synth.toy_dataset(rng, args.train_per_class)]
    test_set = [(preprocess(b), y) for b, y in synth.toy_dataset(rng, args.test_per_class)]
    cfg = ModelConfig(d=128, b=3, l=1, k=args.kernels, dropout_p=args.dropout)
    model = build_model(cfg, seed=args.seed, strict=False)
    result = train(model, train_set, TrainConfig(epochs=args.epochs, seed=args.seed))
    correct = sum(int(np.argmax(classify_recording([model], s, step=args.step)) == y) for s, y in test_set)
    print(
        json.dumps(
            {
                "accuracy": correct / len(test_set),
                "test_recordings": len(test_set),
                "epochs": args.epochs,
                "parameters": model.parameter_count(),
                "loss_first": result.loss_history[0],
                "loss_last": result.loss_history[-1],
                "seconds": time.perf_counter() - start,
            },
            indent=2,
        )
    )


if __name__ == "__main__":
    main()
