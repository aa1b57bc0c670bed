"""Probe classifiers turn frozen features into an accuracy table.

Runs the four probe families over stat features at two label budgets,
grid-searching hyperparameters on a validation split carved out of the
training subset.
"""

import numpy as np

from motordiag.extractors import extract_all, get_extractor
from motordiag.pipeline import split, subset
from motordiag.probes import default_grid, evaluate, fit_predict, grid_search
from motordiag.synthetic import SynthConfig
from motordiag.workflows import synth_windows

config = SynthConfig(
    classes=(
        ("normal", 0.0),
        ("inter-turn", 35.0),
        ("inter-turn", 70.0),
        ("inter-turn", 100.0),
        ("inter-coil", 50.0),
        ("inter-coil", 90.0),
    ),
    per_class=12,
    duration_s=4.0,
    noise_sigma=0.02,
    seed=0,
)
train, test = split(synth_windows(config), (0.8, 0.2), seed=0)
stat = get_extractor("stat")
test_bundle = extract_all(stat, test)

print(f"{'ratio':>6} {'kind':>8} {'chosen hyperparameters':>34} {'accuracy':>9} {'macro F1':>9}")
for ratio in (0.10, 0.80):
    budget = subset(train, ratio, seed=0)
    fit_part, val_part = split(budget, (0.75, 0.25), seed=1)
    train_bundle = extract_all(stat, fit_part)
    val_bundle = extract_all(stat, val_part)
    for kind in ("linear", "knn", "tree", "forest"):
        grid = default_grid(kind, train_bundle.dim, n_train=train_bundle.n)
        best = grid_search(kind, grid, train_bundle, val_bundle, seed=0)
        predictions = fit_predict(kind, best.params, train_bundle, test_bundle, seed=0)
        accuracy, macro_f1 = evaluate(predictions, test_bundle.labels, test_bundle.num_classes)
        print(f"{ratio:>6.2f} {kind:>8} {str(best.params):>34} {accuracy:>9.3f} {macro_f1:>9.3f}")
