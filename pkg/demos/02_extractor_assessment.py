"""Ranking candidate feature extractors by evidence before any training.

Each extractor maps windows to feature vectors; the evidence score measures
how well a Bayesian linear model links those features to the labels. Higher
is better, and no classifier is ever fit.
"""

from motordiag.extractors import extract_all, get_extractor
from motordiag.logme import improvement_rate, logme_score, rank_extractors
from motordiag.pipeline import split, subset
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
train, _ = split(synth_windows(config), (0.8, 0.2), seed=0)
budget = subset(train, ratio=0.5, seed=0)

extractors = [get_extractor(e) for e in ("stat", "raw", "randproj:2:0")]
bundles = [extract_all(ex, budget) for ex in extractors]

print(f"Scoring {len(bundles)} extractors on {len(budget)} labeled windows:\n")
for bundle in bundles:
    report = logme_score(bundle)
    converged = all(r.converged for r in report.per_class)
    print(f"  {bundle.extractor_id:>14}: score={report.score:+.4f} "
          f"(D={bundle.dim}, all classes converged: {converged})")

ranking = rank_extractors(bundles)
print("\nRanking (best first):")
for place, (extractor_id, score) in enumerate(ranking, start=1):
    print(f"  {place}. {extractor_id}  {score:+.4f}")

best_id, best = ranking[0]
runner_id, runner = ranking[1]
if runner > 0:
    rate = improvement_rate(runner, best)
    print(f"\n{best_id} improves on {runner_id} by {rate:.1f}% of the lower score")
else:
    print(f"\nRelative improvement undefined: {runner_id} scored non-positive ({runner:+.4f})")
