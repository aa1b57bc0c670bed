"""Assessment and sweep orchestration plus report rendering."""

import numpy as np
import pytest

from motordiag.extractors import extract_all, get_extractor
from motordiag.pipeline import split
from motordiag.probes import evaluate, fit_predict
from motordiag.synthetic import SynthConfig
from motordiag.workflows import (
    SweepSpec,
    render_assess_report,
    report_render,
    run_assess,
    run_sweep,
    synth_windows,
)

SMALL = SynthConfig(
    classes=(("normal", 0.0), ("inter-turn", 60.0), ("inter-coil", 80.0)),
    per_class=8,
    duration_s=2.0,
    noise_sigma=0.02,
    seed=0,
)


@pytest.fixture(scope="module")
def small_split():
    return split(synth_windows(SMALL), (0.8, 0.2), 0)


class TestRunAssess:
    def test_score_table_and_ranking(self, small_split):
        train, _ = small_split
        report = run_assess(train, ["stat", "raw", "randproj:2:0"], ratios=(0.5, 1.0))
        assert report["extractors"] == ["stat", "raw", "randproj:2:0"]
        assert set(report["scores"]["stat"]) == {"0.5", "1"}
        for ratio in ("0.5", "1"):
            assert report["ranking"][ratio][0][0] == "stat"
            assert len(report["improvement"][ratio]) == 2
            per_class = report["per_class"][ratio]["stat"]
            assert len(per_class) == train.num_classes
        rendered = render_assess_report(report)
        lines = rendered.strip().split("\n")
        assert lines[0] == "extractor,ratio_0.5,ratio_1"
        assert len(lines) == 1 + 3 + 2  # header + extractors + improvement rows

    def test_single_extractor_no_improvement_rows(self, small_split):
        train, _ = small_split
        report = run_assess(train, ["stat"], ratios=(1.0,))
        rendered = render_assess_report(report)
        assert "improvement" not in rendered
        assert report["improvement"]["1"] == []

    def test_undefined_improvement_is_none(self, small_split):
        # Desk-scale evidence scores can be negative, where a relative
        # improvement rate is undefined.
        train, _ = small_split
        report = run_assess(train, ["raw", "randproj:2:0"], ratios=(1.0,))
        entry = report["improvement"]["1"][0]
        if entry["rate_pct"] is None:
            assert "n/a" in render_assess_report(report)


class TestRunSweep:
    def test_full_ratio_reduces_to_direct_probe_run(self, small_split):
        train, test = small_split
        spec = SweepSpec(ratios=(1.0,), seeds=(0,), probe_kinds=("linear",))
        rows = run_sweep(spec, train, test, measure_time=False)
        assert len(rows) == 1
        stat = get_extractor("stat")
        direct = fit_predict(
            "linear", {"lam": 1e-2}, extract_all(stat, train), extract_all(stat, test), seed=0
        )
        accuracy, macro_f1 = evaluate(direct, test.labels, num_classes=test.num_classes)
        assert rows[0]["accuracy"] == accuracy
        assert rows[0]["macro_f1"] == macro_f1
        assert rows[0]["error"] is None

    def test_more_data_never_hurts_on_average(self, small_split):
        train, test = small_split
        spec = SweepSpec(ratios=(0.1, 0.8), seeds=(0, 1, 2, 3, 4), probe_kinds=("linear", "knn"))
        rows = run_sweep(spec, train, test, measure_time=False)
        for method in ("probe:linear", "probe:knn"):
            by_ratio = {
                ratio: np.mean(
                    [r["accuracy"] for r in rows if r["method"] == method and r["ratio"] == ratio]
                )
                for ratio in (0.1, 0.8)
            }
            assert by_ratio[0.8] >= by_ratio[0.1]

    def test_rows_in_canonical_order_and_deterministic(self, small_split, tmp_path):
        train, test = small_split
        spec = SweepSpec(ratios=(0.5, 1.0), seeds=(1, 0), probe_kinds=("linear",))
        rows = run_sweep(spec, train, test, measure_time=False)
        keys = [(r["ratio"], r["seed"], r["method"]) for r in rows]
        assert keys == sorted(keys)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        report_render(rows, p1)
        report_render(run_sweep(spec, train, test, measure_time=False), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_parallel_jobs_match_serial(self, small_split):
        train, test = small_split
        spec = SweepSpec(ratios=(0.5, 1.0), seeds=(0, 1), probe_kinds=("linear", "tree"))
        serial = run_sweep(spec, train, test, jobs=1, measure_time=False)
        parallel = run_sweep(spec, train, test, jobs=4, measure_time=False)
        assert serial == parallel

    def test_failed_cell_recorded_and_sweep_continues(self, small_split):
        train, test = small_split
        # An unknown fine-tuning mode fails its cell; the probe cell survives.
        spec = SweepSpec(ratios=(1.0,), seeds=(0,), probe_kinds=("linear",), finetune_modes=("warp",))
        rows = run_sweep(spec, train, test, measure_time=False)
        assert len(rows) == 2
        failed = [r for r in rows if r["method"] == "finetune:warp"]
        assert failed[0]["error"] == "FAIL:finetune:warp"
        ok = [r for r in rows if r["method"] == "probe:linear"]
        assert ok[0]["error"] is None

    def test_finetune_modes_run(self, small_split):
        train, test = small_split
        spec = SweepSpec(
            ratios=(1.0,),
            seeds=(0,),
            probe_kinds=(),
            finetune_modes=("frozen", "lora:2"),
            epochs=5,
            hidden=8,
        )
        rows = run_sweep(spec, train, test, measure_time=False)
        assert [r["method"] for r in rows] == ["finetune:frozen", "finetune:lora:2"]
        assert all(r["error"] is None for r in rows)

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="increasing"):
            SweepSpec(ratios=(0.5, 0.1))
        with pytest.raises(ValueError, match="ratios"):
            SweepSpec(ratios=(0.0, 0.5))


class TestReportRender:
    ROWS = [
        {
            "ratio": 0.1,
            "seed": 0,
            "method": "probe:linear",
            "accuracy": 0.98765,
            "macro_f1": 0.97654,
            "train_seconds": 0.123456,
            "error": None,
        },
        {
            "ratio": 0.1,
            "seed": 0,
            "method": "probe:tree",
            "accuracy": None,
            "macro_f1": None,
            "train_seconds": 0.0,
            "error": "FAIL:probe:tree",
        },
    ]

    def test_four_decimal_rendering_and_fail_marker(self, tmp_path):
        path = tmp_path / "out.csv"
        text = report_render(self.ROWS, path)
        lines = text.strip().split("\n")
        assert lines[0] == "ratio,seed,method,accuracy,macro_f1,train_seconds"
        assert lines[1] == "0.1000,0,probe:linear,0.9877,0.9765,0.1235"
        assert lines[2] == "0.1000,0,probe:tree,FAIL:probe:tree,FAIL:probe:tree,0.0000"
        assert path.read_text() == text

    def test_rerender_identical_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        report_render(self.ROWS, p1, tmp_path / "a.json", config={"x": 1})
        report_render(self.ROWS, p2, tmp_path / "b.json", config={"x": 1})
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_empty_results_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no results"):
            report_render([], tmp_path / "out.csv")

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        report_render(self.ROWS, tmp_path / "out.csv")
        assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]
