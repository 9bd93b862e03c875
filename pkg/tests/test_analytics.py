"""Tag extraction and least-squares fitting against independent oracles."""

import json
import random

import numpy as np
import pytest

from gridscope.adapter import AccountingRecord, JobStatus
from gridscope.analytics import (
    DegenerateCovariate,
    InsufficientData,
    Metric,
    RegressionModel,
    TagRule,
    UnfittedModel,
    build_models,
    fit_model,
    load_rules,
    models_to_csv,
    predict,
    tag_job,
)
from gridscope.store import JobRecord, JobStore

TOOL_READS_RULE = TagRule(
    name="tool-and-reads",
    pattern=r"(?P<tool>[a-z0-9]+)_\w+_reads=(?P<reads>[\d.]+M?)",
    captures={"tool": "tool", "reads": "reads"},
    numeric_keys=frozenset({"reads"}),
)


def record(job_id, job_name="", command="", path=""):
    return JobRecord(job_id=job_id, job_name=job_name, command=command, path=path)


def normal_equations_fit(points):
    """Independent closed-form oracle: solve [[n,Sx],[Sx,Sxx]] [b,a] = [Sy,Sxy]."""
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    lhs = np.array([[len(xs), xs.sum()], [xs.sum(), (xs * xs).sum()]])
    rhs = np.array([ys.sum(), (xs * ys).sum()])
    intercept, slope = np.linalg.solve(lhs, rhs)
    return slope, intercept


class TestTagJob:
    def test_tool_and_read_count_extracted(self):
        tags = tag_job(record(1, job_name="bwa_ERR009309_reads=12.1M"), [TOOL_READS_RULE]).tags
        assert tags == {"tool": "bwa", "reads": 12_100_000.0}

    def test_no_matching_rule_gives_empty_tagset(self):
        result = tag_job(record(1, job_name="unrelated"), [TOOL_READS_RULE])
        assert result.tags == {}
        assert result.warnings == ()

    def test_non_numeric_capture_skipped_with_warning(self):
        rule = TagRule(
            name="bad",
            pattern=r"reads=(?P<reads>\w+)",
            captures={"reads": "reads"},
            numeric_keys=frozenset({"reads"}),
        )
        result = tag_job(record(1, job_name="x reads=abc"), [rule])
        assert "reads" not in result.tags
        assert len(result.warnings) == 1

    def test_first_matching_rule_wins_per_key(self):
        first = TagRule(name="first", pattern=r"(?P<t>alpha)", captures={"t": "tool"})
        second = TagRule(name="second", pattern=r"(?P<t>beta)", captures={"t": "tool"})
        tags = tag_job(record(1, job_name="alpha beta"), [first, second]).tags
        assert tags == {"tool": "alpha"}

    def test_searches_command_and_path_too(self):
        tags = tag_job(
            record(1, command="run bwa_s1_reads=2M now"), [TOOL_READS_RULE]
        ).tags
        assert tags["reads"] == 2_000_000.0

    def test_is_pure(self):
        r = record(1, job_name="bwa_x_reads=1M")
        assert tag_job(r, [TOOL_READS_RULE]) == tag_job(r, [TOOL_READS_RULE])

    def test_bad_rule_rejected_at_construction(self):
        with pytest.raises(Exception):
            TagRule(name="x", pattern=r"(?P<a>.)", captures={"b": "tool"})


class TestFitModel:
    def test_exact_line(self):
        model = fit_model([(1, 2), (2, 4), (3, 6)])
        assert model.slope == pytest.approx(2.0, abs=1e-12)
        assert model.intercept == pytest.approx(0.0, abs=1e-12)
        assert model.rmse == pytest.approx(0.0, abs=1e-12)

    def test_constant_metric(self):
        model = fit_model([(0, 1), (1, 1), (2, 1)])
        assert model.slope == pytest.approx(0.0, abs=1e-12)
        assert model.intercept == pytest.approx(1.0, abs=1e-12)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_model([(1, 1)])

    def test_degenerate_covariate(self):
        with pytest.raises(DegenerateCovariate):
            fit_model([(5, 1), (5, 2), (5, 3)])

    def test_matches_normal_equations_on_random_data(self):
        """Coefficients agree with the closed-form oracle to 1e-9 relative."""
        rng = random.Random(31)
        for _ in range(100):
            n = rng.randint(2, 60)
            points = [
                (rng.uniform(-100, 100), rng.uniform(-1000, 1000)) for _ in range(n)
            ]
            if len({x for x, _ in points}) < 2:
                continue
            model = fit_model(points)
            slope, intercept = normal_equations_fit(points)
            assert model.slope == pytest.approx(slope, rel=1e-9, abs=1e-9)
            assert model.intercept == pytest.approx(intercept, rel=1e-9, abs=1e-9)

    def test_perturbing_coefficients_never_improves_sse(self):
        """OLS optimality: +/- epsilon in any axis direction cannot reduce SSE."""
        rng = random.Random(77)
        points = [(rng.uniform(0, 50), rng.uniform(0, 500)) for _ in range(40)]
        model = fit_model(points)

        def sse(slope, intercept):
            return sum((y - (slope * x + intercept)) ** 2 for x, y in points)

        best = sse(model.slope, model.intercept)
        # epsilons large enough that the quadratic SSE growth clears fp noise
        for eps in (1e-3, 0.1, 1.0):
            for ds, di in ((eps, 0), (-eps, 0), (0, eps), (0, -eps)):
                assert sse(model.slope + ds, model.intercept + di) >= best


class TestPredict:
    def model(self, slope, intercept, rmse=0.5, n=3):
        return RegressionModel(
            tag_filter={"tool": "bwa"},
            covariate_key="reads",
            metric=Metric.ElapsedSeconds,
            slope=slope,
            intercept=intercept,
            n=n,
            rmse=rmse,
        )

    def test_linear_estimate(self):
        assert predict(self.model(2.0, 0.0), 5)["value"] == 10.0

    def test_negative_estimates_floored_at_zero(self):
        assert predict(self.model(-3.0, 1.0), 10)["value"] == 0.0

    def test_in_sample_point_of_exact_fit(self):
        model = fit_model([(1, 2), (2, 4), (3, 6)])
        assert predict(model, 2)["value"] == pytest.approx(4.0, abs=1e-12)

    def test_unfitted_model(self):
        with pytest.raises(UnfittedModel):
            predict(None, 1)


class TestBuildModels:
    def add_finalized(self, store, job_id, name, elapsed, max_mem):
        store.upsert_job(JobRecord(job_id=job_id, job_name=name, user="u", time_added=f"t{job_id}"))
        store.finalize_job(
            job_id,
            AccountingRecord(job_id, JobStatus.Completed, int(elapsed), int(max_mem), 0),
        )

    def test_cardinality_bound_two_tools(self):
        store = JobStore(":memory:")
        for i in range(10):
            tool = "bwa" if i % 2 else "hisat2"
            self.add_finalized(store, i + 1, f"{tool}_s{i}_reads={i + 1}M", 100 * i + 5, 4096)
        report = build_models(store, [TOOL_READS_RULE], ["tool"])
        assert len(report.models) <= 4
        store.close()

    def test_single_sample_groups_skipped(self):
        store = JobStore(":memory:")
        self.add_finalized(store, 1, "bwa_s_reads=1M", 10, 1)
        self.add_finalized(store, 2, "hisat2_s_reads=2M", 20, 2)
        report = build_models(store, [TOOL_READS_RULE], ["tool"])
        assert report.models == []
        assert len(report.skipped) == 4  # 2 tools x 2 metrics, all too thin
        store.close()

    def test_recovers_planted_linear_relationship(self):
        """elapsed = 3*reads + 7 exactly -> slope 3, intercept 7 within 1e-9."""
        store = JobStore(":memory:")
        for i, reads in enumerate((1, 2, 5, 9, 12), start=1):
            self.add_finalized(store, i, f"bwa_s{i}_reads={reads}", 3 * reads + 7, 1024)
        report = build_models(store, [TOOL_READS_RULE], ["tool"])
        elapsed = next(m for m in report.models if m.metric is Metric.ElapsedSeconds)
        assert elapsed.slope == pytest.approx(3.0, abs=1e-9)
        assert elapsed.intercept == pytest.approx(7.0, abs=1e-9)
        assert elapsed.tag_filter == {"tool": "bwa"}
        store.close()

    def test_insertion_order_independent(self):
        jobs = [(i, f"bwa_s{i}_reads={i}M", 11 * i + 3) for i in range(1, 8)]
        results = []
        for seed in (1, 2):
            store = JobStore(":memory:")
            shuffled = jobs[:]
            random.Random(seed).shuffle(shuffled)
            for job_id, name, elapsed in shuffled:
                self.add_finalized(store, job_id, name, elapsed, 77)
            report = build_models(store, [TOOL_READS_RULE], ["tool"])
            results.append(models_to_csv(report.models))
            store.close()
        assert results[0] == results[1]

    def test_non_finalized_jobs_excluded(self):
        store = JobStore(":memory:")
        store.upsert_job(JobRecord(job_id=1, job_name="bwa_s_reads=1M", time_added="t"))
        store.upsert_job(JobRecord(job_id=2, job_name="bwa_s_reads=2M", time_added="t"))
        report = build_models(store, [TOOL_READS_RULE], ["tool"])
        assert report.models == []
        store.close()


class TestRulesFile:
    def test_load_rules_round_trip(self, tmp_path):
        payload = [
            {
                "name": "aligner",
                "pattern": r"(?P<tool>\w+)_reads=(?P<reads>[\d.]+M?)",
                "captures": {"tool": "tool", "reads": "reads"},
                "numericKeys": ["reads"],
            }
        ]
        path = tmp_path / "rules.json"
        path.write_text(json.dumps(payload))
        rules = load_rules(path)
        assert len(rules) == 1
        tags = tag_job(record(1, job_name="bwa_reads=12.1M"), rules).tags
        assert tags == {"tool": "bwa", "reads": 12_100_000.0}
