"""Tag archived jobs with regex rules and fit per-tag resource models.

A rule's named capture groups pull covariates (tool name, read count, ...)
out of a job's name, command, or script path; per-group ordinary least
squares then relates a numeric covariate to elapsed time or peak memory so
future jobs can be sized from history.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .grammar import parse_duration
from .store import HistoryQuery, JobRecord, JobStore


class AnalyticsError(Exception):
    pass


class InsufficientData(AnalyticsError):
    pass


class DegenerateCovariate(AnalyticsError):
    pass


class UnfittedModel(AnalyticsError):
    pass


class Metric(Enum):
    ElapsedSeconds = "elapsed_seconds"
    MaxMemoryBytes = "max_memory_bytes"


_NUMERIC_MULTIPLIERS = {"k": 1e3, "K": 1e3, "M": 1e6, "G": 1e9}


@dataclass(frozen=True)
class TagRule:
    name: str
    pattern: str
    captures: dict[str, str]  # regex group name -> tag key
    numeric_keys: frozenset[str] = frozenset()

    def __post_init__(self):
        compiled = re.compile(self.pattern)
        unknown = set(self.captures) - set(compiled.groupindex)
        if unknown:
            raise AnalyticsError(f"rule {self.name}: captures {unknown} not in pattern")
        values = list(self.captures.values())
        if len(values) != len(set(values)):
            raise AnalyticsError(f"rule {self.name}: duplicate tag keys")

    @property
    def regex(self) -> re.Pattern:
        return re.compile(self.pattern)


@dataclass(frozen=True)
class TagSet:
    job_id: int
    tags: dict[str, str | float]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class RegressionModel:
    tag_filter: dict[str, str]
    covariate_key: str
    metric: Metric
    slope: float
    intercept: float
    n: int
    rmse: float


def parse_numeric_tag(text: str) -> float:
    """Parse a numeric capture, honoring k/M/G multiplier suffixes (12.1M -> 12.1e6)."""
    text = text.strip()
    if text and text[-1] in _NUMERIC_MULTIPLIERS:
        value = float(text[:-1]) * _NUMERIC_MULTIPLIERS[text[-1]]
    else:
        value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite numeric tag {text!r}")
    return value


def tag_job(record: JobRecord, rules: list[TagRule]) -> TagSet:
    """Apply rules over (jobName, command, path); first match wins per tag key."""
    tags: dict[str, str | float] = {}
    warnings: list[str] = []
    haystacks = (record.job_name, record.command, record.path)
    for rule in rules:
        match = None
        for haystack in haystacks:
            match = rule.regex.search(haystack)
            if match:
                break
        if not match:
            continue
        for group_name, tag_key in rule.captures.items():
            if tag_key in tags:
                continue
            raw = match.group(group_name)
            if raw is None:
                continue
            if tag_key in rule.numeric_keys:
                try:
                    tags[tag_key] = parse_numeric_tag(raw)
                except ValueError:
                    warnings.append(
                        f"rule {rule.name}: tag {tag_key}={raw!r} is not numeric; skipped"
                    )
            else:
                tags[tag_key] = raw
    return TagSet(job_id=record.job_id, tags=tags, warnings=tuple(warnings))


def fit_model(
    points: list[tuple[float, float]],
    tag_filter: dict[str, str] | None = None,
    covariate_key: str = "",
    metric: Metric = Metric.ElapsedSeconds,
) -> RegressionModel:
    """Ordinary least squares over (covariate, metric) pairs."""
    n = len(points)
    if n < 2:
        raise InsufficientData(f"need at least 2 points, got {n}")
    mean_x = sum(x for x, _ in points) / n
    mean_y = sum(y for _, y in points) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in points)
    if sxx == 0.0:
        raise DegenerateCovariate("covariate has zero variance")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in points)
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    sse = sum((y - (slope * x + intercept)) ** 2 for x, y in points)
    return RegressionModel(
        tag_filter=dict(tag_filter or {}),
        covariate_key=covariate_key,
        metric=metric,
        slope=slope,
        intercept=intercept,
        n=n,
        rmse=math.sqrt(sse / n),
    )


def predict(model: RegressionModel | None, covariate: float) -> dict:
    """Point estimate with the fit's rmse as its uncertainty, floored at 0."""
    if model is None or model.n < 2:
        raise UnfittedModel("no fitted model")
    raw = model.slope * covariate + model.intercept
    return {"value": max(0.0, raw), "rmse": model.rmse}


@dataclass
class ModelReport:
    models: list[RegressionModel] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def metric_value(record: JobRecord, metric: Metric) -> float | None:
    if metric is Metric.MaxMemoryBytes:
        return float(record.maximum_memory)
    try:
        return float(parse_duration(record.final_run_time))
    except ValueError:
        return None


def build_models(
    store: JobStore,
    rules: list[TagRule],
    grouping: list[str],
    covariate_key: str = "reads",
) -> ModelReport:
    """One model per (tag group, metric) over finalized jobs; thin groups skipped."""
    report = ModelReport()
    samples: dict[tuple[tuple[str, ...], Metric], list[tuple[float, float]]] = {}
    for record in sorted(
        store.list_jobs(HistoryQuery(allow_all=True)), key=lambda r: r.job_id
    ):
        if not record.finalized:
            continue
        tags = tag_job(record, rules).tags
        if covariate_key not in tags or any(key not in tags for key in grouping):
            continue
        covariate = tags[covariate_key]
        if not isinstance(covariate, float):
            continue
        group = tuple(str(tags[key]) for key in grouping)
        for metric in Metric:
            value = metric_value(record, metric)
            if value is None:
                continue
            samples.setdefault((group, metric), []).append((covariate, value))
    for (group, metric), points in sorted(samples.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        tag_filter = dict(zip(grouping, group))
        try:
            report.models.append(
                fit_model(points, tag_filter=tag_filter, covariate_key=covariate_key, metric=metric)
            )
        except (InsufficientData, DegenerateCovariate) as exc:
            report.skipped.append(f"{tag_filter} {metric.value}: {exc}")
    return report


def load_rules(path: str | Path) -> list[TagRule]:
    """Read tag rules from a JSON file: a list of rule objects."""
    blob = json.loads(Path(path).read_text())
    rules = []
    for entry in blob:
        rules.append(
            TagRule(
                name=entry["name"],
                pattern=entry["pattern"],
                captures=dict(entry["captures"]),
                numeric_keys=frozenset(entry.get("numericKeys", [])),
            )
        )
    return rules


def models_to_csv(models: list[RegressionModel], skipped: list[str] | None = None) -> str:
    """CSV rows {group, metric, slope, intercept, n, rmse}."""
    lines = ["group,metric,slope,intercept,n,rmse"]
    for model in models:
        group = ";".join(f"{k}={v}" for k, v in sorted(model.tag_filter.items()))
        lines.append(
            f"{group},{model.metric.value},{model.slope!r},{model.intercept!r},"
            f"{model.n},{model.rmse!r}"
        )
    return "\n".join(lines) + "\n"


def scatter_data(
    store: JobStore, rules: list[TagRule], grouping: list[str], covariate_key: str = "reads"
) -> dict[Metric, list[tuple[str, float, float]]]:
    """Per-metric scatter rows (group, covariate, value in plot units).

    Elapsed time is reported in hours and memory in GiB, matching how the
    fitted quantities are usually eyeballed.
    """
    out: dict[Metric, list[tuple[str, float, float]]] = {m: [] for m in Metric}
    for record in store.list_jobs(HistoryQuery(allow_all=True)):
        if not record.finalized:
            continue
        tags = tag_job(record, rules).tags
        if covariate_key not in tags or any(key not in tags for key in grouping):
            continue
        covariate = tags[covariate_key]
        if not isinstance(covariate, float):
            continue
        group = ";".join(str(tags[key]) for key in grouping)
        elapsed = metric_value(record, Metric.ElapsedSeconds)
        if elapsed is not None:
            out[Metric.ElapsedSeconds].append((group, covariate, elapsed / 3600.0))
        memory = metric_value(record, Metric.MaxMemoryBytes)
        if memory is not None:
            out[Metric.MaxMemoryBytes].append((group, covariate, memory / (1 << 30)))
    return out
