"""
Evaluation report records and their serializations.

An `EvalReport` is a flat list of `MetricRecord`s. Each record names its
scope (overall, fold, subgroup, group, summary, strategy, detector, weights)
and the experiment cell it belongs to, so one structure carries fold scores,
subgroup tables, worst-group summaries and the aggregated strategy grid.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd

from .errors import ShiftLabError

SCOPE_OVERALL = "overall"
SCOPE_FOLD = "fold"
SCOPE_SUBGROUP = "subgroup"
SCOPE_GROUP = "group"
SCOPE_SUMMARY = "summary"
SCOPE_STRATEGY = "strategy"
SCOPE_DETECTOR = "detector"
SCOPE_WEIGHTS = "weights"

PLOT_COLUMNS = [
    "learner",
    "strategy",
    "train_pop",
    "test_pop",
    "metric",
    "mean",
    "stderr",
    "repetitions",
]


class EvaluationError(ShiftLabError):
    """Raised for misaligned evaluation inputs or invalid evaluation settings."""

    pass


@dataclass(frozen=True)
class MetricRecord:
    """One metric value in one scope of one experiment cell."""

    scope: str
    metric: str
    value: float
    learner: str = ""
    strategy: str = ""
    train_pop: str = ""
    test_pop: str = ""
    key: str = ""
    count: int = 0
    stderr: Optional[float] = None
    repetitions: Optional[int] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricRecord":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise EvaluationError(f"Unknown report field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class EvalReport:
    """An ordered collection of metric records plus free-form metadata."""

    records: List[MetricRecord] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def add(self, scope: str, metric: str, value: float, **labels: Any) -> MetricRecord:
        record = MetricRecord(scope=scope, metric=metric, value=float(value), **labels)
        self.records.append(record)
        return record

    def extend(self, other: Union["EvalReport", Iterable[MetricRecord]]):
        self.records.extend(other.records if isinstance(other, EvalReport) else other)

    def select(self, **criteria: Any) -> List[MetricRecord]:
        """Records whose fields equal every given criterion."""
        return [
            r for r in self.records if all(getattr(r, k) == v for k, v in criteria.items())
        ]

    def value(self, **criteria: Any) -> float:
        """The value of the single record matching `criteria`."""
        matches = self.select(**criteria)
        if len(matches) != 1:
            raise EvaluationError(f"Expected one record for {criteria}, found {len(matches)}.")
        return matches[0].value

    # --- Serialization ---

    def to_jsonl(self) -> str:
        """One JSON object per line; the first line holds the metadata."""
        lines = [json.dumps({"metadata": self.metadata}, sort_keys=True)]
        lines.extend(json.dumps(asdict(r), sort_keys=True) for r in self.records)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "EvalReport":
        report = cls()
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise EvaluationError(f"Invalid report line {number}: {e}") from None
            if "metadata" in data and len(data) == 1:
                report.metadata = data["metadata"]
            else:
                report.records.append(MetricRecord.from_dict(data))
        return report

    def plot_frame(self) -> pd.DataFrame:
        """The aggregated strategy grid as a plot-ready table."""
        rows = [
            {
                "learner": r.learner,
                "strategy": r.strategy,
                "train_pop": r.train_pop,
                "test_pop": r.test_pop,
                "metric": r.metric,
                "mean": r.value,
                "stderr": r.stderr,
                "repetitions": r.repetitions,
            }
            for r in self.records
            if r.scope == SCOPE_STRATEGY
        ]
        return pd.DataFrame(rows, columns=PLOT_COLUMNS)

    def write_plot_csv(self, path: Union[str, Path]):
        self.plot_frame().to_csv(path, index=False, lineterminator="\n", encoding="utf-8")

    def write_jsonl(self, path: Union[str, Path]):
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")
