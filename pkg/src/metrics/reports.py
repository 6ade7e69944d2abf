"""Metric report models and their JSON form."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ClassReport(BaseModel):
    """Per-class values of one metric and their arithmetic mean.

    ``evaluated`` is False when no class qualified for the mean; ``mean`` is
    then reported as 0.
    """

    model_config = ConfigDict(frozen=True)

    per_class: dict[int, float] = Field(default_factory=dict)
    mean: float = 0.0
    evaluated: bool = False

    @model_validator(mode="after")
    def _check_values(self) -> ClassReport:
        for class_id, value in self.per_class.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"class {class_id}: metric value {value} outside [0, 1]")
        return self

    @classmethod
    def from_values(cls, per_class: dict[int, float]) -> ClassReport:
        ordered = {k: float(per_class[k]) for k in sorted(per_class)}
        if not ordered:
            return cls(per_class={}, mean=0.0, evaluated=False)
        return cls(per_class=ordered, mean=sum(ordered.values()) / len(ordered), evaluated=True)


METRIC_KEYS = ("miou", "map", "maap", "mpq", "mapq")


class OassReport(BaseModel):
    """The five dataset-level OASS metrics with their per-class breakdowns."""

    model_config = ConfigDict(frozen=True)

    iou: ClassReport
    ap: ClassReport
    aap: ClassReport
    pq: ClassReport
    apq: ClassReport

    @property
    def miou(self) -> float:
        return self.iou.mean

    @property
    def map(self) -> float:
        return self.ap.mean

    @property
    def maap(self) -> float:
        return self.aap.mean

    @property
    def mpq(self) -> float:
        return self.pq.mean

    @property
    def mapq(self) -> float:
        return self.apq.mean

    def breakdowns(self) -> dict[str, ClassReport]:
        return {"iou": self.iou, "ap": self.ap, "aap": self.aap, "pq": self.pq, "apq": self.apq}

    def to_json_dict(self) -> dict:
        data: dict = {key: getattr(self, key) for key in METRIC_KEYS}
        data["per_class"] = {
            name: {str(class_id): value for class_id, value in report.per_class.items()}
            for name, report in self.breakdowns().items()
        }
        return data

    @classmethod
    def from_json_dict(cls, data: dict) -> OassReport:
        missing = [key for key in (*METRIC_KEYS, "per_class") if key not in data]
        if missing:
            raise ValueError(f"report JSON is missing keys: {missing}")
        per_class = data["per_class"]
        reports = {}
        for name, key in zip(("iou", "ap", "aap", "pq", "apq"), METRIC_KEYS, strict=True):
            values = {int(k): float(v) for k, v in per_class.get(name, {}).items()}
            report = ClassReport.from_values(values)
            if abs(report.mean - float(data[key])) > 1e-9:
                raise ValueError(f"report JSON: '{key}' disagrees with its per-class values")
            reports[name] = report
        return cls(**reports)
