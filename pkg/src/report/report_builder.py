from src.metrics.reports import METRIC_KEYS, OassReport
from src.models.taxonomy import OASS18, Taxonomy

METRIC_TITLES = {"miou": "mIoU", "map": "mAP", "maap": "mAAP", "mpq": "mPQ", "mapq": "mAPQ"}
BREAKDOWN_TITLES = {"iou": "IoU", "ap": "AP", "aap": "AAP", "pq": "PQ", "apq": "APQ"}


class ReportBuilder:
    """Builds a markdown summary of an OASS evaluation report."""

    def __init__(self, taxonomy: Taxonomy = OASS18, title: str = "OASS evaluation"):
        self.taxonomy = taxonomy
        self.title = title

    def _format_value(self, value: float | None) -> str:
        return "-" if value is None else f"{value:.4f}"

    def _class_label(self, class_id: int) -> str:
        try:
            info = self.taxonomy.info(class_id)
        except ValueError:
            return f"class {class_id}"
        return f"{info.name} ({'thing' if info.is_thing else 'stuff'})"

    def generate_report(self, report: OassReport, image_count: int | None = None) -> str:
        lines = [f"## {self.title}"]
        if image_count is not None:
            lines.append(f"Images: {image_count}")

        lines.append("")
        lines.append("| " + " | ".join(METRIC_TITLES[k] for k in METRIC_KEYS) + " |")
        lines.append("|" + "---:|" * len(METRIC_KEYS))
        lines.append("| " + " | ".join(self._format_value(getattr(report, k)) for k in METRIC_KEYS) + " |")

        breakdowns = report.breakdowns()
        not_evaluated = [BREAKDOWN_TITLES[name] for name, part in breakdowns.items() if not part.evaluated]
        if not_evaluated:
            lines.append(f"\nNo classes evaluated for: {', '.join(not_evaluated)}")

        class_ids = sorted({c for part in breakdowns.values() for c in part.per_class})
        lines.append("\n### Per class")
        if not class_ids:
            lines.append("No classes evaluated.")
            return "\n".join(lines) + "\n"

        lines.append("| Class | " + " | ".join(BREAKDOWN_TITLES[name] for name in breakdowns) + " |")
        lines.append("|---|" + "---:|" * len(breakdowns))
        for c in class_ids:
            cells = [self._format_value(part.per_class.get(c)) for part in breakdowns.values()]
            lines.append(f"| {self._class_label(c)} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
