from src.metrics.reports import ClassReport, OassReport
from src.models.taxonomy import CITYSCAPES19
from src.report.report_builder import ReportBuilder


def _report(**parts):
    empty = ClassReport.from_values({})
    return OassReport(**{name: parts.get(name, empty) for name in ("iou", "ap", "aap", "pq", "apq")})


def test_generate_report():
    report_builder = ReportBuilder()
    report = _report(
        iou=ClassReport.from_values({0: 1.0, 13: 0.5}),
        ap=ClassReport.from_values({13: 0.25}),
        aap=ClassReport.from_values({13: 0.25}),
        pq=ClassReport.from_values({0: 1.0, 13: 0.6}),
        apq=ClassReport.from_values({0: 1.0, 13: 0.6}),
    )
    expected_report = (
        "## OASS evaluation\nImages: 2\n\n"
        "| mIoU | mAP | mAAP | mPQ | mAPQ |\n"
        "|---:|---:|---:|---:|---:|\n"
        "| 0.7500 | 0.2500 | 0.2500 | 0.8000 | 0.8000 |\n"
        "\n### Per class\n"
        "| Class | IoU | AP | AAP | PQ | APQ |\n"
        "|---|---:|---:|---:|---:|---:|\n"
        "| road (stuff) | 1.0000 | - | - | 1.0000 | 1.0000 |\n"
        "| car (thing) | 0.5000 | 0.2500 | 0.2500 | 0.6000 | 0.6000 |\n"
    )
    assert report_builder.generate_report(report, image_count=2) == expected_report


def test_empty_report():
    report_builder = ReportBuilder(title="Empty")
    expected_report = (
        "## Empty\n\n"
        "| mIoU | mAP | mAAP | mPQ | mAPQ |\n"
        "|---:|---:|---:|---:|---:|\n"
        "| 0.0000 | 0.0000 | 0.0000 | 0.0000 | 0.0000 |\n"
        "\nNo classes evaluated for: IoU, AP, AAP, PQ, APQ\n"
        "\n### Per class\nNo classes evaluated.\n"
    )
    assert report_builder.generate_report(_report()) == expected_report


def test_class_names_follow_the_taxonomy():
    report = _report(iou=ClassReport.from_values({11: 0.5, 40: 1.0}))
    text = ReportBuilder(CITYSCAPES19).generate_report(report)
    assert "| person (thing) | 0.5000 |" in text
    assert "| class 40 |" in text
    assert "No classes evaluated for: AP, AAP, PQ, APQ" in text
