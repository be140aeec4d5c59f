import datetime

import pytest

from bepath.corpus import (
    DEFAULT_CLASS_MIX,
    Corpus,
    GeneratorSpec,
    PathologyReport,
    generate_synthetic,
)
from bepath.labels import DiagnosisLabel


def make_counted_corpus(counts):
    """Corpus with exactly counts[i] reports of class i, one per patient."""
    reports = []
    serial = 0
    for label, count in zip(DiagnosisLabel, counts):
        for _ in range(count):
            serial += 1
            reports.append(
                PathologyReport(
                    report_id=f"r{serial:04d}",
                    patient_id=f"p{serial:04d}",
                    collected_date=datetime.date(2016, 1, 1),
                    full_text=f"text {serial}",
                    gold_label=label,
                )
            )
    return Corpus(reports)


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, description): ties a test to one acceptance criterion",
    )
    config._criteria = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker:
            num, desc = marker.args
            config._criteria.setdefault(num, {"desc": desc, "failed": False, "skipped": False})


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker and report.when in ("setup", "call"):
        entry = item.config._criteria[marker.args[0]]
        if report.failed:
            entry["failed"] = True
        elif report.skipped:
            entry["skipped"] = True
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(criteria):
        entry = criteria[num]
        status = "FAIL" if entry["failed"] else ("SKIP" if entry["skipped"] else "PASS")
        terminalreporter.write_line(f"criterion {num:>2}: {status}  {entry['desc']}")


@pytest.fixture(scope="session")
def small_corpus():
    """60 patients, fixed seed; shared by read-only tests."""
    return generate_synthetic(
        GeneratorSpec(n_patients=60, class_mix=DEFAULT_CLASS_MIX, seed=7)
    )
