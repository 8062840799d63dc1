import io

from rich.console import Console

from isolab.takiff import verify_casimirs, verify_kks
from isolab.verification import VerificationReport, run_sweep


def test_record_and_summary():
    report = VerificationReport("demo")
    report.record("exact", True)
    report.record("numeric", False, 1e-3, note="too large")
    assert not report.passed
    assert [check.name for check in report.failures] == ["numeric"]
    assert report.max_defect == 1e-3
    document = report.to_dict()
    assert document["suite"] == "demo"
    assert document["checks"][1]["status"] == "fail"
    assert document["checks"][1]["details"] == {"note": "too large"}


def test_empty_report_does_not_pass():
    assert not VerificationReport("empty").passed


def test_timed_check():
    report = VerificationReport("demo")
    with report.timed("residual") as outcome:
        outcome["defect"] = 2e-9
        outcome["passed"] = outcome["defect"] < 1e-6
        outcome["points"] = 3
    check = report.checks[0]
    assert check.passed
    assert check.defect == 2e-9
    assert check.details == {"points": 3}
    assert check.seconds >= 0


def test_extend_prefixes_suite():
    inner = VerificationReport("inner")
    inner.record("a", True)
    outer = VerificationReport("outer").extend(inner)
    assert outer.checks[0].name == "inner/a"
    assert outer.passed


def test_render():
    report = VerificationReport("demo")
    report.record("exact", True)
    buffer = io.StringIO()
    report.render(Console(file=buffer, width=120))
    assert "exact" in buffer.getvalue()


def test_sweep_serial_and_pooled():
    tasks = [(verify_kks, {"r": 0, "m": 1}), (verify_casimirs, {"r": 1, "m": 1})]
    serial = run_sweep(tasks, threads=1)
    pooled = run_sweep(tasks, threads=2)
    assert [r.suite for r in serial] == [r.suite for r in pooled]
    assert all(r.passed for r in serial + pooled)
