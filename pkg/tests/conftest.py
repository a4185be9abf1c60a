from pathlib import Path

import pytest

from eop.cli import main
from eop.fixtures import fixture_path

PIPELINE_OUTPUTS = ("prices.eops", "returns.eops", "filtered.eops", "report.json",
                    "premiums.txt", "premiums_filtered.txt", "calibration.json", "hist.csv",
                    "compare.csv")


def run_cli(*args) -> int:
    return main([str(a) for a in args])


def run_pipeline(workdir: Path, threads: int = 1, seed: int | None = None) -> None:
    """ingest -> preprocess -> filter -> price -> calibrate -> hist -> compare.

    With ``seed`` the input prices come from ``eop synth``; otherwise the
    bundled fixture is used. Everything is written under ``workdir``.
    """
    workdir.mkdir(parents=True, exist_ok=True)
    w = workdir
    t = ("--threads", threads)
    if seed is None:
        src = fixture_path()
    else:
        src = w / "synthetic.csv"
        assert run_cli("synth", "--out", src, "--seed", seed, *t) == 0
    assert run_cli("ingest", "--input", src, "--out", w / "prices.eops", *t) == 0
    assert run_cli("preprocess", "--in", w / "prices.eops", "--out", w / "returns.eops", *t) == 0
    assert run_cli("filter", "--in", w / "returns.eops", "--out", w / "filtered.eops",
                   "--report", w / "report.json", *t) == 0
    ladder = ("--spot", 5500, "--strikes", "5300:5700:50", "--quote-date", "2005-12-02",
              "--expiry-date", "2005-12-06")
    assert run_cli("price", "--series", w / "returns.eops", *ladder,
                   "--out", w / "premiums.txt", *t) == 0
    assert run_cli("price", "--series", w / "filtered.eops", *ladder,
                   "--out", w / "premiums_filtered.txt", *t) == 0
    quotes = w / "quotes.csv"
    quotes.write_text("quote_date,expiry_date,spot,strike,premium\n"
                      "2005-12-02,2005-12-06,5500,5400,104.0\n"
                      "2005-12-02,2005-12-06,5500,5500,21.5\n"
                      "2005-12-02,2005-12-06,5500,5600,0.8\n")
    assert run_cli("calibrate", "--series", w / "returns.eops", "--quotes", quotes,
                   "--out", w / "calibration.json", *t) == 0
    assert run_cli("hist", "--series", w / "returns.eops", "--horizons", "100,300,600",
                   "--out", w / "hist.csv", *t) == 0
    assert run_cli("compare", "--original", w / "returns.eops", "--filtered",
                   w / "filtered.eops", "--spot", 5500, "--strikes", "5300:5700:100",
                   "--expiry-minutes", 1020, "--out", w / "compare.csv", *t) == 0


@pytest.fixture
def clean_env(monkeypatch):
    monkeypatch.delenv("EOP_CONFIG", raising=False)


_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    detail = dict(item.user_properties).get("detail", "")
    results = item.config.stash.setdefault(_RESULTS, {})
    results[marker.args[0]] = (marker.args[1], rep.passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        line = f"AC{number} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
