import json

from roamsim.cli import main
from roamsim.exports import (
    CDRS_HEADER,
    INVOICES_HEADER,
    LEDGER_HEADER,
    METRICS_HEADER,
    NEGOTIATION_HEADER,
    OTA_HEADER,
)

from conftest import SCENARIOS, minimal_raw, write_json

BASELINE = str(SCENARIOS / "two_country_baseline.json")
STEERING = str(SCENARIOS / "steering_transition.json")

RUN_FILES = [
    "metrics.csv", "ledger.csv", "cdrs.csv", "invoices.csv",
    "negotiation.csv", "ota_events.csv", "scenario_normalized.json",
]


def first_line(path):
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return handle.readline().strip()


def test_validate_ok(capsys):
    assert main(["validate", BASELINE]) == 0
    out = capsys.readouterr().out
    assert "ok" in out
    assert "2 countries, 3 operators" in out


def test_validate_missing_file(capsys):
    assert main(["validate", "no/such/file.json"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "no/such/file.json" in err


def test_validate_reports_first_error_and_count(tmp_path, capsys):
    raw = minimal_raw()
    del raw["demand"][0]["destination_mix"]
    raw["tariffs"][0]["billing_unit_s"] = 7
    assert main(["validate", write_json(tmp_path, raw)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "more)" in err


def test_run_writes_all_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", BASELINE, "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == sorted(RUN_FILES)
    assert first_line(out / "metrics.csv") == ",".join(METRICS_HEADER)
    assert first_line(out / "ledger.csv") == ",".join(LEDGER_HEADER)
    assert first_line(out / "cdrs.csv") == ",".join(CDRS_HEADER)
    assert first_line(out / "invoices.csv") == ",".join(INVOICES_HEADER)
    assert first_line(out / "negotiation.csv") == ",".join(NEGOTIATION_HEADER)
    assert first_line(out / "ota_events.csv") == ",".join(OTA_HEADER)
    json.loads((out / "scenario_normalized.json").read_text())
    assert "wrote 7 files" in capsys.readouterr().out


def test_same_seed_runs_are_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(["run", BASELINE, "--out", str(a)]) == 0
    assert main(["run", BASELINE, "--out", str(b)]) == 0
    for name in RUN_FILES:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_default_out_dir_comes_from_environment(tmp_path, monkeypatch, capsys):
    target = tmp_path / "from-env"
    monkeypatch.setenv("ROAMSIM_OUT", str(target))
    assert main(["run", BASELINE]) == 0
    capsys.readouterr()
    assert (target / "metrics.csv").exists()


def test_report_renders_figures(tmp_path):
    out = tmp_path / "report"
    assert main(["report", BASELINE, "--out", str(out)]) == 0
    figures = out / "figures"
    assert sorted(p.name for p in figures.iterdir()) == [
        "concentration_and_ratio.png",
        "min_headline_iot.png",
        "network_shares.png",
    ]
    assert all((out / name).exists() for name in RUN_FILES)


def test_report_no_figures_skips_rendering(tmp_path):
    out = tmp_path / "quiet"
    assert main(["report", BASELINE, "--out", str(out), "--no-figures"]) == 0
    assert not (out / "figures").exists()


def test_report_accepts_a_previous_run_directory(tmp_path):
    out = tmp_path / "rerun"
    assert main(["run", BASELINE, "--out", str(out)]) == 0
    before = (out / "metrics.csv").read_bytes()
    assert main(["report", str(out), "--no-figures"]) == 0
    assert (out / "metrics.csv").read_bytes() == before


def test_externality_experiment_outputs(tmp_path, capsys):
    out = tmp_path / "exp"
    code = main([
        "experiment", "externality", BASELINE,
        "--target", "A2", "--delta", "1/10", "--out", str(out),
    ])
    assert code == 0
    assert "shares_invariant=yes" in capsys.readouterr().out
    assert (out / "baseline" / "metrics.csv").exists()
    assert (out / "treated" / "metrics.csv").exists()
    lines = (out / "experiment.csv").read_text().strip().splitlines()
    assert lines[0] == "period,minutes_baseline,minutes_treated"
    assert lines[1] == "0,10000,10000"
    assert lines[2] == "1,10000,10244"
    assert len(lines) == 7


def test_externality_experiment_refuses_confounded_scenario(capsys):
    code = main([
        "experiment", "externality", STEERING,
        "--target", "V2", "--delta", "1/10",
    ])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")
