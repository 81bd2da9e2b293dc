"""Delimited output for a finished run.

Every file is written atomically (temp file in the target directory, then
os.replace) so a crashed export never leaves a half-written artifact.
Exact fractions become floats only here, via repr(float(x)), which is the
shortest round-tripping decimal form and therefore stable across runs.
"""

from __future__ import annotations

import csv
import os
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from .scenario import Scenario, scenario_to_json
from .sim import RunResult
from .tariff import Direction

LEDGER_HEADER = ["period", "call_id", "payer", "payee", "role", "amount_micro"]
INVOICES_HEADER = [
    "period", "issuer", "counterparty", "gross_micro", "discount_micro", "net_micro", "minutes",
]
CDRS_HEADER = [
    "period", "call_id", "direction", "home_op", "visited_op",
    "zone", "term_type", "period_class", "duration_s",
]
NEGOTIATION_HEADER = [
    "period", "visited_op", "counterparty", "decision", "tier_rate", "requires_preferred",
]
OTA_HEADER = ["period", "home_op", "country", "new_list"]
METRICS_HEADER = [
    "period", "country", "operator", "wholesale_share", "cr2",
    "avg_retail_micro_per_min", "ratio_vs_nonroamed",
    "wholesale_rev_micro", "wholesale_profit_micro", "min_headline_iot_micro",
]


def _frac(value: Optional[Fraction]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    """Write one CSV atomically."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def ledger_rows(result: RunResult) -> List[List[str]]:
    return [
        [str(e.period), e.call_ref, e.payer, e.payee, e.role, str(e.amount)]
        for e in result.ledger
    ]


def invoice_rows(result: RunResult) -> List[List[str]]:
    return [
        [
            str(i.period), i.issuer, i.counterparty,
            str(i.gross), str(i.discount_applied), str(i.net), str(i.minutes),
        ]
        for i in result.invoices
    ]


def cdr_rows(result: RunResult) -> List[List[str]]:
    rows = []
    for cdr in result.cdrs:
        term = ""
        if cdr.direction is Direction.MO and cdr.destination is not None:
            term = cdr.destination.term_type.value
        rows.append(
            [
                str(cdr.period), cdr.call_id, cdr.direction.value,
                cdr.home_operator, cdr.visited_operator,
                cdr.zone, term, cdr.period_class.value,
                repr(float(cdr.duration_s)),
            ]
        )
    return rows


def negotiation_rows(result: RunResult) -> List[List[str]]:
    return [
        [
            str(r.period), r.visited_operator, r.counterparty, r.decision,
            _frac(r.tier_rate), "true" if r.requires_preferred else "false",
        ]
        for r in result.negotiation
    ]


def ota_rows(result: RunResult) -> List[List[str]]:
    return [
        [str(e.period), e.home_operator, e.country, "|".join(e.new_list)]
        for e in result.ota_events
    ]


def metrics_rows(result: RunResult) -> List[List[str]]:
    return [
        [
            str(m.period), m.country, m.operator,
            _frac(m.wholesale_share), _frac(m.cr2),
            _frac(m.avg_retail), _frac(m.ratio_vs_benchmark),
            str(m.wholesale_revenue), str(m.wholesale_profit), str(m.min_headline),
        ]
        for m in result.metrics
    ]


def write_run(result: RunResult, out_dir: str) -> List[Path]:
    """Write all delimited artifacts plus the normalised scenario."""
    out = Path(out_dir)
    written = []
    for name, header, rows in (
        ("metrics.csv", METRICS_HEADER, metrics_rows(result)),
        ("ledger.csv", LEDGER_HEADER, ledger_rows(result)),
        ("cdrs.csv", CDRS_HEADER, cdr_rows(result)),
        ("invoices.csv", INVOICES_HEADER, invoice_rows(result)),
        ("negotiation.csv", NEGOTIATION_HEADER, negotiation_rows(result)),
        ("ota_events.csv", OTA_HEADER, ota_rows(result)),
    ):
        path = out / name
        write_rows(path, header, rows)
        written.append(path)
    scenario_path = out / "scenario_normalized.json"
    write_text(scenario_path, scenario_to_json(result.scenario))
    written.append(scenario_path)
    return written


def write_scenario(scenario: Scenario, path: str) -> None:
    write_text(Path(path), scenario_to_json(scenario))
