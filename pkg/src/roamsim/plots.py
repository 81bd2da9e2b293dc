"""Figures rendered next to the delimited output of a run.

Uses the Agg backend so headless environments render identically.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .sim import RunResult


def _by_country(result: RunResult) -> List[str]:
    return sorted(result.scenario.countries)


def plot_min_headline(result: RunResult, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    periods = range(result.scenario.horizon)
    for country in _by_country(result):
        series = [result.min_headline(t, country) / 1_000_000 for t in periods]
        ax.plot(list(periods), series, marker="o", markersize=3, label=country)
    ax.set_xlabel("period")
    ax.set_ylabel("cheapest headline IOT (units/min)")
    ax.set_title("Wholesale price floor by country")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_shares(result: RunResult, path: Path) -> None:
    series: Dict[Tuple[str, str], List[float]] = {}
    for row in result.metrics:
        series.setdefault((row.country, row.operator), []).append(
            float(row.wholesale_share)
        )
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for (country, op), values in sorted(series.items()):
        ax.plot(range(len(values)), values, label=f"{op} ({country})", linewidth=1)
    ax.set_xlabel("period")
    ax.set_ylabel("share of roamed minutes")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("Visited-network traffic shares")
    if len(series) <= 16:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_concentration(result: RunResult, path: Path) -> None:
    cr2: Dict[str, List[float]] = {}
    ratio: Dict[str, List[float]] = {}
    for row in result.metrics:
        if row.cr2 is not None:
            cr2.setdefault(row.country, [])
            if len(cr2[row.country]) <= row.period:
                cr2[row.country].append(float(row.cr2))
        if row.ratio_vs_benchmark is not None:
            ratio.setdefault(row.country, [])
            if len(ratio[row.country]) <= row.period:
                ratio[row.country].append(float(row.ratio_vs_benchmark))
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    for country, values in sorted(cr2.items()):
        left.plot(range(len(values)), values, label=country)
    left.set_title("Two-network concentration")
    left.set_xlabel("period")
    left.set_ylabel("CR2")
    left.set_ylim(0, 1.05)
    left.legend(fontsize=7)
    for country, values in sorted(ratio.items()):
        right.plot(range(len(values)), values, label=country)
    right.set_title("Roamed vs non-roamed retail price")
    right.set_xlabel("period")
    right.set_ylabel("ratio")
    right.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(result: RunResult, out_dir: str) -> List[Path]:
    figures = Path(out_dir) / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    targets = [
        (figures / "min_headline_iot.png", plot_min_headline),
        (figures / "network_shares.png", plot_shares),
        (figures / "concentration_and_ratio.png", plot_concentration),
    ]
    for path, renderer in targets:
        renderer(result, path)
    return [path for path, _ in targets]
