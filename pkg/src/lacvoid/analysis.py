"""Aggregate trace records into usage and norm statistics.

Usage is a per-token micro-average: the mean over tokens of (active
layers / layer count). Per-layer frequencies are the fraction of
tokens for which the layer was active, split by phase; the normalized
view divides every frequency by the single largest layer frequency in
the report, so the report's maximum is exactly 1.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TraceError
from .halting import ThresholdFormula, offline_void_mask
from .trace import PHASES, TraceRecord

__all__ = [
    "LayerUsageReport",
    "NormProfile",
    "usage_report",
    "norm_profile",
    "alpha_sweep",
    "export_reports",
    "CSV_HEADER",
]

CSV_HEADER = ["layer_index", "pp_frequency", "rg_frequency",
              "pp_mean_norm", "rg_mean_norm", "pp_mean_delta", "rg_mean_delta"]


@dataclass
class LayerUsageReport:
    """Per-layer activation statistics split by phase.

    Dictionaries are keyed by phase name and contain only phases that
    actually had tokens.
    """

    layer_count: int
    frequencies: dict[str, np.ndarray]
    normalized: dict[str, np.ndarray]
    average_usage: dict[str, float]
    token_counts: dict[str, int]
    alpha: float | None
    formula: str | None


@dataclass
class NormProfile:
    """Per-layer mean post-layer norm and mean progress, split by phase."""

    layer_count: int
    mean_norms: dict[str, np.ndarray]
    mean_deltas: dict[str, np.ndarray]


def _uniform_layer_count(records: list[TraceRecord]) -> int:
    if not records:
        raise ValueError("no records to aggregate")
    counts = {r.layer_count for r in records}
    if len(counts) != 1:
        raise TraceError(f"records mix layer counts: {sorted(counts)}")
    return counts.pop()


def _uniform_or_none(values) -> object | None:
    vals = set(values)
    return vals.pop() if len(vals) == 1 else None


def usage_report(records: list[TraceRecord], alpha: float | None = None,
                 formula: str | None = None) -> LayerUsageReport:
    """Aggregate activation flags. alpha/formula default to the records'
    own settings when those are uniform."""
    t_total = _uniform_layer_count(records)
    frequencies: dict[str, np.ndarray] = {}
    average: dict[str, float] = {}
    counts: dict[str, int] = {}
    for phase in PHASES:
        sub = [r for r in records if r.phase == phase]
        if not sub:
            continue
        flags = np.array([r.layer_flags for r in sub], dtype=np.float64)
        frequencies[phase] = flags.mean(axis=0)
        average[phase] = float(flags.sum(axis=1).mean() / t_total)
        counts[phase] = len(sub)
    peak = max((f.max() for f in frequencies.values()), default=0.0)
    normalized = {p: (f / peak if peak > 0 else np.zeros_like(f)) for p, f in frequencies.items()}
    return LayerUsageReport(
        layer_count=t_total,
        frequencies=frequencies,
        normalized=normalized,
        average_usage=average,
        token_counts=counts,
        alpha=alpha if alpha is not None else _uniform_or_none(r.alpha for r in records),
        formula=formula if formula is not None else _uniform_or_none(r.formula for r in records),
    )


def norm_profile(records: list[TraceRecord]) -> NormProfile:
    """Arithmetic means of per-layer norms and progress, by phase."""
    t_total = _uniform_layer_count(records)
    mean_norms: dict[str, np.ndarray] = {}
    mean_deltas: dict[str, np.ndarray] = {}
    for phase in PHASES:
        sub = [r for r in records if r.phase == phase]
        if not sub:
            continue
        mean_norms[phase] = np.array([r.layer_norms for r in sub], dtype=np.float64).mean(axis=0)
        mean_deltas[phase] = np.array([r.layer_deltas for r in sub], dtype=np.float64).mean(axis=0)
    return NormProfile(layer_count=t_total, mean_norms=mean_norms, mean_deltas=mean_deltas)


def alpha_sweep(records: list[TraceRecord], alphas, formula: ThresholdFormula = ThresholdFormula.MODIFIED,
                min_layers: int = 1) -> list[tuple[float, LayerUsageReport]]:
    """Re-threshold recorded progress at each alpha, without re-running.

    Records must carry per-layer deltas from a run that did not alter
    the stream (off or detect mode), otherwise the replayed decisions
    do not correspond to any single forward pass.
    """
    t_total = _uniform_layer_count(records)
    for r in records:
        if len(r.layer_deltas) != t_total:
            raise TraceError(f"record {r.sequence_id}:{r.token_index} is missing per-layer deltas")
    out = []
    for alpha in alphas:
        rethresholded = [
            dataclasses.replace(r, layer_flags=[not v for v in offline_void_mask(r.layer_deltas, alpha, formula, min_layers)])
            for r in records
        ]
        out.append((float(alpha), usage_report(rethresholded, alpha=float(alpha), formula=formula.value)))
    return out


def _fmt(x: float) -> str:
    return "%.9g" % float(x)


def export_reports(usage: LayerUsageReport, profile: NormProfile, out_dir, stem: str = "report") -> tuple[Path, Path]:
    """Write the combined per-layer CSV and the JSON summary.

    The CSV has one row per layer (1-based indices); columns for a
    phase with no tokens are left empty. Returns (csv_path, json_path).
    """
    if usage.layer_count != profile.layer_count:
        raise ValueError(f"usage has {usage.layer_count} layers but profile has {profile.layer_count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    json_path = out_dir / f"{stem}_summary.json"

    def cell(mapping, phase, layer):
        return _fmt(mapping[phase][layer]) if phase in mapping else ""

    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for layer in range(usage.layer_count):
            writer.writerow([
                layer + 1,
                cell(usage.frequencies, "PP", layer),
                cell(usage.frequencies, "RG", layer),
                cell(profile.mean_norms, "PP", layer),
                cell(profile.mean_norms, "RG", layer),
                cell(profile.mean_deltas, "PP", layer),
                cell(profile.mean_deltas, "RG", layer),
            ])

    summary = {
        "layer_count": usage.layer_count,
        "alpha": usage.alpha,
        "formula": usage.formula,
        "token_counts": usage.token_counts,
        "average_usage": {p: usage.average_usage[p] for p in usage.average_usage},
        "average_usage_2dp": {p: round(usage.average_usage[p], 2) for p in usage.average_usage},
        "normalization": "per-layer frequencies divided by the report's maximum layer frequency",
    }
    json_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return csv_path, json_path
