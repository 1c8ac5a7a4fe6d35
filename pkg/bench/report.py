"""
Evaluation report: cells per (model, setting, shuffled), relative changes
against their baseline cells, and JSON / CSV / Markdown / PNG renderings.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from bench.metrics import accuracy_pct, relative_change, round1  # noqa: E402
from errors import ConfigurationError, UndefinedBaselineError  # noqa: E402

REPORT_FORMAT = "eval-report/v1"
REPORT_FORMATS = ("json", "csv", "markdown")


class EvalSetting(Enum):
    VANILLA_BAZI = "vanilla"
    BAZI_RULE_KNOWLEDGE = "rules"
    FULL_MODEL = "full"

    @property
    def label(self) -> str:
        return {
            EvalSetting.VANILLA_BAZI: "Vanilla LLM w/ BaZi (Baseline)",
            EvalSetting.BAZI_RULE_KNOWLEDGE: "Baseline w/ BaZi Rule Knowledge",
            EvalSetting.FULL_MODEL: "Full Model",
        }[self]


SETTING_ORDER = (EvalSetting.VANILLA_BAZI, EvalSetting.BAZI_RULE_KNOWLEDGE, EvalSetting.FULL_MODEL)


@dataclass
class ReportCell:
    model_id: str
    setting: EvalSetting
    shuffled: bool
    n_questions: int
    correct: int
    extraction_failures: int = 0
    transport_errors: int = 0
    per_dimension: Dict[str, Dict[str, int]] = field(default_factory=dict)
    relative_change: Optional[float] = None
    baseline: Optional[str] = None

    @property
    def accuracy(self) -> float:
        return round1(accuracy_pct(self.correct, self.n_questions))

    @property
    def key(self) -> Tuple[str, EvalSetting, bool]:
        return (self.model_id, self.setting, self.shuffled)

    @property
    def label(self) -> str:
        return self.setting.label + (" + Shuffled Birthday" if self.shuffled else "")

    def dimension_accuracy(self) -> Dict[str, float]:
        return {dim: round1(accuracy_pct(v["correct"], v["n"])) for dim, v in self.per_dimension.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model_id": self.model_id,
            "setting": self.setting.value,
            "shuffled": self.shuffled,
            "n_questions": self.n_questions,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "extraction_failures": self.extraction_failures,
            "transport_errors": self.transport_errors,
            "per_dimension": {
                dim: {"n": v["n"], "correct": v["correct"], "accuracy": round1(accuracy_pct(v["correct"], v["n"]))}
                for dim, v in self.per_dimension.items()
            },
            "relative_change": self.relative_change,
            "baseline": self.baseline,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReportCell":
        return cls(
            model_id=data["model_id"],
            setting=EvalSetting(data["setting"]),
            shuffled=bool(data["shuffled"]),
            n_questions=int(data["n_questions"]),
            correct=int(data["correct"]),
            extraction_failures=int(data.get("extraction_failures", 0)),
            transport_errors=int(data.get("transport_errors", 0)),
            per_dimension={dim: {"n": int(v["n"]), "correct": int(v["correct"])}
                           for dim, v in data.get("per_dimension", {}).items()},
            relative_change=data.get("relative_change"),
            baseline=data.get("baseline"),
        )


def _cell_order(cell: ReportCell) -> Tuple[int, int, str]:
    return (int(cell.shuffled), SETTING_ORDER.index(cell.setting), cell.model_id)


@dataclass
class EvalReport:
    cells: List[ReportCell]
    metadata: Dict[str, Any] = field(default_factory=dict)
    valid: bool = True
    invalid_reasons: List[str] = field(default_factory=list)

    def cell(self, model_id: str, setting: EvalSetting, shuffled: bool = False) -> Optional[ReportCell]:
        for c in self.cells:
            if c.key == (model_id, setting, shuffled):
                return c
        return None

    def sort_cells(self) -> None:
        self.cells.sort(key=_cell_order)

    def apply_baselines(self) -> None:
        """
        Shuffled cells compare to the same model and setting unshuffled; other
        non-vanilla cells compare to the same model's vanilla cell. Changes use
        the printed one-decimal accuracies.
        """
        for c in self.cells:
            if c.shuffled:
                base = self.cell(c.model_id, c.setting, False)
            elif c.setting is not EvalSetting.VANILLA_BAZI:
                base = self.cell(c.model_id, EvalSetting.VANILLA_BAZI, False)
            else:
                base = None
            if base is None:
                c.relative_change, c.baseline = None, None
                continue
            c.baseline = f"{base.model_id}/{base.setting.value}" + ("/shuffled" if base.shuffled else "")
            try:
                c.relative_change = relative_change(c.accuracy, base.accuracy)
            except UndefinedBaselineError:
                c.relative_change = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "valid": self.valid,
            "invalid_reasons": list(self.invalid_reasons),
            "cells": [c.to_dict() for c in self.cells],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        if data.get("format") != REPORT_FORMAT:
            raise ConfigurationError(f"unsupported report format {data.get('format')!r}")
        return cls(
            cells=[ReportCell.from_dict(c) for c in data["cells"]],
            metadata=data.get("metadata", {}),
            valid=bool(data.get("valid", True)),
            invalid_reasons=list(data.get("invalid_reasons", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


# ==================== Rendering ====================

def format_change(change: Optional[float]) -> str:
    if change is None:
        return ""
    arrow = "↑" if change >= 0 else "↓"
    return f" ({arrow}{abs(change):.1f}%)"


def _render_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


CSV_COLUMNS = [
    "model_id", "setting", "shuffled", "n_questions", "correct", "accuracy",
    "extraction_failures", "transport_errors", "relative_change", "baseline", "per_dimension",
]


def _render_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for c in report.cells:
        row = c.to_dict()
        row["shuffled"] = "true" if c.shuffled else "false"
        row["relative_change"] = "" if c.relative_change is None else f"{c.relative_change:.1f}"
        row["baseline"] = c.baseline or ""
        row["per_dimension"] = json.dumps(row["per_dimension"], ensure_ascii=False, sort_keys=True)
        writer.writerow({k: row[k] for k in CSV_COLUMNS})
    return buffer.getvalue()


def _render_markdown(report: EvalReport) -> str:
    lines = ["| Setting | Model | Acc. (%) |", "|---|---|---|"]
    previous = None
    for c in report.cells:
        label = c.label if c.label != previous else ""
        previous = c.label
        lines.append(f"| {label} | {c.model_id} | {c.accuracy:.1f}{format_change(c.relative_change)} |")

    dims = sorted({d for c in report.cells for d in c.per_dimension})
    if dims:
        lines += ["", "Per-dimension accuracy (%):", ""]
        lines.append("| Setting | Model | " + " | ".join(dims) + " |")
        lines.append("|---|---|" + "---|" * len(dims))
        for c in report.cells:
            acc = c.dimension_accuracy()
            values = " | ".join(f"{acc[d]:.1f}" if d in acc else "-" for d in dims)
            lines.append(f"| {c.label} | {c.model_id} | {values} |")

    failures = [c for c in report.cells if c.extraction_failures or c.transport_errors]
    if failures:
        lines += ["", "Failures:", ""]
        for c in failures:
            lines.append(f"- {c.label} / {c.model_id}: {c.extraction_failures} unparsed answer(s), "
                         f"{c.transport_errors} transport error(s)")
    if not report.valid:
        lines += ["", "**Run flagged invalid:** " + "; ".join(report.invalid_reasons)]
    return "\n".join(lines) + "\n"


def render_report(report: EvalReport, fmt: str = "markdown") -> str:
    renderers = {"json": _render_json, "csv": _render_csv, "markdown": _render_markdown, "md": _render_markdown}
    renderer = renderers.get(fmt)
    if renderer is None:
        raise ConfigurationError(f"unknown report format {fmt!r}; expected one of {', '.join(REPORT_FORMATS)}")
    return renderer(report)


def format_for_path(path: str) -> str:
    suffix = path.rsplit(".", 1)[-1].lower() if "." in path else ""
    return {"json": "json", "csv": "csv", "md": "markdown", "markdown": "markdown"}.get(suffix, "json")


def plot_report(report: EvalReport, path: str) -> None:
    """Grouped bar chart of accuracy per setting, one bar per model."""
    groups: List[str] = []
    for c in report.cells:
        if c.label not in groups:
            groups.append(c.label)
    models = sorted({c.model_id for c in report.cells})
    width = 0.8 / max(len(models), 1)

    fig, ax = plt.subplots(figsize=(max(6, 2.2 * len(groups)), 4.5))
    for i, model in enumerate(models):
        xs, heights = [], []
        for g, label in enumerate(groups):
            cell = next((c for c in report.cells if c.label == label and c.model_id == model), None)
            if cell is not None:
                xs.append(g + (i - (len(models) - 1) / 2) * width)
                heights.append(cell.accuracy)
        bars = ax.bar(xs, heights, width, label=model)
        ax.bar_label(bars, fmt="%.1f", fontsize=8)

    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(groups, rotation=15, ha="right", fontsize=8)
    ax.set_ylabel("Accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
