"""Text and JSON rendering of check results."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .oracle import PropositionReport
from .theorems import ConditionReport, DegenerationHit, ScanConfig

SCHEMA_VERSION = 1


@dataclass
class ScanResult:
    where: dict
    config: ScanConfig
    hits: list[DegenerationHit]

    def to_dict(self) -> dict:
        return {
            "scan": self.where,
            "config": {
                "delta": self.config.delta,
                "grid": self.config.grid,
                "lambda_grid": len(self.config.lambdas()),
                "zero_tol": self.config.zero_tol,
            },
            "hits": [
                {
                    "kind": h.kind,
                    "eta": list(h.query.eta),
                    "lambda_bar": h.query.lambda_bar,
                    "values": h.values,
                }
                for h in self.hits
            ],
        }


def _plain(obj):
    """Convert numpy scalars and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj) + 0.0
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and obj.__class__.__module__ == "enum":
        return obj.value
    return obj


def to_document(objects: Iterable, problem: str | None = None) -> dict:
    results = []
    for obj in objects:
        kind = (
            "condition" if isinstance(obj, ConditionReport)
            else "proposition" if isinstance(obj, PropositionReport)
            else "scan"
        )
        results.append({"kind": kind, **obj.to_dict()})
    return _plain({"schema_version": SCHEMA_VERSION, "problem": problem, "results": results})


def render_json(objects: Iterable, problem: str | None = None) -> bytes:
    doc = to_document(objects, problem)
    return (json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, float):
        return f"{value + 0.0:.12g}"
    return str(value)


def _table(rows: list[list[str]], indent: str = "  ") -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return [indent + "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]


def _condition_text(r: ConditionReport) -> list[str]:
    lines = [f"== {r.label} [{r.mode.value}] =="]
    lines.append(f"{r.verdict.value}: {r.condition} = {_fmt(r.tested_value)}  (required {r.relation})")
    lines.append(f"  {r.verdict.message}")
    if r.evidence:
        rows = [["quantity", "value", "tolerance", "holds"]]
        rows += [[e.quantity, _fmt(e.value), _fmt(e.tolerance), "yes" if e.holds else "no"] for e in r.evidence]
        lines.append("  hypotheses:")
        lines += _table(rows, "    ")
    if r.witness:
        order = ["t", "side", "eta", "lambda_bar"]
        keys = [k for k in order if k in r.witness] + sorted(k for k in r.witness if k not in order)
        lines.append("  witness: " + " ".join(f"{k}={_fmt(r.witness[k])}" for k in keys))
    lines.append(f"  samples: {len(r.samples)}")
    for note in r.notes:
        lines.append(f"  note: {note}")
    return lines


def _proposition_text(r: PropositionReport) -> list[str]:
    lines = [f"== expansion {r.prop} side {r.side.value} theta={_fmt(r.theta)} lambda={_fmt(r.lam)} xi={_fmt(list(r.xi))} =="]
    rows = [["power", "predicted", "fitted", "abs dev", "rel dev", "tolerance", "pass"]]
    for c in r.checks:
        rows.append([
            str(c.power), _fmt(c.predicted), _fmt(c.fitted), f"{c.abs_dev:.3g}", f"{c.rel_dev:.3g}",
            f"{c.kind} {c.tolerance:g}", "yes" if c.passed else "no",
        ])
    lines += _table(rows)
    lines.append(f"  fit residual {r.fit.residual:.3g}, condition number {r.fit.condition_number:.3g}")
    lines.append("  PASS" if r.passed else "  FAIL")
    return lines


def _scan_text(r: ScanResult) -> list[str]:
    where = ", ".join(f"{k}={_fmt(v if not isinstance(v, tuple) else list(v))}" for k, v in r.where.items())
    lines = [f"== degeneration scan ({where}) =="]
    if not r.hits:
        lines.append("  no degenerate directions on the grid")
        return lines
    rows = [["kind", "eta", "lambda_bar", "values"]]
    for h in r.hits:
        vals = ", ".join(f"{k}={v:.3g}" for k, v in h.values.items())
        rows.append([h.kind, _fmt(list(h.query.eta)), _fmt(h.query.lambda_bar), vals])
    return lines + _table(rows)


def render_text(objects: Iterable) -> bytes:
    blocks = []
    for obj in objects:
        if isinstance(obj, ConditionReport):
            blocks.append(_condition_text(obj))
        elif isinstance(obj, PropositionReport):
            blocks.append(_proposition_text(obj))
        else:
            blocks.append(_scan_text(obj))
    return ("\n\n".join("\n".join(b) for b in blocks) + "\n").encode("utf-8")


def render_report(objects: Iterable, fmt: str = "text", problem: str | None = None) -> bytes:
    objects = list(objects)
    if fmt == "json":
        return render_json(objects, problem)
    if fmt == "text":
        return render_text(objects)
    raise ValueError(f"unknown format {fmt!r}")
