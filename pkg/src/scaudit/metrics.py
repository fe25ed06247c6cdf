"""Confusion-matrix metrics, benchmark tables, and regression comparison.

Numbers are kept at full precision internally; rounding half-up to two
decimals happens only at display and comparison boundaries. Precision and
recall are defined as 0 (not NaN) on empty denominators, which is what the
reference tables print for models that never flag anything.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path

from .taxonomy import get_category


class MetricsError(Exception):
    pass


class MalformedReferenceError(Exception):
    pass


def round2(x: float) -> float:
    return float(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _cents(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP) * 100)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise MetricsError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsRow:
    accuracy: float
    precision: float
    recall: float
    f1: float

    def rounded(self) -> tuple[float, float, float, float]:
        return (round2(self.accuracy), round2(self.precision), round2(self.recall), round2(self.f1))

    def same_at_2dp(self, other: "MetricsRow") -> bool:
        return all(_cents(a) == _cents(b) for a, b in zip(self.as_tuple(), other.as_tuple()))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.accuracy, self.precision, self.recall, self.f1)


def compute_metrics(cm: ConfusionMatrix) -> MetricsRow:
    if cm.total == 0:
        raise MetricsError("empty matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsRow(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def reconstruct_cm(row: MetricsRow | tuple, n_pos: int, n_neg: int) -> list[ConfusionMatrix]:
    """All integer matrices with tp+fn=n_pos, fp+tn=n_neg matching the row
    at two-decimal rounding. Empty result means the row is inconsistent."""
    if n_pos <= 0 or n_neg <= 0:
        raise MetricsError("n_pos and n_neg must be positive")
    if not isinstance(row, MetricsRow):
        row = MetricsRow(*row)
    want = tuple(_cents(v) for v in row.as_tuple())
    matches = []
    for tp in range(n_pos + 1):
        for fp in range(n_neg + 1):
            cm = ConfusionMatrix(tp=tp, fp=fp, fn=n_pos - tp, tn=n_neg - fp)
            got = compute_metrics(cm)
            if tuple(_cents(v) for v in got.as_tuple()) == want:
                matches.append(cm)
    return matches


# Display order of the reference tables: Solana block first, then Algorand.
TABLE_ORDER: tuple[tuple[str, str], ...] = (
    ("solana", "bump_seed"),
    ("solana", "cpi_unchecked"),
    ("solana", "integer_flow"),
    ("solana", "missing_key_check"),
    ("solana", "type_confusion"),
    ("algorand", "arbitrary_delete"),
    ("algorand", "arbitrary_update"),
    ("algorand", "unchecked_asset_close_to"),
    ("algorand", "unchecked_close_remainder_to"),
    ("algorand", "unchecked_rekey_to"),
    ("algorand", "unchecked_transaction_fee"),
    ("algorand", "unchecked_asset_receiver"),
    ("algorand", "unchecked_payment_receiver"),
)

RowKey = tuple[str, str, str, str]  # (platform, category, config, model)
RowMap = dict[RowKey, MetricsRow]


def _sort_key(key: RowKey):
    platform, category, config, model = key
    try:
        order = TABLE_ORDER.index((platform, category))
    except ValueError:
        order = len(TABLE_ORDER)
    platform_rank = 0 if platform == "solana" else 1
    return (platform_rank, order, category, config, model)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{round2(x):.2f}"


def platform_averages(rows: RowMap) -> dict[tuple[str, str, str], float]:
    """Mean accuracy per (platform, config, model), from unrounded values."""
    sums: dict[tuple[str, str, str], list[float]] = {}
    for (platform, _cat, config, model), row in rows.items():
        sums.setdefault((platform, config, model), []).append(row.accuracy)
    return {k: sum(v) / len(v) for k, v in sums.items()}


def emit_table(rows: RowMap, fmt: str = "csv") -> str:
    """Rows grouped by platform in reference order, with Avg. rows appended."""
    if fmt not in ("csv", "markdown"):
        raise MetricsError(f"unknown table format {fmt!r}")
    ordered = sorted(rows.items(), key=lambda item: _sort_key(item[0]))
    averages = platform_averages(rows)

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["platform", "category", "config", "model", "accuracy", "precision", "recall", "f1"])
        for (platform, category, config, model), row in ordered:
            writer.writerow([platform, category, config, model, *(_fmt(v) for v in row.as_tuple())])
        for (platform, config, model), acc in sorted(averages.items()):
            writer.writerow([platform, "Avg.", config, model, _fmt(acc), "", "", ""])
        return buf.getvalue()

    # markdown: one block per platform, categories as rows, one column per
    # (config, model) and metric
    configs = sorted({k[2] for k in rows})
    models = sorted({k[3] for k in rows})
    metrics = ("accuracy", "precision", "recall", "f1") if len(configs) == 1 else ("accuracy",)
    headers = ["category"]
    for metric in metrics:
        for config in configs:
            for model in models:
                tag = f"{metric} {model}" if len(configs) == 1 else f"{metric} {config} {model}"
                headers.append(tag)
    out = []
    for platform in ("solana", "algorand"):
        block = {k: v for k, v in rows.items() if k[0] == platform}
        if not block:
            continue
        out.append(f"### {platform.capitalize()}")
        out.append("| " + " | ".join(headers) + " |")
        out.append("|" + "---|" * len(headers))
        categories = []
        for p, c in TABLE_ORDER:
            if p == platform and any(k[1] == c for k in block):
                categories.append(c)
        for extra in sorted({k[1] for k in block} - set(categories)):
            categories.append(extra)
        for category in categories:
            cells = [category]
            for metric in metrics:
                for config in configs:
                    for model in models:
                        row = block.get((platform, category, config, model))
                        value = getattr(row, metric) if row else None
                        cells.append(_fmt(value))
            out.append("| " + " | ".join(cells) + " |")
        avg_cells = ["Avg."]
        for metric in metrics:
            for config in configs:
                for model in models:
                    if metric == "accuracy" and (platform, config, model) in averages:
                        avg_cells.append(_fmt(averages[(platform, config, model)]))
                    else:
                        avg_cells.append("")
        out.append("| " + " | ".join(avg_cells) + " |")
        out.append("")
    return "\n".join(out)


def group_by_owasp(rows: RowMap) -> dict[str, dict[tuple[str, str], float]]:
    """Unweighted mean accuracy per OWASP id and (config, model).

    Unrounded means; categories sharing an OWASP id are pooled regardless
    of platform.
    """
    acc: dict[str, dict[tuple[str, str], list[float]]] = {}
    for (platform, category, config, model), row in rows.items():
        owasp = get_category(category).owasp_id  # raises TaxonomyError on unknown keys
        acc.setdefault(owasp, {}).setdefault((config, model), []).append(row.accuracy)
    return {
        owasp: {key: sum(vals) / len(vals) for key, vals in groups.items()}
        for owasp, groups in acc.items()
    }


def _parse_float(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    return float(cell)


def load_reference(path: str | Path) -> dict[RowKey, dict[str, float]]:
    """Parse a reference CSV file into sparse metric cells per row key."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or not {"platform", "category", "config", "model"} <= set(reader.fieldnames):
            raise MalformedReferenceError(f"reference header missing required columns: {reader.fieldnames}")
        out: dict[RowKey, dict[str, float]] = {}
        for record in reader:
            key = (record["platform"], record["category"], record["config"], record["model"])
            cells = {}
            for metric in ("accuracy", "precision", "recall", "f1"):
                value = _parse_float(record.get(metric) or "")
                if value is not None:
                    cells[metric] = value
            out[key] = cells
        return out
    except MalformedReferenceError:
        raise
    except Exception as exc:
        raise MalformedReferenceError(str(exc)) from exc


@dataclass(frozen=True)
class DiffEntry:
    key: RowKey
    metric: str
    got: float
    want: float


@dataclass
class DiffReport:
    differences: list[DiffEntry]
    compared_cells: int
    missing_rows: list[RowKey]

    @property
    def ok(self) -> bool:
        return not self.differences

    def lines(self) -> list[str]:
        if self.ok:
            return [f"no differences ({self.compared_cells} cells compared)"]
        return [
            f"{'/'.join(d.key)} {d.metric}: got {round2(d.got):.2f}, reference {round2(d.want):.2f}"
            for d in self.differences
        ]


def compare_with_reference(rows: RowMap, reference: str | Path | dict) -> DiffReport:
    """Cells present on both sides and differing by more than 0.005 after
    rounding. Reference rows with no counterpart are listed separately."""
    ref = reference if isinstance(reference, dict) else load_reference(reference)
    differences = []
    compared = 0
    missing = []
    for key, cells in sorted(ref.items()):
        row = rows.get(key)
        if row is None:
            missing.append(key)
            continue
        for metric, want in cells.items():
            got = getattr(row, metric)
            compared += 1
            if _cents(got) != _cents(want):
                differences.append(DiffEntry(key=key, metric=metric, got=got, want=want))
    return DiffReport(differences=differences, compared_cells=compared, missing_rows=missing)


def reference_table_path(name: str) -> Path:
    """Path of a committed reference table (table3 or table4)."""
    with resources.as_file(resources.files("scaudit").joinpath(f"data/{name}.csv")) as p:
        return Path(p)


def rows_from_csv(path: str | Path) -> RowMap:
    """Load a metrics CSV (as written by emit_table) into a RowMap.

    Avg. rows are skipped; missing cells default to 0.
    """
    out: RowMap = {}
    for key, cells in load_reference(path).items():
        if key[1] == "Avg.":
            continue
        out[key] = MetricsRow(
            accuracy=cells.get("accuracy", 0.0),
            precision=cells.get("precision", 0.0),
            recall=cells.get("recall", 0.0),
            f1=cells.get("f1", 0.0),
        )
    return out


def reference_rows(name: str) -> RowMap:
    """A committed reference table as a RowMap (cells that exist only)."""
    return rows_from_csv(reference_table_path(name))
