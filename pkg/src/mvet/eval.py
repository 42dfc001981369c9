"""Micro-averaged precision/recall/F1 with all/tail/head breakdown and report tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import Bucket, Dataset, bucket

ABSENT = "—"
CSV_COLUMNS = ("label", "all", "tail", "head", "p", "r", "n_tail", "n_head")


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def micro_counts(pairs) -> Counts:
    """Pool tp/fp/fn over (predicted, gold) pairs.

    Each pair holds two sets of types, or two boolean rows of equal length.
    """
    tp = fp = fn = 0
    for pred, gold in pairs:
        if isinstance(pred, np.ndarray) and pred.dtype == bool:
            tp += int(np.sum(pred & gold))
            fp += int(np.sum(pred & ~gold))
            fn += int(np.sum(~pred & gold))
        else:
            pred, gold = set(pred), set(gold)
            tp += len(pred & gold)
            fp += len(pred - gold)
            fn += len(gold - pred)
    return Counts(tp, fp, fn)


def matrix_counts(pred: np.ndarray, gold: np.ndarray) -> Counts:
    pred = np.asarray(pred, dtype=bool)
    gold = np.asarray(gold, dtype=bool)
    return Counts(int(np.sum(pred & gold)), int(np.sum(pred & ~gold)), int(np.sum(~pred & gold)))


def micro_f1(c: Counts) -> tuple[float, float, float]:
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class ReportRow:
    label: str
    all: float | None
    tail: float | None
    head: float | None
    p: float
    r: float
    n_all: int
    n_tail: int
    n_head: int
    counts: dict = field(default_factory=dict, repr=False)

    @property
    def n_mid(self) -> int:
        return self.n_all - self.n_tail - self.n_head


def bucket_masks(freq) -> dict[str, np.ndarray]:
    b = np.array([bucket(int(f)) for f in freq])
    return {"tail": b == Bucket.TAIL, "mid": b == Bucket.MID, "head": b == Bucket.HEAD}


def evaluate_predictions(label: str, pred: np.ndarray, gold: np.ndarray, freq) -> ReportRow:
    masks = bucket_masks(freq)
    counts = {"all": matrix_counts(pred, gold)}
    for name, m in masks.items():
        counts[name] = matrix_counts(pred[m], gold[m])
    p, r, f = micro_f1(counts["all"])

    def score(name):
        return micro_f1(counts[name])[2] if masks[name].any() else None

    return ReportRow(label, f if len(freq) else None, score("tail"), score("head"), p, r,
                     len(freq), int(masks["tail"].sum()), int(masks["head"].sum()), counts)


def bucketed_eval(model, data: Dataset, label: str = "", threshold: float = 0.5,
                  top1_fallback: bool = True, view=None) -> ReportRow:
    """Score ``model`` on ``data`` over all, tail and head entities.

    With ``view`` set, only that view is shown to the model (the per-view
    protocol used for crossview models).  Entities without any visible view
    get an empty prediction.
    """
    Xs, M = data.select_views(model.config.views)
    if view is not None:
        j = model.view_position(view.key if hasattr(view, "key") else view)
        keep = np.zeros(M.shape[1], dtype=bool)
        keep[j] = True
        M = M & keep
    pred = model.predict(Xs, M, threshold, top1_fallback)
    return evaluate_predictions(label, pred, data.Y, data.freq)


# --------------------------------------------------------------------- reports

def _pct(x: float | None) -> str:
    return ABSENT if x is None else f"{100 * x:.1f}"


def _frac(x: float | None) -> str:
    return ABSENT if x is None else f"{x:.6f}"


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)

    def add(self, row: ReportRow):
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.label, _frac(r.all), _frac(r.tail), _frac(r.head), _frac(r.p), _frac(r.r),
                        r.n_tail, r.n_head])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ("label", "all", "tail", "head", "P", "R", "n_tail", "n_head")
        body = [(r.label, _pct(r.all), _pct(r.tail), _pct(r.head), _pct(r.p), _pct(r.r),
                 str(r.n_tail), str(r.n_head)) for r in self.rows]
        widths = [max(len(x) for x in col) for col in zip(header, *body)]
        lines = []
        for i, row in enumerate([header] + body):
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if i == 0:
                lines.append("-" * len(lines[0]))
        return "\n".join(lines) + "\n"
