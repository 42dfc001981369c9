"""The two experiment matrices behind the ``table1`` and ``table2`` commands.

table1: for each representation block (CTXT, NAME over the core languages,
DESC) one single-view model per language and the four fusion operators over
the block's views, then the four fusions over all core views combined.  When
the dataset has NAME views beyond the core languages, NAME-all and
CTXT+NAME-all+DESC blocks are added.  Row 0 is CON over the first language's
three views.

table2: one SINGLE model per view against one CROSS model evaluated view by
view, each view on the test entities where it is available.

Each replicate ``r`` of a row trains with seed ``derive_seed(master, label, r)``;
reported scores are means over replicates.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, Representation
from .eval import ABSENT, EvalReport, ReportRow, bucketed_eval
from .fusion import MODES
from .model import ModelConfig
from .numeric import derive_seed
from .trainer import TrainConfig, train_cross, train_multiview, train_single

FUSION_LABEL = {m: f"MULTIVIEW-{m.upper()}" for m in MODES}


@dataclass(frozen=True)
class Job:
    block: str
    label: str
    kind: str  # "single" or "multi"
    views: tuple
    fusion: str = "avg"


def _views(ds: Dataset, rep, langs):
    return tuple(v for v in ds.views if v.representation is rep and v.language in langs)


def table1_jobs(ds: Dataset, core: int = 4, fusions=MODES) -> list[Job]:
    langs = list(dict.fromkeys(v.language for v in ds.views))
    core_langs = langs[:core]
    jobs = []
    first = tuple(v for v in ds.views if v.language == langs[0])
    if len(first) > 1:
        jobs.append(Job("baseline", "FIGMENT", "multi", first, "con"))
    name_core = _views(ds, Representation.NAME, core_langs)
    blocks = [
        ("CTXT", _views(ds, Representation.CTXT, core_langs)),
        (f"NAME{len(name_core)}", name_core),
        ("DESC", _views(ds, Representation.DESC, core_langs)),
    ]
    for block, views in blocks:
        if not views:
            continue
        for v in views:
            jobs.append(Job(block, f"{block} {v.language.upper()}", "single", (v,)))
        if len(views) > 1:
            for m in fusions:
                jobs.append(Job(block, f"{block} {FUSION_LABEL[m]}", "multi", views, m))
    combined = tuple(v for v in ds.views if v.language in core_langs)
    combo_name = "+".join(b for b, vs in blocks if vs)
    if len({v.representation for v in combined}) > 1:
        for m in fusions:
            jobs.append(Job(combo_name, f"{combo_name} {FUSION_LABEL[m]}", "multi", combined, m))
    name_all = _views(ds, Representation.NAME, langs)
    if len(name_all) > len(name_core):
        block = f"NAME{len(name_all)}"
        for m in fusions:
            jobs.append(Job(block, f"{block} {FUSION_LABEL[m]}", "multi", name_all, m))
        wide = tuple(v for v in ds.views
                     if v.language in core_langs or v.representation is Representation.NAME)
        wide_name = combo_name.replace(f"NAME{len(name_core)}", block)
        for m in fusions:
            jobs.append(Job(wide_name, f"{wide_name} {FUSION_LABEL[m]}", "multi", wide, m))
    return jobs


@dataclass
class ModelDefaults:
    d: int = 300
    h: int = 400
    slope: float = 0.01
    bias: bool = False


def _model_cfg(ds: Dataset, views, fusion, md: ModelDefaults) -> ModelConfig:
    return ModelConfig(views=views, n_types=len(ds.vocab), fusion=fusion, d=md.d, h=md.h,
                       slope=md.slope, bias=md.bias)


def _mean_row(label, rows: list[ReportRow]) -> ReportRow:
    def mean(attr):
        vals = [getattr(r, attr) for r in rows]
        return None if any(v is None for v in vals) else float(np.mean(vals))

    r0 = rows[0]
    return ReportRow(label, mean("all"), mean("tail"), mean("head"), mean("p"), mean("r"),
                     r0.n_all, r0.n_tail, r0.n_head)


@dataclass
class TableResult:
    report: EvalReport
    runs: list[tuple[str, int, ReportRow]] = field(default_factory=list)

    def row(self, label) -> ReportRow:
        for r in self.report.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def runs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "replicate", "all", "tail", "head", "p", "r"])
        for label, rep, r in self.runs:
            w.writerow([label, rep] + [ABSENT if x is None else f"{x:.6f}"
                                       for x in (r.all, r.tail, r.head, r.p, r.r)])
        return buf.getvalue()


def run_table1(train: Dataset, dev: Dataset, test: Dataset, md: ModelDefaults, tcfg: TrainConfig,
               master_seed: int = 0, seeds: int = 1, core: int = 4, fusions=MODES, jobs=None,
               progress=None) -> TableResult:
    jobs = table1_jobs(train, core, fusions) if jobs is None else jobs
    result = TableResult(EvalReport())
    for job in jobs:
        reps = []
        for r in range(seeds):
            cfg = replace(tcfg, seed=derive_seed(master_seed, job.label, r))
            if job.kind == "single":
                model, _ = train_single(train, dev, job.views[0], _model_cfg(train, job.views, "avg", md), cfg)
            else:
                model, _ = train_multiview(train, dev, _model_cfg(train, job.views, job.fusion, md), cfg)
            row = bucketed_eval(model, test, job.label, cfg.threshold, cfg.fallback)
            reps.append(row)
            result.runs.append((job.label, r, row))
            if progress:
                progress(job.label, r, row)
        result.report.add(_mean_row(job.label, reps))
    return result


@dataclass
class Table2Row:
    view: str
    single: ReportRow
    cross: ReportRow
    params_single: int
    params_cross: int


def run_table2(train: Dataset, dev: Dataset, test: Dataset, md: ModelDefaults, tcfg: TrainConfig,
               master_seed: int = 0, seeds: int = 1, views=None, progress=None):
    views = tuple(train.views if views is None else views)
    per_view_single = {v.label: [] for v in views}
    per_view_cross = {v.label: [] for v in views}
    params = {}
    runs = []
    tests = {v.label: test.subset(np.flatnonzero(test.M[:, test.view_index(v.key)])) for v in views}
    for r in range(seeds):
        cfg = replace(tcfg, seed=derive_seed(master_seed, "CROSS", r))
        cross, _ = train_cross(train, dev, _model_cfg(train, views, "avg", md), cfg)
        for v in views:
            row = bucketed_eval(cross, tests[v.label], f"{v.label} CROSS", cfg.threshold, cfg.fallback, view=v)
            per_view_cross[v.label].append(row)
            runs.append((f"{v.label} CROSS", r, row))
            params.setdefault(v.label, [None, cross.active_param_count(v)])
        if progress:
            progress("CROSS", r, None)
        for v in views:
            cfg = replace(tcfg, seed=derive_seed(master_seed, f"SINGLE {v.label}", r))
            single, _ = train_single(train, dev, v, _model_cfg(train, (v,), "avg", md), cfg)
            row = bucketed_eval(single, tests[v.label], f"{v.label} SINGLE", cfg.threshold, cfg.fallback)
            per_view_single[v.label].append(row)
            runs.append((f"{v.label} SINGLE", r, row))
            params[v.label][0] = single.active_param_count(v)
            if progress:
                progress(f"SINGLE {v.label}", r, row)
    rows = [Table2Row(v.label, _mean_row(f"{v.label} SINGLE", per_view_single[v.label]),
                      _mean_row(f"{v.label} CROSS", per_view_cross[v.label]), *params[v.label])
            for v in views]
    return Table2Result(rows, runs)


@dataclass
class Table2Result:
    rows: list[Table2Row]
    runs: list = field(default_factory=list)

    def row(self, view_label) -> Table2Row:
        for r in self.rows:
            if r.view == view_label:
                return r
        raise KeyError(view_label)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["view", "single", "cross", "single_tail", "cross_tail", "single_head", "cross_head",
                    "params_single", "params_cross"])
        f = lambda x: ABSENT if x is None else f"{x:.6f}"
        for r in self.rows:
            w.writerow([r.view, f(r.single.all), f(r.cross.all), f(r.single.tail), f(r.cross.tail),
                        f(r.single.head), f(r.cross.head), r.params_single, r.params_cross])
        return buf.getvalue()

    def to_text(self) -> str:
        p = lambda x: ABSENT if x is None else f"{100 * x:.1f}"
        header = ("view", "SINGLE", "CROSS", "params")
        body = [(r.view, p(r.single.all), p(r.cross.all),
                 str(r.params_single) if r.params_single == r.params_cross
                 else f"{r.params_single}!={r.params_cross}") for r in self.rows]
        widths = [max(len(x) for x in col) for col in zip(header, *body)]
        lines = []
        for i, row in enumerate([header] + body):
            cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
            if i == 0:
                lines.append("-" * len(lines[0]))
        return "\n".join(lines) + "\n"

    def runs_csv(self) -> str:
        return TableResult(EvalReport(), self.runs).runs_csv()
