"""Adam training with early stopping, and the multiview / SINGLE / CROSS regimes.

* multiview: one model over a set of views, trained on every entity that has
  at least one of them.
* SINGLE: a projection-plus-head model for one view, trained on the entities
  where that view exists.
* CROSS: per-view projections with one shared head, trained on the union of
  all single-view example streams; evaluated view by view.

Seeds: model initialisation uses ``derive_seed(seed, "init")`` and the
per-epoch shuffles use ``derive_seed(seed, "shuffle")``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, ViewSpec
from .errors import EmptySplit, NoExamples, ShapeMismatch, ViewUnknown
from .eval import matrix_counts, micro_f1
from .model import ModelConfig, MultiviewModel
from .numeric import derive_seed, make_rng


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 128
    epochs: int = 100
    patience: int = 5
    seed: int = 0
    deterministic: bool = True
    threshold: float = 0.5
    fallback: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch < 1:
            raise ValueError("batch size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState, cfg: TrainConfig) -> AdamState:
    """In-place Adam update with bias correction.  ``params`` is a list of (name, array)."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, w in params:
        g = grads[name]
        if g.shape != w.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {w.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(w)
            state.v[name] = np.zeros_like(w)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        w -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return state


# ----------------------------------------------------------------- example sets

@dataclass
class Inputs:
    """Model-aligned arrays: one ``(N, d_j)`` per view, ``(N, n)`` mask, ``(N, |T|)`` gold."""

    X: list[np.ndarray]
    M: np.ndarray
    Y: np.ndarray
    freq: np.ndarray | None = None

    def __len__(self):
        return self.M.shape[0]

    def take(self, idx) -> "Inputs":
        return Inputs([x[idx] for x in self.X], self.M[idx], self.Y[idx],
                      None if self.freq is None else self.freq[idx])


def entity_inputs(ds: Dataset, views) -> Inputs:
    X, M = ds.select_views(views)
    return Inputs(X, M, ds.Y, ds.freq)


@dataclass(frozen=True)
class CrossExample:
    entity: str
    view: ViewSpec
    vector: np.ndarray
    types: frozenset[int]


def build_cross_set(ds: Dataset, views=None) -> list[CrossExample]:
    """One example per (entity, available view), entity-major in dataset order."""
    cols = range(len(ds.views)) if views is None else [ds.view_index(v.key) for v in views]
    out = []
    for i, eid in enumerate(ds.ids):
        types = frozenset(np.flatnonzero(ds.Y[i]).tolist())
        for j in cols:
            if ds.M[i, j]:
                out.append(CrossExample(eid, ds.views[j], ds.X[j][i], types))
    return out


def cross_inputs(ds: Dataset, views) -> Inputs:
    """Array form of :func:`build_cross_set`: each row shows a single view."""
    X, M = ds.select_views(views)
    rows, cols = np.nonzero(M)  # row-major, so entity-major with views in order
    onehot = np.zeros((rows.size, len(views)), dtype=bool)
    onehot[np.arange(rows.size), cols] = True
    Xc = [np.where(onehot[:, [j]], x[rows], 0.0) for j, x in enumerate(X)]
    return Inputs(Xc, onehot, ds.Y[rows], ds.freq[rows])


# --------------------------------------------------------------------- training

@dataclass
class History:
    epochs: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    dev_f1: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "dev_f1"])
        for e, l, f in zip(self.epochs, self.loss, self.dev_f1):
            w.writerow([e, repr(float(l)), repr(float(f))])
        return buf.getvalue()


def dev_micro_f1(model: MultiviewModel, dev: Inputs, cfg: TrainConfig) -> float:
    pred = model.predict(dev.X, dev.M, cfg.threshold, cfg.fallback)
    return micro_f1(matrix_counts(pred, dev.Y))[2]


def train_loop(model: MultiviewModel, train: Inputs, dev: Inputs, cfg: TrainConfig, dev_metric=None):
    """Minibatch Adam on the summed loss; keeps the best-dev parameters.

    ``dev_metric(model, epoch)`` overrides the dev score (used to script
    early-stopping scenarios).
    """
    if len(train) == 0:
        raise EmptySplit("training set is empty")
    if len(dev) == 0:
        raise EmptySplit("dev set is empty")
    rng = make_rng(derive_seed(cfg.seed, "shuffle"))
    state = AdamState()
    params = model.named_params()
    hist = History()
    best, best_f1, bad = model.copy(), -np.inf, 0
    Yf = train.Y.astype(np.float64)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train))
        total = 0.0
        for start in range(0, len(order), cfg.batch):
            idx = order[start:start + cfg.batch]
            loss, grads, _ = model.forward_backward([x[idx] for x in train.X], train.M[idx], Yf[idx])
            adam_step(params, grads, state, cfg)
            total += loss
        f1 = dev_metric(model, epoch) if dev_metric else dev_micro_f1(model, dev, cfg)
        hist.epochs.append(epoch)
        hist.loss.append(total / len(train))
        hist.dev_f1.append(float(f1))
        if f1 > best_f1:
            best, best_f1, bad = model.copy(), f1, 0
            hist.best_epoch = epoch
        else:
            bad += 1
            if bad >= cfg.patience:
                break
    best.meta = {"best_epoch": hist.best_epoch, "best_dev_f1": float(best_f1)}
    return best, hist


def _with_available(inputs: Inputs) -> Inputs:
    return inputs.take(np.flatnonzero(inputs.M.any(axis=1)))


def train_multiview(train: Dataset, dev: Dataset, model_cfg: ModelConfig, cfg: TrainConfig, dev_metric=None):
    tr = _with_available(entity_inputs(train, model_cfg.views))
    dv = entity_inputs(dev, model_cfg.views)
    model = MultiviewModel.init(model_cfg, derive_seed(cfg.seed, "init"))
    return train_loop(model, tr, dv, cfg, dev_metric)


def _projection_config(model_cfg: ModelConfig, views) -> ModelConfig:
    # with one visible view per example every projection mode reduces to tanh(W^j v^j)
    return replace(model_cfg, views=tuple(views), fusion="avg")


def train_cross(train: Dataset, dev: Dataset, model_cfg: ModelConfig, cfg: TrainConfig, dev_metric=None):
    cfg_x = _projection_config(model_cfg, model_cfg.views)
    tr = cross_inputs(train, cfg_x.views)
    dv = cross_inputs(dev, cfg_x.views)
    model = MultiviewModel.init(cfg_x, derive_seed(cfg.seed, "init"))
    return train_loop(model, tr, dv, cfg, dev_metric)


def train_single(train: Dataset, dev: Dataset, view, model_cfg: ModelConfig, cfg: TrainConfig, dev_metric=None):
    key = view.key if isinstance(view, ViewSpec) else view
    try:
        spec = train.views[train.view_index(key)]
    except KeyError:
        raise ViewUnknown(f"view {key} is not declared in the dataset") from None
    cfg_1 = _projection_config(model_cfg, (spec,))
    tr = cross_inputs(train, cfg_1.views)
    if len(tr) == 0:
        raise NoExamples(f"no training entity has view {spec}")
    dv = cross_inputs(dev, cfg_1.views)
    model = MultiviewModel.init(cfg_1, derive_seed(cfg.seed, "init"))
    return train_loop(model, tr, dv, cfg, dev_metric)


def install_single(cross: MultiviewModel, single: MultiviewModel) -> MultiviewModel:
    """Copy of ``cross`` whose slot for the single model's view carries its projection and head."""
    (spec,) = single.config.views
    j = cross.view_position(spec)
    if cross.config.views[j].dim != spec.dim:
        raise ShapeMismatch(f"view {spec} has dim {spec.dim}, crossview slot expects {cross.config.views[j].dim}")
    out = cross.copy()
    for dst, src in ((out.fusion.Ws[j], single.fusion.Ws[0]), (out.head.Wh, single.head.Wh),
                     (out.head.Wo, single.head.Wo)):
        if dst.shape != src.shape:
            raise ShapeMismatch(f"parameter shape {src.shape} does not fit slot {dst.shape}")
        dst[...] = src
    if out.fusion.bs is not None and single.fusion.bs is not None:
        out.fusion.bs[j][...] = single.fusion.bs[0]
    return out
