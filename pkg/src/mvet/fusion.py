"""View fusion operators: CON, ATT, MAX, AVG.

Every operator maps per-view vectors ``v^j`` (with an availability mask) to a
single representation ``p`` of size ``d``:

* CON: ``p = tanh(W1 [v^1; ...; v^n])`` with zero-filled missing slots.
* ATT: ``p^j = tanh(W^j v^j)``, ``alpha = softmax_j(a . p^j)`` over available
  views, ``p = sum_j alpha^j p^j``.
* MAX: ``p_i = max_j p^j_i`` over available views (ties go to the lowest index).
* AVG: uniform ``alpha`` over available views.

Inputs are batched: ``views`` is a list with one ``(B, d_j)`` array per view and
``mask`` is ``(B, n)`` boolean.  1-d inputs (a single entity) are accepted and
the trace remembers to squeeze the batch axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllViewsMissing, DimensionMismatch, TraceMismatch
from .numeric import glorot, softmax

MODES = ("con", "att", "max", "avg")


@dataclass
class FusionParams:
    mode: str
    W1: np.ndarray | None = None
    b1: np.ndarray | None = None
    Ws: list[np.ndarray] = field(default_factory=list)
    bs: list[np.ndarray] | None = None
    a: np.ndarray | None = None
    con_dims: tuple[int, ...] = ()

    @property
    def n_views(self) -> int:
        return len(self.view_dims)

    @property
    def view_dims(self) -> tuple[int, ...]:
        if self.mode == "con":
            return self.con_dims
        return tuple(W.shape[1] for W in self.Ws)

    @property
    def shared_dim(self) -> int:
        return self.W1.shape[0] if self.mode == "con" else self.Ws[0].shape[0]

    def named(self) -> list[tuple[str, np.ndarray]]:
        """Trainable arrays in a fixed order (view order for per-view blocks)."""
        if self.mode == "con":
            out = [("W1", self.W1)]
            if self.b1 is not None:
                out.append(("b1", self.b1))
            return out
        out = []
        for j, W in enumerate(self.Ws):
            out.append((f"W.{j}", W))
            if self.bs is not None:
                out.append((f"b.{j}", self.bs[j]))
        if self.mode == "att":
            out.append(("a", self.a))
        return out

    def view_param_count(self, j: int) -> int:
        """Number of fusion parameters that touch view ``j``."""
        if self.mode == "con":
            return self.W1.shape[0] * self.view_dims[j]
        return self.Ws[j].size + (self.bs[j].size if self.bs is not None else 0)


def init_fusion(mode: str, view_dims, d: int, rng, bias: bool = False) -> FusionParams:
    """Glorot-uniform matrices, zero biases, zero gate (ATT starts as AVG)."""
    if mode not in MODES:
        raise ValueError(f"unknown fusion mode {mode!r}; expected one of {MODES}")
    view_dims = tuple(int(x) for x in view_dims)
    if mode == "con":
        total = sum(view_dims)
        return FusionParams(mode, W1=glorot(rng, d, total), b1=np.zeros(d) if bias else None,
                            con_dims=view_dims)
    Ws = [glorot(rng, d, dj) for dj in view_dims]
    bs = [np.zeros(d) for _ in view_dims] if bias else None
    a = np.zeros(d) if mode == "att" else None
    return FusionParams(mode, Ws=Ws, bs=bs, a=a)


def con_params(W1, view_dims, b1=None) -> FusionParams:
    W1 = np.asarray(W1, dtype=np.float64)
    view_dims = tuple(int(x) for x in view_dims)
    if W1.ndim != 2 or W1.shape[1] != sum(view_dims):
        raise DimensionMismatch(f"W1 has shape {W1.shape}, views sum to {sum(view_dims)} columns")
    b1 = None if b1 is None else np.asarray(b1, dtype=np.float64)
    return FusionParams("con", W1=W1, b1=b1, con_dims=view_dims)


def projection_params(mode, Ws, a=None, bs=None) -> FusionParams:
    Ws = [np.asarray(W, dtype=np.float64) for W in Ws]
    if len({W.shape[0] for W in Ws}) != 1:
        raise DimensionMismatch("all per-view matrices must map into the same shared dim")
    if mode == "att":
        a = np.zeros(Ws[0].shape[0]) if a is None else np.asarray(a, dtype=np.float64)
    else:
        a = None
    if bs is not None:
        bs = [np.asarray(b, dtype=np.float64) for b in bs]
    return FusionParams(mode, Ws=Ws, bs=bs, a=a)


@dataclass
class FusionTrace:
    mode: str
    p: np.ndarray
    mask: np.ndarray
    projected: np.ndarray | None = None  # (B, n, d): p^j
    alpha: np.ndarray | None = None  # (B, n)
    argmax: np.ndarray | None = None  # (B, d)
    concat: np.ndarray | None = None  # (B, sum d_j), CON only
    single: bool = False

    @property
    def fused(self):
        return self.p[0] if self.single else self.p

    @property
    def weights(self):
        if self.alpha is None:
            return None
        return self.alpha[0] if self.single else self.alpha


def _prepare(views, mask, params: FusionParams):
    dims = params.view_dims
    if len(views) != len(dims):
        raise DimensionMismatch(f"{len(views)} views given, parameters declare {len(dims)}")
    single = np.ndim(views[0]) == 1
    if single:
        views = [np.asarray(v, dtype=np.float64)[None, :] for v in views]
        mask = np.asarray(mask, dtype=bool)[None, :]
    else:
        views = [np.asarray(v, dtype=np.float64) for v in views]
        mask = np.asarray(mask, dtype=bool)
    B = views[0].shape[0]
    if mask.shape != (B, len(dims)):
        raise DimensionMismatch(f"mask shape {mask.shape}, expected {(B, len(dims))}")
    for j, (v, dj) in enumerate(zip(views, dims)):
        if v.shape != (B, dj):
            raise DimensionMismatch(f"view {j} has shape {v.shape}, expected {(B, dj)}")
    if not np.all(mask.any(axis=1)):
        raise AllViewsMissing("every entity needs at least one available view")
    return views, mask, single


def _project(views, mask, params: FusionParams) -> np.ndarray:
    P = np.empty((mask.shape[0], len(views), params.shared_dim))
    for j, (v, W) in enumerate(zip(views, params.Ws)):
        z = v @ W.T
        if params.bs is not None:
            z += params.bs[j]
        P[:, j, :] = np.tanh(z)
    # unavailable views carry no value forward
    P[~mask] = 0.0
    return P


def fuse_con(views, mask, params: FusionParams) -> FusionTrace:
    views, mask, single = _prepare(views, mask, params)
    x = np.concatenate([np.where(mask[:, [j]], v, 0.0) for j, v in enumerate(views)], axis=1)
    z = x @ params.W1.T
    if params.b1 is not None:
        z += params.b1
    return FusionTrace("con", np.tanh(z), mask, concat=x, single=single)


def _weighted(P, alpha):
    return np.einsum("bn,bnd->bd", alpha, P)


def fuse_att(views, mask, params: FusionParams) -> FusionTrace:
    views, mask, single = _prepare(views, mask, params)
    P = _project(views, mask, params)
    alpha = softmax(P @ params.a, mask)
    return FusionTrace("att", _weighted(P, alpha), mask, projected=P, alpha=alpha, single=single)


def fuse_avg(views, mask, params: FusionParams) -> FusionTrace:
    views, mask, single = _prepare(views, mask, params)
    P = _project(views, mask, params)
    alpha = mask / mask.sum(axis=1, keepdims=True)
    return FusionTrace("avg", _weighted(P, alpha), mask, projected=P, alpha=alpha, single=single)


def fuse_max(views, mask, params: FusionParams) -> FusionTrace:
    views, mask, single = _prepare(views, mask, params)
    P = _project(views, mask, params)
    masked = np.where(mask[:, :, None], P, -np.inf)
    idx = masked.argmax(axis=1)  # first maximum wins
    p = np.take_along_axis(P, idx[:, None, :], axis=1)[:, 0, :]
    return FusionTrace("max", p, mask, projected=P, argmax=idx, single=single)


_FORWARD = {"con": fuse_con, "att": fuse_att, "max": fuse_max, "avg": fuse_avg}


def fuse(views, mask, params: FusionParams) -> FusionTrace:
    return _FORWARD[params.mode](views, mask, params)


def fuse_backward(trace: FusionTrace, views, mask, params: FusionParams, dp):
    """Gradients of a scalar loss given ``dL/dp``.

    Returns ``(grads, dviews)``: ``grads`` maps the names of
    ``params.named()`` to arrays of the same shapes, ``dviews`` has one array
    per view.  Unavailable views get exactly zero gradient.
    """
    if trace.mode != params.mode:
        raise TraceMismatch(f"trace from {trace.mode!r} forward, params are {params.mode!r}")
    views, mask, single = _prepare(views, mask, params)
    if single != trace.single or mask.shape != trace.mask.shape or not np.array_equal(mask, trace.mask):
        raise TraceMismatch("trace was produced for a different input")
    dp = np.asarray(dp, dtype=np.float64)
    if single:
        dp = dp[None, :]
    if dp.shape != trace.p.shape:
        raise TraceMismatch(f"upstream gradient shape {dp.shape}, expected {trace.p.shape}")

    grads: dict[str, np.ndarray] = {}
    if params.mode == "con":
        dz = dp * (1.0 - trace.p ** 2)
        grads["W1"] = dz.T @ trace.concat
        if params.b1 is not None:
            grads["b1"] = dz.sum(axis=0)
        dx = dz @ params.W1
        dviews, start = [], 0
        for j, v in enumerate(views):
            stop = start + v.shape[1]
            dviews.append(np.where(mask[:, [j]], dx[:, start:stop], 0.0))
            start = stop
    else:
        P = trace.projected
        if params.mode == "max":
            dP = np.zeros_like(P)
            np.put_along_axis(dP, trace.argmax[:, None, :], dp[:, None, :], axis=1)
        else:
            alpha = trace.alpha
            dP = alpha[:, :, None] * dp[:, None, :]
            if params.mode == "att":
                dalpha = np.einsum("bd,bnd->bn", dp, P)
                ds = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
                grads["a"] = np.einsum("bn,bnd->d", ds, P)
                dP += ds[:, :, None] * params.a[None, None, :]
        dZ = dP * (1.0 - P ** 2) * mask[:, :, None]
        dviews = []
        for j, (v, W) in enumerate(zip(views, params.Ws)):
            dz = dZ[:, j, :]
            grads[f"W.{j}"] = dz.T @ v
            if params.bs is not None:
                grads[f"b.{j}"] = dz.sum(axis=0)
            dviews.append(dz @ W)
    if single:
        dviews = [g[0] for g in dviews]
    ordered = {name: grads[name] for name, _ in params.named()}
    return ordered, dviews
