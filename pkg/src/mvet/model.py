"""Classifier head, multi-label loss and the end-to-end multiview model.

    y_hat = sigmoid(W_o leaky(W_h p))

with ``p`` produced by one of the fusion operators.  The training loss is
binary cross entropy summed over types and examples.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fusion as F
from .dataset import Representation, ViewSpec
from .errors import DimensionMismatch, DomainError, SpecMismatch
from .numeric import DEFAULT_SLOPE, glorot, leaky_v, make_rng, sigmoid_v

CLAMP = 1e-12


@dataclass
class HeadParams:
    Wh: np.ndarray
    Wo: np.ndarray
    slope: float = DEFAULT_SLOPE
    bh: np.ndarray | None = None
    bo: np.ndarray | None = None

    def named(self):
        out = [("Wh", self.Wh)]
        if self.bh is not None:
            out.append(("bh", self.bh))
        out.append(("Wo", self.Wo))
        if self.bo is not None:
            out.append(("bo", self.bo))
        return out

    @property
    def size(self) -> int:
        return sum(a.size for _, a in self.named())


@dataclass
class ModelConfig:
    views: tuple[ViewSpec, ...]
    n_types: int
    fusion: str = "att"
    d: int = 300
    h: int = 400
    slope: float = DEFAULT_SLOPE
    bias: bool = False

    def __post_init__(self):
        self.views = tuple(self.views)
        if self.fusion not in F.MODES:
            raise ValueError(f"unknown fusion mode {self.fusion!r}; expected one of {F.MODES}")
        if not self.views:
            raise ValueError("a model needs at least one view")
        if min(self.d, self.h, self.n_types) <= 0:
            raise ValueError("dims must be positive")
        if not 0.0 < self.slope < 1.0:
            raise ValueError("leaky slope must lie in (0, 1)")

    def to_dict(self):
        out = asdict(self)
        out["views"] = [[v.language, v.representation.value, v.dim] for v in self.views]
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["views"] = tuple(ViewSpec(l, Representation.parse(r), int(dim)) for l, r, dim in d["views"])
        return cls(**d)


def _head_pre(p, head: HeadParams):
    if p.shape[-1] != head.Wh.shape[1]:
        raise DimensionMismatch(f"p has length {p.shape[-1]}, W_h expects {head.Wh.shape[1]}")
    zh = p @ head.Wh.T
    if head.bh is not None:
        zh = zh + head.bh
    hid = leaky_v(zh, head.slope)
    logits = hid @ head.Wo.T
    if head.bo is not None:
        logits = logits + head.bo
    return zh, hid, logits


def head_forward(p, head: HeadParams) -> np.ndarray:
    """Type scores in (0, 1) for one representation or a batch of them."""
    return sigmoid_v(_head_pre(np.asarray(p, dtype=np.float64), head)[2])


def bce_loss(y_hat, y) -> float:
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise DimensionMismatch(f"prediction shape {y_hat.shape} != gold shape {y.shape}")
    if np.any(y_hat <= 0.0) or np.any(y_hat >= 1.0):
        raise DomainError("scores must lie strictly inside (0, 1)")
    q = np.clip(y_hat, CLAMP, 1.0 - CLAMP)
    return float(-np.sum(y * np.log(q) + (1.0 - y) * np.log1p(-q)))


def bce_with_logits(logits, y) -> float:
    """Same loss as :func:`bce_loss` evaluated from the logits (no clamping)."""
    z = np.asarray(logits, dtype=np.float64)
    return float(np.sum(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def predict_types(scores, threshold: float = 0.5, top1_fallback: bool = True):
    """Decision rule: every type scoring >= threshold, else (optionally) the argmax.

    A 1-d score vector yields a set of type indices; a 2-d batch yields a
    boolean matrix.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    s = np.asarray(scores, dtype=np.float64)
    single = s.ndim == 1
    s2 = s[None, :] if single else s
    pred = s2 >= threshold
    if top1_fallback:
        empty = ~pred.any(axis=1)
        pred[empty, s2[empty].argmax(axis=1)] = True
    if single:
        return set(np.flatnonzero(pred[0]).tolist())
    return pred


@dataclass
class MultiviewModel:
    config: ModelConfig
    fusion: F.FusionParams
    head: HeadParams
    meta: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "MultiviewModel":
        rng = make_rng(seed)
        fp = F.init_fusion(config.fusion, [v.dim for v in config.views], config.d, rng, config.bias)
        head = HeadParams(
            Wh=glorot(rng, config.h, config.d),
            Wo=glorot(rng, config.n_types, config.h),
            slope=config.slope,
            bh=np.zeros(config.h) if config.bias else None,
            bo=np.zeros(config.n_types) if config.bias else None,
        )
        return cls(config, fp, head)

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        return self.fusion.named() + self.head.named()

    def param_count(self) -> int:
        return sum(a.size for _, a in self.named_params())

    def active_param_count(self, view) -> int:
        """Parameters used when only ``view`` is available at inference."""
        j = self.view_position(view)
        n = self.fusion.view_param_count(j) + self.head.size
        if self.config.fusion == "con" and self.fusion.b1 is not None:
            n += self.fusion.b1.size
        # the gate vector has no effect when a single view is present
        return n

    def view_position(self, view) -> int:
        key = view.key if isinstance(view, ViewSpec) else view
        for j, v in enumerate(self.config.views):
            if v.key == key:
                return j
        raise KeyError(key)

    def copy(self) -> "MultiviewModel":
        fp = self.fusion
        fcopy = F.FusionParams(
            fp.mode,
            W1=None if fp.W1 is None else fp.W1.copy(),
            b1=None if fp.b1 is None else fp.b1.copy(),
            Ws=[W.copy() for W in fp.Ws],
            bs=None if fp.bs is None else [b.copy() for b in fp.bs],
            a=None if fp.a is None else fp.a.copy(),
            con_dims=fp.con_dims,
        )
        h = self.head
        hcopy = HeadParams(h.Wh.copy(), h.Wo.copy(), h.slope,
                           None if h.bh is None else h.bh.copy(), None if h.bo is None else h.bo.copy())
        return MultiviewModel(self.config, fcopy, hcopy, dict(self.meta))

    # ---------------------------------------------------------------- passes

    def scores(self, views, mask) -> np.ndarray:
        """Type scores; rows with no available view get NaN (no prediction)."""
        mask = np.asarray(mask, dtype=bool)
        has = mask.any(axis=1)
        out = np.full((mask.shape[0], self.config.n_types), np.nan)
        if has.any():
            rows = np.flatnonzero(has)
            trace = F.fuse([np.asarray(v)[rows] for v in views], mask[rows], self.fusion)
            out[rows] = head_forward(trace.p, self.head)
        return out

    def predict(self, views, mask, threshold=0.5, top1_fallback=True) -> np.ndarray:
        """Boolean type predictions; entities without any available view predict nothing."""
        s = self.scores(views, mask)
        has = ~np.isnan(s[:, 0])
        pred = np.zeros(s.shape, dtype=bool)
        if has.any():
            pred[has] = predict_types(s[has], threshold, top1_fallback)
        return pred

    def forward_backward(self, views, mask, Y, dp_scale: float = 1.0):
        """Summed BCE loss over the batch and gradients for every named parameter.

        Also returns the gradients with respect to the input views.
        """
        trace = F.fuse(views, mask, self.fusion)
        p = trace.p
        Y = np.asarray(Y, dtype=np.float64)
        if trace.single:
            Y = Y[None, :]
        zh, hid, logits = _head_pre(p, self.head)
        loss = bce_with_logits(logits, Y)
        dlogits = (sigmoid_v(logits) - Y) * dp_scale
        grads = {"Wo": dlogits.T @ hid}
        if self.head.bo is not None:
            grads["bo"] = dlogits.sum(axis=0)
        dzh = (dlogits @ self.head.Wo) * np.where(zh >= 0, 1.0, self.head.slope)
        grads["Wh"] = dzh.T @ p
        if self.head.bh is not None:
            grads["bh"] = dzh.sum(axis=0)
        dp = dzh @ self.head.Wh
        if trace.single:
            dp = dp[0]
        fgrads, dviews = F.fuse_backward(trace, views, mask, self.fusion, dp)
        grads.update(fgrads)
        ordered = {name: grads[name] for name, _ in self.named_params()}
        return loss, ordered, dviews


def model_forward_backward(model: MultiviewModel, record):
    """Loss and gradients for one :class:`~mvet.dataset.EntityRecord`."""
    vecs, mask = [], []
    for spec in model.config.views:
        v = record.views.get(spec.key)
        mask.append(v is not None)
        vecs.append(np.zeros(spec.dim) if v is None else np.asarray(v, dtype=np.float64))
    y = np.zeros(model.config.n_types)
    y[sorted(record.types)] = 1.0
    return model.forward_backward(vecs, np.array(mask), y)


# ------------------------------------------------------------------ checkpoints

MAGIC = b"MVETCKPT 1\n"


def save_checkpoint(model: MultiviewModel, path) -> None:
    """Header line with the config and block layout, then raw little-endian float64 blocks."""
    blocks = model.named_params()
    header = {
        "config": model.config.to_dict(),
        "blocks": [[name, list(arr.shape)] for name, arr in blocks],
        "meta": model.meta,
    }
    body = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(body)))
        fh.write(body)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> MultiviewModel:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise SpecMismatch(f"{path} is not a model checkpoint")
        (n,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(n).decode("utf-8"))
        payload = fh.read()
    config = ModelConfig.from_dict(header["config"])
    model = MultiviewModel.init(config, seed=0)
    expected = [[name, list(arr.shape)] for name, arr in model.named_params()]
    if header["blocks"] != expected:
        raise SpecMismatch("checkpoint parameter blocks do not match its config")
    offset = 0
    for _, arr in model.named_params():
        nbytes = arr.size * 8
        chunk = payload[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise SpecMismatch("checkpoint is truncated")
        arr[...] = np.frombuffer(chunk, dtype="<f8").reshape(arr.shape)
        offset += nbytes
    if offset != len(payload):
        raise SpecMismatch("trailing bytes after the last parameter block")
    model.meta = header.get("meta", {})
    return model
