"""Command-line front end: ``mvet {gen,build-views,train,eval,table1,table2}``.

Every setting lives in one flat :class:`RunConfig`.  Values come from the
field defaults, then ``--config <file>`` (``key=value`` lines, ``#``
comments), then command-line flags.  The effective configuration is written
to ``<out>/config.txt`` and can be fed back through ``--config``.

Exit codes: 0 success, 2 configuration or validation error, 3 runtime or
data error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path


from .dataset import (GenConfig, LanguageProfile, Representation, SplitSpec, ViewSpec, generate,
                      parse_view_key, read_dataset, split_dataset, write_dataset)
from .errors import ConfigInvalid, MvetError
from .eval import CSV_COLUMNS, EvalReport, bucketed_eval
from .experiments import ModelDefaults, run_table1, run_table2
from .fusion import MODES
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .profiles import profile
from .trainer import TrainConfig, train_cross, train_multiview, train_single
from .views import SgnsConfig, assemble_views, load_language_sources, read_skeleton

log = logging.getLogger("mvet")

REGIMES = ("multiview", "single", "cross")


@dataclass
class RunConfig:
    out: str = "out"
    data: str = "data"
    seed: int = 0
    # gen
    profile: str = "default"
    entities: int = 5000
    types: int = 20
    languages: str = ""
    availability: str = ""
    noise: str = ""
    ctxt_dim: int = 32
    name_dim: int = 24
    desc_dim: int = 28
    latent_dim: int = 16
    max_types: int = 3
    ambiguity: float = 0.1
    zipf: float = 1.5
    train_frac: float = 0.5
    dev_frac: float = 0.2
    test_frac: float = 0.3
    # build-views
    sources: str = ""
    skeleton: str = ""
    sgns_dim: int = 200
    sgns_window: int = 5
    sgns_negatives: int = 5
    sgns_lr: float = 0.025
    sgns_epochs: int = 5
    sgns_subsample: float = 1e-3
    keywords: int = 20
    oov: str = "hash"
    name_reduce: str = "mean"
    # model and training
    views: str = "all"
    fusion: str = "att"
    regime: str = "multiview"
    d: int = 300
    h: int = 400
    slope: float = 0.01
    bias: bool = False
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 128
    epochs: int = 100
    patience: int = 5
    threshold: float = 0.5
    fallback: bool = True
    # eval and tables
    checkpoint: str = ""
    dataset: str = ""
    label: str = ""
    replicates: int = 1
    core: int = 4

    def echo(self) -> str:
        lines = [f"{f.name}={_show(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


FIELDS = {f.name: f for f in fields(RunConfig)}


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(key: str, text: str):
    kind = FIELDS[key].type
    text = text.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigInvalid(key, f"cannot read {text!r} as {kind}") from None
    return text


def read_config_file(path) -> dict:
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise ConfigInvalid("config", f"cannot open {path}: {e.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep:
                raise ConfigInvalid("config", f"{path}:{lineno}: expected key=value")
            if key not in FIELDS:
                raise ConfigInvalid(key, f"unknown key ({path}:{lineno})")
            out[key] = _coerce(key, value)
    return out


def resolve_config(config_file, overrides: dict) -> RunConfig:
    values = read_config_file(config_file) if config_file else {}
    for key, text in overrides.items():
        values[key] = _coerce(key, text)
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.fusion not in MODES:
        raise ConfigInvalid("fusion", f"unknown mode {cfg.fusion!r}; expected one of {', '.join(MODES)}")
    if cfg.regime not in REGIMES:
        raise ConfigInvalid("regime", f"expected one of {', '.join(REGIMES)}")
    if not 0.0 <= cfg.ambiguity <= 1.0:
        raise ConfigInvalid("ambiguity", "must lie in [0, 1]")
    if not 0.0 < cfg.threshold < 1.0:
        raise ConfigInvalid("threshold", "must lie in (0, 1)")
    for key in ("entities", "types", "d", "h", "batch", "epochs", "patience", "replicates", "keywords",
                "ctxt_dim", "name_dim", "desc_dim", "latent_dim", "max_types", "core"):
        if getattr(cfg, key) < 1:
            raise ConfigInvalid(key, "must be at least 1")
    for key in ("lr", "eps", "sgns_lr"):
        if getattr(cfg, key) <= 0:
            raise ConfigInvalid(key, "must be positive")
    for key in ("beta1", "beta2"):
        if not 0.0 <= getattr(cfg, key) < 1.0:
            raise ConfigInvalid(key, "must lie in [0, 1)")
    if not 0.0 < cfg.slope < 1.0:
        raise ConfigInvalid("slope", "must lie in (0, 1)")
    if cfg.oov not in ("hash", "zero"):
        raise ConfigInvalid("oov", "expected hash or zero")
    if cfg.name_reduce not in ("mean", "sum"):
        raise ConfigInvalid("name_reduce", "expected mean or sum")


# ----------------------------------------------------------------- builders

def _floats(key, text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigInvalid(key, f"expected comma-separated numbers, got {text!r}") from None


def gen_config(cfg: RunConfig) -> GenConfig:
    try:
        base = profile(cfg.profile, cfg.seed)
    except KeyError as e:
        raise ConfigInvalid("profile", e.args[0]) from None
    names = [x.strip() for x in cfg.languages.split(",")] if cfg.languages else [l.name for l in base.languages]
    avail = _floats("availability", cfg.availability) if cfg.availability else [l.availability for l in base.languages]
    noise = _floats("noise", cfg.noise) if cfg.noise else [l.noise for l in base.languages]
    for key, vals in (("availability", avail), ("noise", noise)):
        if len(vals) != len(names):
            raise ConfigInvalid(key, f"{len(vals)} values for {len(names)} languages")
    for a in avail:
        if not 0.0 <= a <= 1.0:
            raise ConfigInvalid("availability", f"probability {a} outside [0, 1]")
    if any(s < 0 for s in noise):
        raise ConfigInvalid("noise", "must be non-negative")
    langs = tuple(LanguageProfile(n, a, s) for n, a, s in zip(names, avail, noise))
    dims = {Representation.CTXT: cfg.ctxt_dim, Representation.NAME: cfg.name_dim,
            Representation.DESC: cfg.desc_dim}
    gc = replace(base, n_entities=cfg.entities, n_types=cfg.types, languages=langs, dims=dims,
                 latent_dim=cfg.latent_dim, max_types=cfg.max_types, ambiguity=cfg.ambiguity,
                 zipf=cfg.zipf)
    gc.validate()
    return gc


def split_spec(cfg: RunConfig) -> SplitSpec:
    try:
        return SplitSpec(cfg.train_frac, cfg.dev_frac, cfg.test_frac)
    except ValueError as e:
        raise ConfigInvalid("train_frac", str(e)) from None


def select_views(cfg: RunConfig, available) -> tuple[ViewSpec, ...]:
    available = tuple(available)
    if cfg.views.strip().lower() == "all":
        return available
    by_key = {v.key: v for v in available}
    out = []
    for item in cfg.views.split(","):
        try:
            key = parse_view_key(item)
        except ValueError as e:
            raise ConfigInvalid("views", str(e)) from None
        if key not in by_key:
            raise ConfigInvalid("views", f"{item.strip()} is not a view of the dataset")
        if by_key[key] in out:
            raise ConfigInvalid("views", f"{item.strip()} listed twice")
        out.append(by_key[key])
    return tuple(out)


def model_defaults(cfg: RunConfig) -> ModelDefaults:
    return ModelDefaults(d=cfg.d, h=cfg.h, slope=cfg.slope, bias=cfg.bias)


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps, batch=cfg.batch,
                       epochs=cfg.epochs, patience=cfg.patience, seed=cfg.seed,
                       threshold=cfg.threshold, fallback=cfg.fallback)


def _load_splits(cfg: RunConfig, names):
    root = Path(cfg.data)
    out = []
    for n in names:
        p = root / f"{n}.mvet"
        if not p.is_file():
            raise FileNotFoundError(f"dataset file {p} not found (run `mvet gen` first?)")
        out.append(read_dataset(p))
    return out


def _prepare_out(cfg: RunConfig, echo: str = "config.txt") -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / echo).write_text(cfg.echo(), encoding="utf-8")
    return out


# ----------------------------------------------------------------- commands

def cmd_gen(cfg: RunConfig) -> int:
    gc = gen_config(cfg)
    spec = split_spec(cfg)
    ds = generate(gc)
    out = _prepare_out(cfg)
    for name, part in zip(("train", "dev", "test"), split_dataset(ds, spec, seed=cfg.seed)):
        write_dataset(part, out / f"{name}.mvet")
    print(f"wrote {len(ds)} entities, {len(ds.views)} views to {out}")
    return 0


def cmd_build_views(cfg: RunConfig) -> int:
    if not cfg.sources:
        raise ConfigInvalid("sources", "a source directory is required")
    root = Path(cfg.sources)
    skeleton = read_skeleton(Path(cfg.skeleton) if cfg.skeleton else root / "skeleton.tsv")
    if cfg.views.strip().lower() == "all":
        suffix = {Representation.CTXT: "corpus.txt", Representation.NAME: "titles.tsv",
                  Representation.DESC: "desc.tsv"}
        langs = sorted({p.name.split(".", 1)[0] for p in root.iterdir()
                        if any(p.name.endswith("." + s) for s in suffix.values())})
        keys = [(l, r) for r in suffix for l in langs if (root / f"{l}.{suffix[r]}").is_file()]
    else:
        try:
            keys = [parse_view_key(x) for x in cfg.views.split(",")]
        except ValueError as e:
            raise ConfigInvalid("views", str(e)) from None
    if not keys:
        raise ConfigInvalid("views", f"no view sources found under {root}")
    need = {}
    for lang, rep in keys:
        need.setdefault(lang, set()).add(rep)
    sources = {lang: load_language_sources(root, lang, reps) for lang, reps in need.items()}
    sgns = SgnsConfig(dim=cfg.sgns_dim, window=cfg.sgns_window, negatives=cfg.sgns_negatives,
                      lr=cfg.sgns_lr, epochs=cfg.sgns_epochs, subsample=cfg.sgns_subsample, seed=cfg.seed)
    ds = assemble_views(skeleton, keys, sources, sgns, k=cfg.keywords, oov=cfg.oov,
                        name_reduce=cfg.name_reduce)
    out = _prepare_out(cfg)
    write_dataset(ds, out / "dataset.mvet")
    for label, n in ds.availability_counts().items():
        print(f"{label}\t{n}/{len(ds)}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    train, dev = _load_splits(cfg, ("train", "dev"))
    views = select_views(cfg, train.views)
    mcfg = ModelConfig(views=views, n_types=len(train.vocab), fusion=cfg.fusion, d=cfg.d, h=cfg.h,
                       slope=cfg.slope, bias=cfg.bias)
    tcfg = train_config(cfg)
    if cfg.regime == "single":
        if len(views) != 1:
            raise ConfigInvalid("views", "the single regime takes exactly one view")
        model, hist = train_single(train, dev, views[0], mcfg, tcfg)
    elif cfg.regime == "cross":
        model, hist = train_cross(train, dev, mcfg, tcfg)
    else:
        model, hist = train_multiview(train, dev, mcfg, tcfg)
    out = _prepare_out(cfg)
    save_checkpoint(model, out / "model.ckpt")
    (out / "history.csv").write_text(hist.to_csv(), encoding="utf-8")
    print(f"best epoch {hist.best_epoch} of {hist.epochs[-1]}, dev micro-F1 {model.meta['best_dev_f1']:.4f}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else Path(cfg.out) / "model.ckpt"
    if not ckpt.is_file():
        raise FileNotFoundError(f"checkpoint {ckpt} not found")
    model = load_checkpoint(ckpt)
    data = read_dataset(cfg.dataset) if cfg.dataset else _load_splits(cfg, ("test",))[0]
    label = cfg.label or ckpt.parent.name
    row = bucketed_eval(model, data, label, cfg.threshold, cfg.fallback)
    # eval usually targets a training run's directory; keep that run's echo intact
    out = _prepare_out(cfg, "eval_config.txt")
    report = EvalReport([row])
    ledger = out / "ledger.csv"
    body = report.to_csv().split("\n", 1)[1]
    if not ledger.exists():
        body = ",".join(CSV_COLUMNS) + "\n" + body
    with open(ledger, "a", encoding="utf-8") as fh:
        fh.write(body)
    print(report.to_text(), end="")
    return 0


def _progress(label, r, row):
    msg = f"{label} [{r}]" + ("" if row is None or row.all is None else f" {100 * row.all:.1f}")
    print(msg, file=sys.stderr, flush=True)


def cmd_table1(cfg: RunConfig) -> int:
    train, dev, test = _load_splits(cfg, ("train", "dev", "test"))
    res = run_table1(train, dev, test, model_defaults(cfg), train_config(cfg), master_seed=cfg.seed,
                     seeds=cfg.replicates, core=cfg.core, progress=_progress)
    out = _prepare_out(cfg)
    (out / "table1.txt").write_text(res.report.to_text(), encoding="utf-8")
    (out / "table1.csv").write_text(res.report.to_csv(), encoding="utf-8")
    (out / "table1_runs.csv").write_text(res.runs_csv(), encoding="utf-8")
    print(res.report.to_text(), end="")
    return 0


def cmd_table2(cfg: RunConfig) -> int:
    train, dev, test = _load_splits(cfg, ("train", "dev", "test"))
    views = select_views(cfg, train.views)
    res = run_table2(train, dev, test, model_defaults(cfg), train_config(cfg), master_seed=cfg.seed,
                     seeds=cfg.replicates, views=views, progress=_progress)
    out = _prepare_out(cfg)
    (out / "table2.txt").write_text(res.to_text(), encoding="utf-8")
    (out / "table2.csv").write_text(res.to_csv(), encoding="utf-8")
    (out / "table2_runs.csv").write_text(res.runs_csv(), encoding="utf-8")
    print(res.to_text(), end="")
    return 0


COMMANDS = {
    "gen": (cmd_gen, "generate a synthetic dataset and its train/dev/test split"),
    "build-views": (cmd_build_views, "assemble CTXT/NAME/DESC views from raw sources"),
    "train": (cmd_train, "train one model and write a checkpoint and history"),
    "eval": (cmd_eval, "score a checkpoint and append the row to the run ledger"),
    "table1": (cmd_table1, "singleview rows and the four fusions per representation block"),
    "table2": (cmd_table2, "SINGLE against CROSS, view by view"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags override it")
    for f in fields(RunConfig):
        kw = {"dest": f.name, "default": argparse.SUPPRESS, "metavar": f.name.upper()}
        if f.name == "fusion":
            kw["choices"] = MODES
            del kw["metavar"]
        elif f.name == "regime":
            kw["choices"] = REGIMES
            del kw["metavar"]
        flag = "--" + f.name.replace("_", "-")
        common.add_argument(flag, help=f"(default {_show(f.default)})", **kw)
    parser = argparse.ArgumentParser(prog="mvet", description="Multiview entity typing experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_file = args.pop("config", None)
    try:
        cfg = resolve_config(config_file, args)
    except ConfigInvalid as e:
        print(f"mvet: config error: {e}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[command][0](cfg)
    except ConfigInvalid as e:
        print(f"mvet: config error: {e}", file=sys.stderr)
        return 2
    except (MvetError, OSError, ValueError) as e:
        print(f"mvet: error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
