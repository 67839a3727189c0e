"""Command-line entry point: ``deformtime <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import numerics as nx
from .dataprep import DataError, SyntheticSpec, generate_synthetic, save_csv
from .evaluation import evaluate, relative_reduction, write_metrics
from .model import DeformTime, ModelConfig, load_checkpoint, measured_op_count, predicted_op_count
from .model.checkpoint import CheckpointError
from .model.config import ConfigError
from .pipeline import DataConfig, load_dataset, prepare
from .training import ABLATIONS, TrainConfig, TrainingError, ablate, grid_search, split_overrides, train

log = logging.getLogger("deformtime")

SECTIONS = {"data": DataConfig, "model": ModelConfig, "train": TrainConfig}
SHAPE_KEYS = ("L", "H", "delta", "C")


@dataclass
class RunConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    checkpoint_dir: str = "runs/checkpoints"
    report_dir: str = "runs/reports"

    def to_dict(self) -> dict:
        return {"seed": self.seed, "data": self.data.to_dict(), "model": self.model.to_dict(),
                "train": self.train.to_dict(), "checkpoint_dir": self.checkpoint_dir,
                "report_dir": self.report_dir}

    def seeds(self) -> tuple[int, int]:
        """(model init seed, batch-order seed) derived from the root seed."""
        a, b = np.random.SeedSequence(self.seed).generate_state(2)
        return int(a), int(b)


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _resolve_key(key: str, raw: dict) -> tuple[str | None, str]:
    if "." in key:
        sec, name = key.split(".", 1)
        if sec not in SECTIONS:
            raise ConfigError(f"unknown config section {sec!r} in override --{key}")
        return sec, name
    if key in ("seed", "checkpoint_dir", "report_dir"):
        return None, key
    owners = [s for s, cls in SECTIONS.items() if key in {f.name for f in dataclasses.fields(cls)}]
    if len(owners) != 1:
        raise ConfigError(f"override --{key} is {'ambiguous' if owners else 'unknown'}; use section.key")
    return owners[0], key


def build_run_config(path: str | None, overrides: list[str]) -> RunConfig:
    raw: dict = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    known = {"seed", "data", "model", "train", "checkpoint_dir", "report_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"override {item!r} must look like --key=value")
        key, val = item[2:].split("=", 1)
        sec, name = _resolve_key(key, raw)
        if sec is None:
            raw[name] = _parse_value(val)
        else:
            raw.setdefault(sec, {})[name] = _parse_value(val)
    sections = {}
    for sec, cls in SECTIONS.items():
        body = raw.get(sec, {})
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(body) - names
        if bad:
            raise ConfigError(f"unknown {sec} keys: {sorted(bad)}")
        try:
            sections[sec] = cls(**body)
        except TypeError as exc:
            raise ConfigError(f"bad {sec} section: {exc}") from exc
    cfg = RunConfig(seed=int(raw.get("seed", 0)), checkpoint_dir=raw.get("checkpoint_dir", "runs/checkpoints"),
                    report_dir=raw.get("report_dir", "runs/reports"), **sections)
    if cfg.data.csv is not None and not Path(cfg.data.csv).is_file():
        raise ConfigError(f"data file {cfg.data.csv} does not exist")
    return cfg


def _prepared(cfg: RunConfig, mcfg: ModelConfig | None = None):
    mcfg = mcfg or cfg.model
    ds = load_dataset(cfg.data)
    if ds.C != mcfg.C and cfg.data.tau is None:
        raise ConfigError(f"data has {ds.C} exogenous columns but model.C={mcfg.C}")
    prep = prepare(ds, cfg.data, mcfg.L, mcfg.H, mcfg.delta)
    if prep.ds.C != mcfg.C:
        raise ConfigError(f"feature selection kept {prep.ds.C} columns; set model.C={prep.ds.C}")
    return prep


def _dirs(cfg: RunConfig) -> tuple[Path, Path]:
    ck, rp = Path(cfg.checkpoint_dir), Path(cfg.report_dir)
    ck.mkdir(parents=True, exist_ok=True)
    rp.mkdir(parents=True, exist_ok=True)
    return ck, rp


def _fit(cfg: RunConfig, name: str, mcfg: ModelConfig) -> dict:
    ck, rp = _dirs(cfg)
    prep = _prepared(cfg, mcfg)
    model_seed, order_seed = cfg.seeds()
    tcfg = dataclasses.replace(cfg.train, seed=order_seed)
    Z, Y, _ = prep.arrays("train")
    Zv, Yv, _ = prep.arrays("val")
    log_path = rp / f"{name}_log.jsonl"
    log_path.unlink(missing_ok=True)
    search = None
    if tcfg.grid:
        res = grid_search(tcfg.grid, (Z, Y), (Zv, Yv), mcfg, dataclasses.replace(tcfg, grid={}),
                          model_seed=model_seed, log_path=log_path)
        mo, to = split_overrides(res.best_point)
        if "alpha" in mo and "k" not in mo:
            mo["k"] = None
        mcfg = ModelConfig.from_dict({**mcfg.to_dict(), **mo})
        tcfg = dataclasses.replace(tcfg, **to)
        search = {"best_point": res.best_point,
                  "trials": [{"point": p, "best_val_loss": r.best_val_loss} for p, r in res.trials]}
    model = DeformTime(mcfg, seed=model_seed)
    rep = train(model, (Z, Y), (Zv, Yv), dataclasses.replace(tcfg, grid={}), log_path=log_path,
                trial_id=name, checkpoint_path=ck / f"{name}.ckpt")
    val = evaluate(model, prep.val, prep.ds, split="validation")
    summary = {"command": name, "checkpoint": str(ck / f"{name}.ckpt"), "checkpoint_id": rep.checkpoint_id,
               "best_epoch": rep.best_epoch, "best_val_loss": rep.best_val_loss, "stop_reason": rep.stop_reason,
               "epochs_run": len(rep.val_losses), "validation_metrics_at_horizon": val.metrics_at_horizon,
               "feature_order": prep.order, "grid_search": search, "config": cfg.to_dict(),
               "resolved_model": mcfg.to_dict()}
    (rp / f"{name}_report.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


# ---------------------------------------------------------------- commands

def cmd_gen_synth(args) -> int:
    try:
        spec_raw = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read spec {args.spec}: {exc}") from exc
    names = {f.name for f in dataclasses.fields(SyntheticSpec)}
    bad = set(spec_raw) - names
    if bad:
        raise ConfigError(f"unknown synthetic spec keys: {sorted(bad)}")
    spec = SyntheticSpec(**spec_raw)
    ds = generate_synthetic(spec)
    out = Path(args.out)
    if not out.parent.exists():
        raise ConfigError(f"output directory {out.parent} does not exist")
    save_csv(ds, out, comment="synthetic spec: " + json.dumps(dataclasses.asdict(spec), sort_keys=True))
    print(f"wrote {ds.T} rows x {ds.C + 1} series to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = build_run_config(args.config, args.overrides)
    s = _fit(cfg, "train", cfg.model)
    print(json.dumps({k: s[k] for k in ("checkpoint", "checkpoint_id", "best_epoch", "best_val_loss",
                                        "stop_reason", "validation_metrics_at_horizon")}, indent=2, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg = build_run_config(args.config, args.overrides)
    if args.variant not in ABLATIONS:
        raise ConfigError(f"unknown ablation variant {args.variant!r}; choose from {sorted(ABLATIONS)}")
    s = _fit(cfg, args.variant, ablate(args.variant, cfg.model).config)
    print(json.dumps({k: s[k] for k in ("checkpoint", "checkpoint_id", "best_epoch", "best_val_loss",
                                        "stop_reason", "validation_metrics_at_horizon")}, indent=2, sort_keys=True))
    return 0


def _load_for_eval(args):
    cfg = build_run_config(args.config, args.overrides)
    try:
        mcfg, params, meta = load_checkpoint(args.checkpoint)
    except (OSError, CheckpointError) as exc:
        raise ConfigError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    diff = {k: (getattr(cfg.model, k), getattr(mcfg, k)) for k in SHAPE_KEYS if getattr(cfg.model, k) != getattr(mcfg, k)}
    if diff:
        lines = ", ".join(f"{k}: config={a} checkpoint={b}" for k, (a, b) in diff.items())
        raise ConfigError(f"checkpoint does not match config ({lines})")
    model = DeformTime(mcfg, params=params)
    prep = _prepared(cfg, mcfg)
    split = {"test": prep.test, "validation": prep.val, "train": prep.train}[args.split]
    return cfg, model, prep, split


def cmd_eval(args) -> int:
    cfg, model, prep, samples = _load_for_eval(args)
    _, rp = _dirs(cfg)
    rep = evaluate(model, samples, prep.ds, mode=args.mode, split=args.split)
    extra = {"mode": args.mode, "metrics": rep.metrics(args.mode), "checkpoint": str(args.checkpoint)}
    if args.baseline == "persistence":
        base = evaluate("persistence", samples, prep.ds, mode=args.mode, split=args.split)
        bm = base.metrics(args.mode)
        extra["baseline"] = {"name": "persistence", "metrics": bm,
                             "mae_reduction": relative_reduction(rep.metrics(args.mode)["mae"], bm["mae"])}
    out = write_metrics(rp / f"metrics_{args.split}_{args.mode}.json", rep, cfg.to_dict(), extra)
    rep.write_csv(rp / f"forecasts_{args.split}.csv")
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_forecast(args) -> int:
    cfg, model, prep, samples = _load_for_eval(args)
    rep = evaluate(model, samples, prep.ds, split=args.split)
    out = Path(args.out) if args.out else _dirs(cfg)[1] / f"forecasts_{args.split}.csv"
    rep.write_csv(out)
    print(f"wrote {len(rep.anchors)} x {rep.horizon} forecasts to {out}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = build_run_config(args.config, args.overrides)
    mcfg = dataclasses.replace(cfg.model, drop_rate=0.0)
    model_seed, _ = cfg.seeds()
    model = DeformTime(mcfg, seed=model_seed, zero_offset_heads=False)
    rng = np.random.default_rng(cfg.seed)
    Z = rng.normal(size=(mcfg.L, mcfg.n_vars))
    y = rng.normal(size=mcfg.H)
    params = list(model.params.values())

    def loss(_):
        return nx.mean((model(Z) - y) ** 2)

    stats: dict = {}
    worst = nx.grad_check(loss, params, max_coords=args.coords, rng=np.random.default_rng(cfg.seed),
                          exclude_kinks=True, stats=stats)
    worst = float(worst)
    ok = bool(worst < args.threshold)
    print(json.dumps({"worst_relative_error": worst, "threshold": args.threshold, "passed": ok,
                      "probes": stats["probed"], "skipped_at_kinks": stats["skipped"],
                      "n_parameters": model.params.n_values(), "config": cfg.to_dict()}, indent=2, sort_keys=True))
    return 0 if ok else 1


def cmd_opcount(args) -> int:
    cfg = build_run_config(args.config, args.overrides)
    model = DeformTime(cfg.model, seed=cfg.seeds()[0])
    pred = predicted_op_count(cfg.model)
    meas = measured_op_count(model)
    print(json.dumps({"predicted": pred, "measured": meas, "ratio": meas / pred,
                      "config": cfg.to_dict()}, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deformtime", description="Train and evaluate DeformTime forecasters.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic leading-indicator dataset")
    p.add_argument("spec", help="JSON file with SyntheticSpec fields")
    p.add_argument("out", help="output CSV path")
    p.set_defaults(func=cmd_gen_synth)

    def with_config(p):
        p.add_argument("config", nargs="?", help="run config JSON (defaults apply when omitted)")
        return p

    p = with_config(sub.add_parser("train", help="train (with optional grid search) and save a checkpoint"))
    p.set_defaults(func=cmd_train)

    for name, fn in (("eval", cmd_eval), ("forecast", cmd_forecast)):
        p = sub.add_parser(name, help="score a checkpoint" if name == "eval" else "export forecasts as CSV")
        p.add_argument("checkpoint")
        p.add_argument("config", nargs="?")
        p.add_argument("--split", choices=["test", "validation", "train"], default="test")
        if name == "eval":
            p.add_argument("--mode", choices=["at_horizon", "over_sequence"], default="at_horizon")
            p.add_argument("--baseline", choices=["persistence"], default=None)
        else:
            p.add_argument("--out", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("ablate", help="train one ablation variant")
    p.add_argument("variant", help=f"one of {', '.join(sorted(ABLATIONS))}")
    p.add_argument("config", nargs="?")
    p.set_defaults(func=cmd_ablate)

    p = with_config(sub.add_parser("gradcheck", help="finite-difference check of the full model gradient"))
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--coords", type=int, default=5, help="sampled coordinates per parameter tensor")
    p.set_defaults(func=cmd_gradcheck)

    p = with_config(sub.add_parser("opcount", help="closed-form vs instrumented multiply count"))
    p.set_defaults(func=cmd_opcount)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # --key=value overrides are collected before argparse sees the rest
    known_flags = {"--split", "--mode", "--baseline", "--out", "--threshold", "--coords", "--verbose"}
    overrides = [a for a in argv if a.startswith("--") and "=" in a and a.split("=", 1)[0] not in known_flags]
    rest = [a for a in argv if a not in overrides]
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    args.overrides = overrides
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TrainingError, nx.NonFiniteError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
