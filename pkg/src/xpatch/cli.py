"""Command-line surface: decompose, train, eval, forecast, adf, plot.

Option precedence is flags over config file over environment over
defaults; the resolved configuration is echoed as comment lines into
every artifact this tool writes. Exit codes: 0 success, 2 usage error,
3 data error, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adf import chunked_adf
from .datasets import (
    PRESET_FILES,
    PRESETS,
    RawDataset,
    Scaler,
    load_csv,
    ratio_split_spec,
    split,
    split_spec_for,
)
from .decompose import ema_closed_form, sma
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    ParameterError,
    XPatchError,
)
from .evaluation import evaluate, forecast
from .losses import LOSS_KINDS, LossSpec
from .model import FLOWS, XPatchModel, checkpoint_hash, load_checkpoint, save_checkpoint
from .plotting import line_chart
from .schedules import SCHEDULE_KINDS, SchedulerSpec
from .training import TrainConfig, fit, history_to_csv

USAGE_EXIT, DATA_EXIT, NUMERIC_EXIT = 2, 3, 4

# Train-command schema: config-file key -> (flag, type, default, help).
# The CLI flags, the config-file keys, and TrainConfig are kept in sync
# through this single table (cross-checked by the test suite).
TRAIN_SCHEMA: dict[str, tuple[str, type, object, str]] = {
    "lookback": ("--lookback", int, None, "input window length L (divisible by 4)"),
    "horizon": ("--horizon", int, None, "prediction length T"),
    "alpha": ("--alpha", float, 0.3, "EMA smoothing factor in (0, 1)"),
    "patch_len": ("--patch-len", int, 16, "patch length P"),
    "stride": ("--stride", int, 8, "patch stride S"),
    "batch_size": ("--batch-size", int, 32, "training batch size (windows)"),
    "epochs": ("--epochs", int, 100, "maximum training epochs"),
    "seed": ("--seed", int, 0, "global RNG seed (overrides XPATCH_SEED)"),
    "patience": ("--patience", int, 10, "early-stop epochs without val improvement"),
    "flow": ("--flow", str, "dual", f"stream routing, one of {FLOWS}"),
    "loss": ("--loss", str, "arctan", f"training loss, one of {LOSS_KINDS[:4]}"),
    "loss_m": ("--loss-m", float, 1.0, "arctangent loss scaling parameter m"),
    "scheduler": ("--scheduler", str, "sigmoid", f"LR schedule, one of {SCHEDULE_KINDS}"),
    "lr": ("--lr", float, 1e-4, "initial learning rate alpha0"),
    "k": ("--k", float, 0.5, "sigmoid schedule logistic growth rate"),
    "s": ("--s", float, 10.0, "sigmoid schedule smoothing rate"),
    "w": ("--w", float, 10.0, "schedule warm-up coefficient"),
}


def read_config_file(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; '#' starts a comment line."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_train_options(args: argparse.Namespace) -> dict:
    """Apply precedence flags > config file > environment > defaults."""
    file_cfg = read_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - set(TRAIN_SCHEMA) - {"dataset", "data_dir"}
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    resolved: dict = {}
    for key, (_, typ, default, _) in TRAIN_SCHEMA.items():
        value = getattr(args, key, None)
        if value is None and key in file_cfg:
            value = typ(file_cfg[key])
        if value is None and key == "seed" and "XPATCH_SEED" in os.environ:
            value = int(os.environ["XPATCH_SEED"])
        if value is None:
            value = default
        resolved[key] = value
    resolved["dataset"] = args.dataset or file_cfg.get("dataset")
    if not resolved["dataset"]:
        raise ParameterError("a dataset name or CSV path is required")
    resolved["data_dir"] = args.data_dir or file_cfg.get("data_dir") or "data"
    return resolved


def config_lines(resolved: dict) -> list[str]:
    return [f"{key}={resolved[key]}" for key in sorted(resolved)]


def config_hash(resolved: dict) -> str:
    return hashlib.sha256("\n".join(config_lines(resolved)).encode()).hexdigest()


def provenance_header(resolved: dict, extra: dict | None = None) -> str:
    lines = [f"# xpatch {__version__}"]
    lines += [f"# {line}" for line in config_lines(resolved)]
    lines.append(f"# config_sha256={config_hash(resolved)}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key}={value}")
    return "\n".join(lines) + "\n"


def load_dataset(resolved: dict) -> tuple[RawDataset, str]:
    """Resolve a preset name or CSV path to a loaded dataset."""
    name = str(resolved["dataset"]).lower()
    if name in PRESETS:
        path = Path(resolved["data_dir"]) / PRESET_FILES[name]
        ds = load_csv(path, name=name)
        preset = PRESETS[name]
        if ds.n_channels != preset.n_channels:
            raise DataError(
                f"{path}: expected {preset.n_channels} channels for preset "
                f"{name!r}, found {ds.n_channels}"
            )
        return ds, name
    return load_csv(resolved["dataset"]), ""


def dataset_views(ds: RawDataset, preset_name: str, lookback: int):
    spec = (
        split_spec_for(PRESETS[preset_name], ds.n_rows)
        if preset_name
        else ratio_split_spec(ds.n_rows)
    )
    return split(ds, spec, lookback)


def default_lookback(preset_name: str, lookback) -> int:
    if lookback is not None:
        return lookback
    if preset_name:
        return PRESETS[preset_name].default_lookback
    return 96


def default_horizon(preset_name: str, horizon) -> int:
    if horizon is not None:
        return horizon
    if preset_name:
        return PRESETS[preset_name].horizons[0]
    return 96


# -- subcommands --------------------------------------------------------


def cmd_decompose(args: argparse.Namespace) -> int:
    ds = load_csv(args.input)
    columns = list(ds.column_names)
    if args.column is not None:
        if args.column not in columns:
            raise DataError(
                f"column {args.column!r} not in {columns}"
            )
        columns = [args.column]
    resolved = {
        "command": "decompose", "input": args.input, "method": args.method,
        "alpha": args.alpha, "kernel": args.kernel, "column": args.column,
    }
    triplets = []
    for name in columns:
        series = ds.values[:, ds.column_names.index(name)]
        pair = (
            ema_closed_form(series, args.alpha)
            if args.method == "ema"
            else sma(series, args.kernel)
        )
        triplets.append((name, series, pair))
    header = []
    for name, _, _ in triplets:
        prefix = f"{name}_" if len(triplets) > 1 else ""
        header += [f"{prefix}input" if prefix else "input",
                   f"{prefix}trend" if prefix else "trend",
                   f"{prefix}seasonal" if prefix else "seasonal"]
    table = np.column_stack(
        [col for _, s, p in triplets for col in (s, p.trend, p.seasonal)]
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write(provenance_header(resolved))
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if args.plot:
        name, series, pair = triplets[0]
        line_chart(
            {"input": series, "trend": pair.trend, "seasonal": pair.seasonal},
            args.plot,
            title=f"{args.method} decomposition of {name}",
        )
    print(f"wrote {out} ({len(table)} rows, {len(triplets)} channel(s))")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    resolved = resolve_train_options(args)
    ds, preset_name = load_dataset(resolved)
    resolved["lookback"] = default_lookback(preset_name, resolved["lookback"])
    resolved["horizon"] = default_horizon(preset_name, resolved["horizon"])

    cfg = TrainConfig(
        lookback=resolved["lookback"],
        horizon=resolved["horizon"],
        alpha=resolved["alpha"],
        patch_len=resolved["patch_len"],
        stride=resolved["stride"],
        batch_size=resolved["batch_size"],
        epochs=resolved["epochs"],
        seed=resolved["seed"],
        patience=resolved["patience"],
        flow=resolved["flow"],
        loss=LossSpec(kind=resolved["loss"], m=resolved["loss_m"]),
        scheduler=SchedulerSpec(
            kind=resolved["scheduler"], alpha0=resolved["lr"],
            k=resolved["k"], s=resolved["s"], w=resolved["w"],
        ),
    )
    views = dataset_views(ds, preset_name, cfg.lookback)
    scaler = Scaler().fit(views.train, ds.column_names)
    model = XPatchModel(cfg.model_config(ds.n_channels), seed=cfg.seed)
    model.scaler = scaler

    result = fit(model, scaler.transform(views.train), scaler.transform(views.val), cfg)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / "checkpoint"
    save_checkpoint(model, stem)
    ckpt_hash = checkpoint_hash(stem)
    header = provenance_header(resolved, {"checkpoint_sha256": ckpt_hash})
    (out_dir / "history.csv").write_text(header + history_to_csv(result.history))
    (out_dir / "config.txt").write_text("\n".join(config_lines(resolved)) + "\n")
    print(
        f"trained {resolved['dataset']} L={cfg.lookback} T={cfg.horizon}: "
        f"best val MSE {result.best_val_mse:.6f} at epoch {result.best_epoch} "
        f"({len(result.history)} epochs run)"
    )
    print(f"wrote {stem}.bin, {stem}.json, {out_dir / 'history.csv'}")
    return 0


def _load_model_for_eval(checkpoint: str) -> XPatchModel:
    model = load_checkpoint(checkpoint)
    if model.scaler is None:
        raise DataError(
            f"checkpoint {checkpoint} carries no scaler; retrain with this version"
        )
    return model


def cmd_eval(args: argparse.Namespace) -> int:
    model = _load_model_for_eval(args.checkpoint)
    cfg = model.cfg
    resolved = {
        "command": "eval", "checkpoint": args.checkpoint, "dataset": args.dataset,
        "data_dir": args.data_dir or "data", "raw_scale": bool(args.raw_scale),
    }
    ds, preset_name = load_dataset({"dataset": args.dataset, "data_dir": resolved["data_dir"]})
    views = dataset_views(ds, preset_name, cfg.lookback)
    if args.raw_scale:
        scaler = model.scaler

        def predict_raw(rows: np.ndarray) -> np.ndarray:
            # channel-flattened rows: row index modulo M names the channel
            ch = np.arange(rows.shape[0]) % cfg.n_channels
            normalized = (rows - scaler.mean[ch][:, None]) / scaler.std[ch][:, None]
            pred = model.predict(normalized)
            return pred * scaler.std[ch][:, None] + scaler.mean[ch][:, None]

        report = evaluate(
            None, views.test, cfg.lookback, cfg.horizon,
            dataset=ds.name, predict_fn=predict_raw,
        )
    else:
        test_view = model.scaler.transform(views.test)
        report = evaluate(model, test_view, cfg.lookback, cfg.horizon, dataset=ds.name)
    header = provenance_header(
        resolved, {"checkpoint_sha256": checkpoint_hash(args.checkpoint)}
    )
    text = header + report.to_csv()
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        print(f"wrote {out}")
    print(f"{ds.name} L={cfg.lookback} T={cfg.horizon} "
          f"mse={report.mse:.6f} mae={report.mae:.6f} windows={report.n_windows}")
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    model = _load_model_for_eval(args.checkpoint)
    cfg = model.cfg
    ds = load_csv(args.input)
    if ds.n_channels != cfg.n_channels:
        raise DataError(
            f"{args.input} has {ds.n_channels} channels, checkpoint expects "
            f"{cfg.n_channels}"
        )
    pred = forecast(model, model.scaler, ds.values, cfg.lookback, cfg.horizon)
    resolved = {
        "command": "forecast", "checkpoint": args.checkpoint, "input": args.input,
        "lookback": cfg.lookback, "horizon": cfg.horizon,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        fh.write(provenance_header(
            resolved, {"checkpoint_sha256": checkpoint_hash(args.checkpoint)}
        ))
        fh.write(",".join(ds.column_names) + "\n")
        for row in pred:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if args.plot:
        column = ds.n_channels - 1
        history = ds.values[-cfg.lookback :, column]
        joined = np.concatenate([history, pred[:, column]])
        truth = np.concatenate([history, np.full(cfg.horizon, np.nan)])
        line_chart(
            {"history": truth, "forecast": joined},
            args.plot,
            title=f"forecast of {ds.column_names[column]}",
            lookback=cfg.lookback,
        )
    print(f"wrote {out} ({pred.shape[0]} rows)")
    return 0


def cmd_adf(args: argparse.Namespace) -> int:
    ds = load_csv(args.input)
    if args.column is None:
        channels = [ds.n_channels - 1]
    elif args.column == "all":
        channels = list(range(ds.n_channels))
    else:
        if args.column not in ds.column_names:
            raise DataError(f"column {args.column!r} not in {list(ds.column_names)}")
        channels = [ds.column_names.index(args.column)]
    table = chunked_adf(
        ds.values, chunk_len=args.chunk_len, alpha=args.alpha,
        max_lags=args.max_lags, channels=channels,
    )
    resolved = {
        "command": "adf", "input": args.input, "chunk_len": args.chunk_len,
        "alpha": args.alpha, "column": args.column or ds.column_names[-1],
    }
    text = provenance_header(resolved) + table.to_csv()
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    for component in ("raw", "trend", "seasonal"):
        print(
            f"{component}: mean p {table.mean_p(component):.4f}, "
            f"stationary {table.stationary_count(component)}/"
            f"{table.total_chunks(component)}"
        )
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    ds = load_csv(args.input)
    names = args.columns.split(",") if args.columns else [ds.column_names[-1]]
    series = {}
    for name in names:
        if name not in ds.column_names:
            raise DataError(f"column {name!r} not in {list(ds.column_names)}")
        series[name] = ds.values[:, ds.column_names.index(name)]
    line_chart(series, args.out, title=Path(args.input).name, lookback=args.lookback)
    print(f"wrote {args.out}")
    return 0


# -- parser wiring -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xpatch",
        description="EMA-decomposed dual-stream forecasting toolkit",
    )
    parser.add_argument("--version", action="version", version=f"xpatch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="split a CSV into trend and seasonal parts")
    p.add_argument("--input", required=True, help="input CSV path")
    p.add_argument("--method", choices=("ema", "sma"), default="ema")
    p.add_argument("--alpha", type=float, default=0.3, help="EMA smoothing factor")
    p.add_argument("--kernel", type=int, default=25, help="SMA kernel (odd)")
    p.add_argument("--column", help="restrict to one column")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot", help="optional SVG path")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="train a forecaster on a dataset")
    p.add_argument("--dataset", help="preset name or CSV path")
    p.add_argument("--data-dir", help="directory holding preset CSVs (default data)")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out-dir", default="runs/latest", help="artifact directory")
    for key, (flag, typ, _, help_text) in TRAIN_SCHEMA.items():
        p.add_argument(flag, dest=key, type=typ, default=None, help=help_text)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    p.add_argument("--checkpoint", required=True, help="checkpoint stem (no suffix)")
    p.add_argument("--dataset", required=True, help="preset name or CSV path")
    p.add_argument("--data-dir", help="directory holding preset CSVs")
    p.add_argument("--raw-scale", action="store_true",
                   help="report metrics in source units instead of normalized space")
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("forecast", help="predict past the end of a CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="CSV with at least L rows")
    p.add_argument("--out", required=True, help="forecast CSV path")
    p.add_argument("--plot", help="optional SVG path")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("adf", help="chunked stationarity tests with decomposition")
    p.add_argument("--input", required=True)
    p.add_argument("--chunk-len", type=int, default=720)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--max-lags", type=int, default=None)
    p.add_argument("--column", help="column name, or 'all' (default: last column)")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.set_defaults(func=cmd_adf)

    p = sub.add_parser("plot", help="render CSV columns to an SVG line chart")
    p.add_argument("--input", required=True)
    p.add_argument("--columns", help="comma-separated column names (default: last)")
    p.add_argument("--lookback", type=int, help="shade the first N points")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except XPatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
