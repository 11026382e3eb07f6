"""Command-line pipeline: ingest, fit, forecast, backtest and compare.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then command-line flags (flags win).

Exit codes: 0 success, 1 runtime failure, 2 usage, schema or config error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import lstm, prophet
from .errors import (ConfigError, ImportcastError, InfeasiblePlanError, RowError,
                     SchemaError, UsageError)
from .evaluation import NaiveForecaster, backtest, compare, default_min_train, load_reports
from .forecasters import LstmForecaster, ProphetForecaster
from .ingest import DEFAULT_SCHEMA, build_timeline, compute_shares, parse_records, write_shares
from .series import (MonthStamp, Scaler, TimeSeries, fit_scaler, make_windows, scale,
                     split_chronological)
from .svg import Line, line_chart

log = logging.getLogger("importcast")

# fixed offsets fanning the top-level seed out to components
LSTM_SEED_OFFSET = 1


@dataclass
class BacktestBlock:
    K: int = 3
    horizon: int = 12
    min_train: int | None = None


@dataclass
class RunConfig:
    input_path: str | None = None
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    delimiter: str = ","
    on_error: str = "raise"
    product: str | None = None
    scaled_range: tuple[float, float] = (0.0, 1.0)
    window_len: int = 6
    train_fraction: float = 0.8
    prophet: prophet.ProphetConfig = field(default_factory=prophet.ProphetConfig)
    lstm: lstm.LstmConfig = field(default_factory=lstm.LstmConfig)
    backtest: BacktestBlock = field(default_factory=BacktestBlock)
    out_dir: str = "out"
    seed: int = 0

    def lstm_config(self) -> lstm.LstmConfig:
        return replace(self.lstm, window_len=self.window_len,
                       seed=self.seed + LSTM_SEED_OFFSET)

    def validate(self) -> None:
        lo, hi = self.scaled_range
        if not hi > lo:
            raise ConfigError("scaled_range must be increasing")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.window_len < 1:
            raise ConfigError("window_len must be positive")
        if self.on_error not in ("raise", "skip"):
            raise ConfigError("on_error must be 'raise' or 'skip'")
        missing = set(DEFAULT_SCHEMA) - set(self.schema)
        if missing:
            raise ConfigError(f"schema lacks {sorted(missing)}")
        self.prophet.validate()
        self.lstm_config().validate()
        b = self.backtest
        if b.K < 1 or b.horizon < 1 or (b.min_train is not None and b.min_train < 1):
            raise ConfigError("backtest K, horizon and min_train must be positive")


def _dataclass_from(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    doc = dict(doc)
    if "input" in doc:
        doc["input_path"] = doc.pop("input")
    if "out" in doc:
        doc["out_dir"] = doc.pop("out")
    if "schema" in doc:
        doc["schema"] = {**DEFAULT_SCHEMA, **doc["schema"]}
    if "scaled_range" in doc:
        doc["scaled_range"] = tuple(doc["scaled_range"])
    if "prophet" in doc:
        doc["prophet"] = _dataclass_from(prophet.ProphetConfig, doc["prophet"])
    if "lstm" in doc:
        doc["lstm"] = _dataclass_from(lstm.LstmConfig, doc["lstm"])
    if "backtest" in doc:
        doc["backtest"] = _dataclass_from(BacktestBlock, doc["backtest"])
    return _dataclass_from(RunConfig, doc)


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.input is not None:
        cfg.input_path = args.input
    if args.product is not None:
        cfg.product = args.product
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "horizon", None) is not None:
        cfg.backtest.horizon = args.horizon
    if getattr(args, "cutoffs", None) is not None:
        cfg.backtest.K = args.cutoffs
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- helpers

def _require_input(cfg: RunConfig) -> str:
    if not cfg.input_path:
        raise UsageError("no input file given (use --input or the config 'input' key)")
    return cfg.input_path


def _read_records(cfg: RunConfig):
    path = _require_input(cfg)
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_records(fh, cfg.schema, delimiter=cfg.delimiter, on_error=cfg.on_error)


def load_series(cfg: RunConfig) -> TimeSeries:
    """Read either a ``timestamp,value`` series CSV or a raw record file."""
    path = _require_input(cfg)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        fh.seek(0)
        if [c.strip() for c in first.strip().split(",")[:2]] == ["timestamp", "value"]:
            return TimeSeries.from_csv(fh)
    series, gaps = build_timeline(_read_records(cfg), cfg.product)
    if gaps:
        log.info("zero-filled %d missing months", len(gaps))
    return series


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _validation_split(cfg: RunConfig, series: TimeSeries) -> tuple[TimeSeries, TimeSeries]:
    train, valid = split_chronological(series, cfg.train_fraction)
    return train, valid


def _metrics_line(name: str, pred, actual) -> str:
    from .evaluation import MetricPair
    mp = MetricPair.of(pred, actual)
    return f"{name}: validation MSE={mp.mse:.6g} RMSE={mp.rmse:.6g}"


def _write_prediction_csv(path, stamps, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    lines = [",".join(["timestamp", *names])]
    for i, s in enumerate(stamps):
        lines.append(",".join([str(s), *(repr(float(columns[n][i])) for n in names)]))
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- commands

def cmd_ingest(cfg: RunConfig, args) -> int:
    records = _read_records(cfg)
    if not records:
        raise UsageError("input has no data rows")
    series, gaps = build_timeline(records, cfg.product)
    with open(_out(cfg, "series.csv"), "w", encoding="utf-8", newline="") as fh:
        series.to_csv(fh)
    gap_lines = [f"months: {len(series)} ({series.start} .. {series.end})",
                 f"zero-filled: {len(gaps)}"] + [str(g) for g in gaps]
    _write_text(_out(cfg, "gaps.txt"), "\n".join(gap_lines) + "\n")
    shares = compute_shares(records)
    with open(_out(cfg, "shares.csv"), "w", encoding="utf-8", newline="") as fh:
        write_shares(shares, fh)
    print(f"rows: {len(records)}  products: {len(shares)}  months: {len(series)}  "
          f"gaps: {len(gaps)}")
    return 0


def cmd_shares(cfg: RunConfig, args) -> int:
    records = _read_records(cfg)
    if not records:
        raise UsageError("input has no data rows")
    shares = compute_shares(records)
    with open(_out(cfg, "shares.csv"), "w", encoding="utf-8", newline="") as fh:
        write_shares(shares, fh)
    for s in shares[: args.top]:
        print(f"{s.product_id}\t{s.total_kg:.6g}\t{100 * s.share:.1f}%")
    return 0


def _prophet_doc(params: prophet.ProphetParams, scaler: Scaler, start: MonthStamp,
                 last_index: int) -> dict:
    return {"params": params.to_dict(), "scaler": scaler.to_dict(),
            "start": str(start), "last_index": last_index}


def cmd_fit_prophet(cfg: RunConfig, args) -> int:
    series = load_series(cfg)
    train, valid = _validation_split(cfg, series)
    model = ProphetForecaster(cfg.prophet, cfg.scaled_range)
    state = model.fit(train)
    pred = model.forecast(state, len(valid))
    doc = _prophet_doc(state.params, state.scaler, series.start, state.last_index)
    _write_text(_out(cfg, "prophet_params.json"), json.dumps(doc, indent=2) + "\n")
    _write_prediction_csv(_out(cfg, "prophet_validation.csv"), valid.stamps,
                          {"yhat": pred, "actual": valid.values})
    print(_metrics_line("prophet", pred, valid.values))
    return 0


def _lstm_doc(state, cfg: lstm.LstmConfig, start: MonthStamp, last_index: int) -> str:
    return lstm.params_to_json(state.params, config=lstm.config_dict(cfg),
                               scaler=state.scaler.to_dict(),
                               seed_window=state.seed_window.tolist(),
                               start=str(start), last_index=last_index)


def cmd_fit_lstm(cfg: RunConfig, args) -> int:
    series = load_series(cfg)
    train, valid = _validation_split(cfg, series)
    lcfg = cfg.lstm_config()
    model = LstmForecaster(lcfg, cfg.scaled_range)
    state = model.fit(train)
    pred = model.forecast(state, len(valid))
    _write_text(_out(cfg, "lstm_params.json"),
                _lstm_doc(state, lcfg, series.start, len(train) - 1) + "\n")
    with open(_out(cfg, "loss_history.csv"), "w", encoding="utf-8", newline="") as fh:
        lstm.write_loss_history(state.loss_history, fh)
    _write_prediction_csv(_out(cfg, "lstm_validation.csv"), valid.stamps,
                          {"yhat": pred, "actual": valid.values})
    print(_metrics_line("lstm", pred, valid.values))
    return 0


def _forecast_prophet(cfg, series, params_path, horizon):
    if params_path:
        with open(params_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        params = prophet.ProphetParams.from_dict(doc["params"])
        scaler = Scaler.from_dict(doc["scaler"])
        start = MonthStamp.parse(doc["start"])
        last = int(doc["last_index"])
    else:
        if series is None:
            raise UsageError("need --input or --params")
        scaler = fit_scaler(series, cfg.scaled_range)
        params = prophet.fit(scale(scaler, series), cfg.prophet)
        start, last = series.start, len(series) - 1
    fc = prophet.predict(params, horizon, last, start)
    cols = {"yhat": scaler.inverse(fc.yhat)}
    # the scaler is affine, so components map as deltas around the trend
    cols["trend"] = scaler.inverse(fc.trend_component)
    cols["seasonal"] = cols["yhat"] - cols["trend"]
    return fc.timestamps, cols


def _forecast_lstm(cfg, series, params_path, horizon):
    if params_path:
        with open(params_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        params = lstm.LstmParams.from_dict(doc)
        scaler = Scaler.from_dict(doc["scaler"])
        seed_window = np.array(doc["seed_window"], dtype=float)
        start = MonthStamp.parse(doc["start"])
        last = int(doc["last_index"])
    else:
        if series is None:
            raise UsageError("need --input or --params")
        scaler = fit_scaler(series, cfg.scaled_range)
        scaled = scale(scaler, series)
        params, _ = lstm.train(make_windows(scaled, cfg.window_len), cfg.lstm_config())
        seed_window = scaled.values[-cfg.window_len:]
        start, last = series.start, len(series) - 1
    z = lstm.forecast_recursive(params, seed_window, horizon)
    stamps = [start.shift(last + 1 + i) for i in range(horizon)]
    return stamps, {"yhat": scaler.inverse(z)}


def cmd_forecast(cfg: RunConfig, args) -> int:
    horizon = args.horizon if args.horizon is not None else cfg.backtest.horizon
    if horizon < 1:
        raise UsageError("horizon must be at least 1")
    series = load_series(cfg) if cfg.input_path else None
    if args.model == "prophet":
        stamps, cols = _forecast_prophet(cfg, series, args.params, horizon)
    else:
        stamps, cols = _forecast_lstm(cfg, series, args.params, horizon)
    _write_prediction_csv(_out(cfg, f"forecast_{args.model}.csv"), stamps, cols)
    if args.svg:
        lines = []
        if series is not None:
            lines.append(Line("history", [s.ordinal for s in series.stamps], series.values))
        lines.append(Line(f"{args.model} forecast", [s.ordinal for s in stamps], cols["yhat"],
                          dashed=True))
        _write_text(_out(cfg, f"forecast_{args.model}.svg"),
                    line_chart(lines, title=f"{args.model} forecast"))
    print(f"wrote {horizon} forecast rows to {_out(cfg, f'forecast_{args.model}.csv')}")
    return 0


def cmd_backtest(cfg: RunConfig, args) -> int:
    series = load_series(cfg)
    b = cfg.backtest
    min_train = default_min_train(b.horizon) if b.min_train is None else b.min_train
    models = [
        LstmForecaster(cfg.lstm_config(), cfg.scaled_range),
        ProphetForecaster(cfg.prophet, cfg.scaled_range),
        NaiveForecaster(),
    ]
    reports = []
    for model in models:
        report = backtest(series, model, b.K, b.horizon, min_train)
        _write_text(_out(cfg, f"{model.name}.json"), report.to_json() + "\n")
        with open(_out(cfg, f"{model.name}_backtest.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            report.write_flat_csv(fh)
        reports.append(report)
    summary = compare(reports)
    with open(_out(cfg, "comparison.csv"), "w", encoding="utf-8", newline="") as fh:
        summary.write_csv(fh)
    if args.svg:
        _write_text(_out(cfg, "backtest.svg"), _backtest_svg(series, reports))
    for row in summary.rows:
        print(f"{row.model:8s} MSE={row.mse:.6g} RMSE={row.rmse:.6g}")
    print(f"winner: {summary.winner}")
    return 0


def _backtest_svg(series: TimeSeries, reports) -> str:
    x = list(range(len(series)))
    lines = [Line("actual", x, series.values)]
    for rep in reports:
        xs = [int(i) for r in rep.per_cutoff for i in r.indices]
        ys = [float(v) for r in rep.per_cutoff for v in r.forecast]
        lines.append(Line(rep.model_name, xs, ys, dashed=True))
    return line_chart(lines, title="backtest forecasts")


def cmd_compare(cfg: RunConfig, args) -> int:
    if not args.reports:
        raise UsageError("compare needs report files")
    try:
        reports = load_reports(args.reports)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read reports: {exc}") from exc
    summary = compare(reports)
    with open(_out(cfg, "comparison.csv"), "w", encoding="utf-8", newline="") as fh:
        summary.write_csv(fh)
    for row in summary.rows:
        print(f"{row.model:8s} MSE={row.mse:.6g} RMSE={row.rmse:.6g}")
    print(f"winner: {summary.winner}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "shares": cmd_shares,
    "fit-prophet": cmd_fit_prophet,
    "fit-lstm": cmd_fit_lstm,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="raw record file or timestamp,value series CSV")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--product", help="restrict to one product id")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="importcast",
                                     description="Monthly import forecasting pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="build the monthly timeline and shares")
    p = sub.add_parser("shares", parents=[common], help="per-product weight shares")
    p.add_argument("--top", type=int, default=10)
    sub.add_parser("fit-prophet", parents=[common], help="fit and validate the additive model")
    sub.add_parser("fit-lstm", parents=[common], help="train and validate the LSTM")
    p = sub.add_parser("forecast", parents=[common], help="forecast beyond the history")
    p.add_argument("--model", choices=("prophet", "lstm"), default="prophet")
    p.add_argument("--params", help="params JSON written by fit-prophet / fit-lstm")
    p.add_argument("--horizon", type=int)
    p.add_argument("--svg", action="store_true", help="also write an SVG line chart")
    p = sub.add_parser("backtest", parents=[common], help="rolling-origin comparison")
    p.add_argument("--horizon", type=int)
    p.add_argument("--cutoffs", type=int, help="number of cutoffs K")
    p.add_argument("--svg", action="store_true")
    p = sub.add_parser("compare", parents=[common], help="compare saved backtest reports")
    p.add_argument("reports", nargs="*")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except InfeasiblePlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, RowError, ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ImportcastError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
