"""Command line experiment runner.

Subcommands ``plan``, ``covariance``, ``sample``, ``sweep`` and ``compare``
read a flat ``key = value`` config file and write CSV rows (or JSON lines
with ``--json``). Exit codes: 0 success, 1 internal error, 2 config error,
3 capability error (e.g. exact propagation requested with ``eta > 0``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, fields, replace

from .analysis import NonlinearDenoiser, estimate_covariance_mc, metrics, propagate_covariance
from .brick import padded_length
from .denoiser import GpOracleDenoiser, GpOracleParams, gp_covariance
from .sampler import (BRICK, CONCAT, KINDS, SLIDING_WINDOW, UNTILED, StrategyConfig,
                      WindowSet, step_layout)
from .schedule import build_linear_schedule, ddim_ladder

COLUMNS = (
    "strategy", "f", "stride", "overlap", "eta", "T", "S", "rho", "d", "F", "seed",
    "mc_samples", "cov_error_total", "cov_error_boundary", "marginal_var_error",
    "mean_boundary_jump", "dynamic_degree", "wall_ms",
)
SWEEP_STRIDES = (0, 1, 3, 5, 7, 9)
COMPARE_ORDER = (UNTILED, CONCAT, SLIDING_WINDOW, BRICK)


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class ValidationError(ConfigError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = BRICK
    f: int = 16
    stride: int = 1
    overlap: int | None = None
    eta: float = 0.0
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    S: int = 50
    rho: float = 0.9
    d: int = 4
    F: int = 48
    seed: int = 0
    mc_samples: int = 1000
    workers: int = 1

    def validate(self):
        try:
            self.strategy_config()
            self.schedule()
            self.ladder()
            GpOracleParams(rho=self.rho, window=self.f, d=self.d)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        if self.F < 1:
            raise ValidationError(f"F must be >= 1, got {self.F}")
        if self.mc_samples < 2:
            raise ValidationError(f"mc_samples must be >= 2, got {self.mc_samples}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        return self

    def strategy_config(self, kind=None, stride=None):
        kind = self.strategy if kind is None else kind
        return StrategyConfig(kind=kind, f=self.f,
                              stride=self.stride if stride is None else stride,
                              overlap=self.overlap, eta=self.eta)

    def schedule(self):
        return build_linear_schedule(self.T, self.beta_start, self.beta_end)

    def ladder(self):
        return ddim_ladder(self.T, self.S)

    @property
    def L(self):
        return padded_length(self.F, self.f)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_CASTS = {"str": str, "int": int, "float": float, "int | None": int}


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in values:
            raise ParseError(lineno, f"duplicate key {key!r}")
        try:
            values[key] = _CASTS[_TYPES[key]](value)
        except ValueError:
            raise ParseError(lineno, f"bad value {value!r} for {key}") from None
    if "strategy" in values and values["strategy"] not in KINDS:
        raise ValidationError(f"strategy must be one of {KINDS}, got {values['strategy']!r}")
    return ExperimentConfig(**values).validate()


def make_denoiser(cfg, strategy, schedule):
    window = cfg.L if strategy.kind == UNTILED else cfg.f
    return GpOracleDenoiser(GpOracleParams(rho=cfg.rho, window=window, d=cfg.d), schedule)


def _row(cfg, strategy, report, mc_samples, wall_ms):
    return {
        "strategy": strategy.kind,
        "f": cfg.f,
        "stride": strategy.stride if strategy.kind == BRICK else 0,
        "overlap": strategy.window_overlap if strategy.kind == SLIDING_WINDOW else 0,
        "eta": strategy.eta,
        "T": cfg.T,
        "S": cfg.S,
        "rho": cfg.rho,
        "d": cfg.d,
        "F": cfg.F,
        "seed": cfg.seed,
        "mc_samples": mc_samples,
        "cov_error_total": report.cov_error_total,
        "cov_error_boundary": report.cov_error_boundary,
        "marginal_var_error": report.marginal_var_error,
        "mean_boundary_jump": report.mean_boundary_jump,
        "dynamic_degree": report.dynamic_degree,
        "wall_ms": round(wall_ms, 3),
    }


def run_exact(cfg, strategy):
    if strategy.eta != 0:
        raise NonlinearDenoiser(
            "exact propagation needs eta = 0; use the 'sample' subcommand for eta > 0")
    start = time.perf_counter()
    schedule = cfg.schedule()
    cov = propagate_covariance(strategy, schedule, cfg.ladder(),
                               make_denoiser(cfg, strategy, schedule), cfg.F, cfg.d)
    report = metrics(cov, gp_covariance(cfg.F, cfg.rho), cfg.f)
    return _row(cfg, strategy, report, 0, 1e3 * (time.perf_counter() - start))


def run_mc(cfg, strategy):
    start = time.perf_counter()
    schedule = cfg.schedule()
    cov = estimate_covariance_mc(strategy, schedule, cfg.ladder(),
                                 make_denoiser(cfg, strategy, schedule), cfg.F, cfg.d,
                                 cfg.mc_samples, cfg.seed, workers=cfg.workers)
    report = metrics(cov, gp_covariance(cfg.F, cfg.rho), cfg.f)
    return _row(cfg, strategy, report, cfg.mc_samples, 1e3 * (time.perf_counter() - start))


def _run(cfg, strategy):
    return run_exact(cfg, strategy) if strategy.eta == 0 else run_mc(cfg, strategy)


def cmd_plan(cfg):
    strategy = cfg.strategy_config()
    L = cfg.L
    lines = [f"# L={L} f={cfg.f} strategy={strategy.kind}", "k\toffset\tsegments"]
    for k in range(cfg.S):
        layout = step_layout(strategy, L, k)
        if isinstance(layout, WindowSet):
            offset, ranges = 0, layout.windows
        else:
            offset, ranges = layout.offset, layout.segments
        segs = " ".join(f"[{a},{b})" for a, b in ranges)
        lines.append(f"{k}\t{offset}\t{segs}")
    return "\n".join(lines) + "\n"


def cmd_covariance(cfg):
    return [run_exact(cfg, cfg.strategy_config())]


def cmd_sample(cfg):
    return [run_mc(cfg, cfg.strategy_config())]


def cmd_sweep(cfg, strides=SWEEP_STRIDES):
    return [_run(cfg, cfg.strategy_config(kind=BRICK, stride=s)) for s in strides]


def cmd_compare(cfg):
    return [_run(cfg, cfg.strategy_config(kind=kind)) for kind in COMPARE_ORDER]


def _fmt(value):
    return repr(float(value)) if isinstance(value, float) else str(value)


def format_rows(rows, as_json=False):
    buf = io.StringIO()
    if as_json:
        for row in rows:
            buf.write(json.dumps(row) + "\n")
        return buf.getvalue()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def _parse_strides(text):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad stride list {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--json", action="store_true", help="emit JSON lines instead of CSV")
    common.add_argument("--workers", type=int, help="parallel workers")
    common.add_argument("--seed", type=int, help="random seed")

    parser = argparse.ArgumentParser(prog="brickwall", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="print the segment plan per step")
    sub.add_parser("covariance", parents=[common], help="exact covariance metrics")
    sub.add_parser("sample", parents=[common], help="Monte Carlo covariance metrics")
    sweep = sub.add_parser("sweep", parents=[common], help="stride sweep for brick")
    sweep.add_argument("--strides", type=_parse_strides, default=SWEEP_STRIDES,
                       help="comma separated strides (default: 0,1,3,5,7,9)")
    sub.add_parser("compare", parents=[common], help="all strategies side by side")
    return parser


def load_config(args):
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    cfg = parse_config(text)
    overrides = {k: getattr(args, k) for k in ("workers", "seed") if getattr(args, k) is not None}
    return replace(cfg, **overrides).validate() if overrides else cfg


def _execute(args, cfg):
    if args.command == "plan":
        return cmd_plan(cfg)
    if args.command == "sweep":
        rows = cmd_sweep(cfg, args.strides)
    else:
        rows = {"covariance": cmd_covariance, "sample": cmd_sample,
                "compare": cmd_compare}[args.command](cfg)
    return format_rows(rows, args.json)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        output = _execute(args, cfg)
    except NonlinearDenoiser as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # component validation, e.g. a swept stride >= f
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(output)
        else:
            sys.stdout.write(output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
