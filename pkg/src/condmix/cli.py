"""Command-line experiment driver.

Every subcommand reads an optional JSON config, fills in documented
defaults, validates the result, runs the experiment and writes CSV files
plus ``manifest.json`` (resolved config, seed and library versions) into a
fresh timestamped run directory under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import platform
import sys
from pathlib import Path
from typing import Any, Callable

import gmpy2
import numpy as np
import scipy

from . import __version__
from .errors import CondMixError, ConfigError

# -- config schema --------------------------------------------------------------

_LOZI_CHAOTIC = {"a": 1.8, "b": 0.35}

DEFAULTS: dict[str, dict[str, Any]] = {
    "lozi-cond-hist": {"a": 1.7, "b": 0.5, "x0": 0.0, "n_steps": 200_000, "bin_width": 0.0025,
                       "n_init": 1000, "mode": "abort_on_overlap"},
    "lozi-cond-mix": {**_LOZI_CHAOTIC, "x0": 0.0, "observable": "2x", "n_max": 30,
                      "N": 100_000, "R": 20, "n_init": 1000, "mode": "abort_on_overlap",
                      "level": 0.99},
    "lozi-covering": {**_LOZI_CHAOTIC, "x0": 0.0, "n_max": 20, "M": 50_000, "h": 0.01,
                      "N": 1_000_000, "burn_in": 1000, "n_init": 1000},
    "baker-mix": {"k": 2, "mu": 0.45, "offsets": [0.0, 0.55], "foliation": "quadratic",
                  "t": 0.0, "A": "sin2pix", "B": "sin2pix", "n_max": 20, "M": 100_000,
                  "R": 10, "level": 0.99},
    "baker-fourier": {"k": 2, "mu": 0.45, "offsets": [0.0, 0.55], "foliation": "quadratic",
                      "j_max": 64, "M": 1_000_000},
    "bayes-forecast": {**_LOZI_CHAOTIC, "H": "x", "A": "2x", "sigmas": [0.5, 0.1, 0.02, 0.0],
                       "n_max": 30, "count": 500_000, "K": 20, "tol": 1e-3, "level": 0.99},
    "selftest": {},
}

_TYPES = {
    "a": float, "b": float, "x0": float, "bin_width": float, "mu": float, "t": float,
    "h": float, "tol": float, "level": float,
    "n_steps": int, "n_init": int, "n_max": int, "N": int, "R": int, "M": int, "burn_in": int,
    "k": int, "j_max": int, "count": int, "K": int,
    "mode": str, "observable": str, "foliation": str, "A": str, "B": str, "H": str,
    "offsets": list, "sigmas": list,
}

_POSITIVE = {"n_steps", "N", "R", "M", "k", "j_max", "count", "K", "bin_width", "h"}
_NONNEG = {"n_init", "n_max", "burn_in", "tol"}


def _coerce(field: str, value: Any) -> Any:
    want = _TYPES[field]
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field}: expected a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not (isinstance(value, int) or
                                           (isinstance(value, float) and value.is_integer())):
            raise ConfigError(f"{field}: expected an integer, got {value!r}")
        return int(value)
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(f"{field}: expected a string, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{field}: expected a list, got {value!r}")
    out = []
    for v in value:
        if field == "sigmas" and v in ("inf", "Infinity"):
            out.append(math.inf)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            out.append(float(v))
        else:
            raise ConfigError(f"{field}: entries must be numbers, got {v!r}")
    return out


def resolve_config(command: str, user: dict | None, seed: int | None,
                   precision: int | None) -> dict:
    """Defaults overlaid with the user's config and flags, then validated."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown experiment {command!r}")
    cfg = dict(DEFAULTS[command])
    user = dict(user or {})
    user.pop("experiment", None)
    file_seed = user.pop("seed", None)
    file_prec = user.pop("precision_bits", None)
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown field(s) for {command}: {', '.join(unknown)}")
    for k, v in user.items():
        cfg[k] = _coerce(k, v)
    cfg["seed"] = int(seed if seed is not None else (file_seed if file_seed is not None else 0))
    cfg["precision_bits"] = int(precision if precision is not None
                                else (file_prec if file_prec is not None else 196))
    validate(command, cfg)
    return {"experiment": command, **cfg}


def validate(command: str, cfg: dict) -> None:
    from .lozi import MODES, OBSERVABLES, validate_params
    from .baker import FOLIATIONS, OBSERVABLES as BAKER_OBS

    for k, v in cfg.items():
        if k in _POSITIVE and not v > 0:
            raise ConfigError(f"{k}: must be positive, got {v!r}")
        if k in _NONNEG and not v >= 0:
            raise ConfigError(f"{k}: must be non-negative, got {v!r}")
    if cfg["precision_bits"] < 53:
        raise ConfigError("precision_bits: must be at least 53")
    if cfg["seed"] < 0:
        raise ConfigError("seed: must be non-negative")
    if "a" in cfg:
        flags = validate_params(cfg["a"], cfg["b"])
        if not flags.chaotic:
            raise ConfigError(f"a, b: ({cfg['a']}, {cfg['b']}) is outside the chaotic region")
    if "mode" in cfg and cfg["mode"] not in MODES:
        raise ConfigError(f"mode: must be one of {list(MODES)}")
    for key in ("observable", "H") + (("A",) if command.startswith(("lozi", "bayes")) else ()):
        if key in cfg and cfg[key] not in OBSERVABLES:
            raise ConfigError(f"{key}: unknown observable {cfg[key]!r}; choose from {sorted(OBSERVABLES)}")
    if command.startswith("baker"):
        if cfg["foliation"] not in FOLIATIONS:
            raise ConfigError(f"foliation: choose from {sorted(FOLIATIONS)}")
        if len(cfg["offsets"]) != cfg["k"]:
            raise ConfigError("offsets: need exactly k entries")
        if not 0 < cfg["mu"] < 1:
            raise ConfigError("mu: must lie in (0, 1)")
        for key in ("A", "B"):
            if key in cfg and cfg[key] not in BAKER_OBS:
                raise ConfigError(f"{key}: choose from {sorted(BAKER_OBS)}")
    if command == "baker-fourier" and cfg["j_max"] < 8:
        raise ConfigError("j_max: must be at least 8")
    if "R" in cfg and cfg["R"] < 2:
        raise ConfigError("R: at least two replicas are needed for a confidence interval")
    if "level" in cfg and not 0 < cfg["level"] < 1:
        raise ConfigError("level: must lie in (0, 1)")
    if "sigmas" in cfg and any(s < 0 for s in cfg["sigmas"]):
        raise ConfigError("sigmas: must be >= 0 (or \"inf\")")


# -- output ---------------------------------------------------------------------

def _num(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])


def versions() -> dict:
    return {"condmix": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "gmpy2": gmpy2.version(), "mpfr": gmpy2.mpfr_version()}


def make_run_dir(out: Path, command: str, overwrite: bool) -> Path:
    if overwrite:
        d = out / command
        d.mkdir(parents=True, exist_ok=True)
        return d
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S%f")
    d = out / f"{command}-{stamp}"
    i = 0
    while d.exists():
        i += 1
        d = out / f"{command}-{stamp}-{i}"
    d.mkdir(parents=True)
    return d


def _json_safe(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


def write_manifest(d: Path, cfg: dict, outputs: list[str], argv: list[str]) -> None:
    man = {"config": {k: _json_safe(v) for k, v in cfg.items()}, "seed": cfg.get("seed"),
           "outputs": outputs, "versions": versions(), "argv": argv}
    with open(d / "manifest.json", "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- experiments ----------------------------------------------------------------

def _segment_cfg(cfg: dict):
    from .lozi import SegmentConfig
    return SegmentConfig(precision=cfg["precision_bits"], n_init=cfg["n_init"],
                         mode=cfg.get("mode", "abort_on_overlap"))


def run_lozi_cond_hist(cfg: dict, d: Path, threads: int) -> list[str]:
    from .lozi import LoziParams, conditional_histogram
    h = conditional_histogram(LoziParams(cfg["a"], cfg["b"]), cfg["x0"], cfg["n_steps"],
                              cfg["bin_width"], cfg["seed"], cfg=_segment_cfg(cfg))
    write_csv(d / "histogram.csv", ["bin_lo", "bin_hi", "mass"],
              zip(h.edges[:-1], h.edges[1:], h.mass))
    write_csv(d / "summary.csv", ["samples", "steps", "y_lo", "y_hi", "total_mass"],
              [(h.samples, h.steps, h.lo_bound, h.hi_bound, math.fsum(h.mass))])
    return ["histogram.csv", "summary.csv"]


def run_lozi_cond_mix(cfg: dict, d: Path, threads: int) -> list[str]:
    from .lozi import LoziParams, conditional_mixing
    rows, _ = conditional_mixing(LoziParams(cfg["a"], cfg["b"]), cfg["x0"], cfg["observable"],
                                 cfg["n_max"], cfg["N"], cfg["R"], cfg["seed"], threads,
                                 cfg["level"], _segment_cfg(cfg))
    write_csv(d / "correlation.csv",
              ["n", "estimate_mid", "det_err", "stat_err", "replicas", "samples"],
              [(r.n, r.estimate_mid, r.det_err, r.stat_err, r.replicas, r.samples) for r in rows])
    return ["correlation.csv"]


def run_lozi_covering(cfg: dict, d: Path, threads: int) -> list[str]:
    from .geometry import covering_curve
    from .lozi import LoziParams
    rows = covering_curve(LoziParams(cfg["a"], cfg["b"]), cfg["x0"], cfg["n_max"], cfg["M"],
                          cfg["h"], cfg["N"], cfg["burn_in"], cfg["seed"], _segment_cfg(cfg))
    write_csv(d / "covering.csv", ["n", "d_n", "h", "occupied_a", "occupied_b"],
              [(r.n, r.d_n, r.h, r.occupied_a, r.occupied_b) for r in rows])
    return ["covering.csv"]


def _baker_setup(cfg: dict):
    from .baker import BakerMap, get_foliation
    return BakerMap.linear(cfg["k"], cfg["mu"], cfg["offsets"]), get_foliation(cfg["foliation"])


def run_baker_mix(cfg: dict, d: Path, threads: int) -> list[str]:
    from .baker import mixing_correlation
    bm, fol = _baker_setup(cfg)
    rows = mixing_correlation(bm, fol, cfg["t"], cfg["A"], cfg["B"], cfg["n_max"], cfg["M"],
                              cfg["R"], cfg["seed"], threads, cfg["level"])
    write_csv(d / "correlation.csv", ["n", "estimate", "ci_halfwidth"],
              [(r.n, r.estimate, r.ci_halfwidth) for r in rows])
    return ["correlation.csv"]


def run_baker_fourier(cfg: dict, d: Path, threads: int) -> list[str]:
    from .baker import fourier_decay
    from .stats import RngStream
    bm, fol = _baker_setup(cfg)
    res = fourier_decay(bm, fol, cfg["j_max"], cfg["M"], RngStream(cfg["seed"], "baker-fourier"))
    write_csv(d / "fourier.csv", ["j", "abs_coeff"], zip(res.j, res.coeffs))
    write_csv(d / "fit.csv", ["eta", "intercept", "floor", "n_used"],
              [(res.eta, res.intercept, res.floor, res.n_used)])
    return ["fourier.csv", "fit.csv"]


def run_bayes_forecast(cfg: dict, d: Path, threads: int) -> list[str]:
    from .bayes import forecast_decay_experiment
    from .lozi import LoziParams
    res = forecast_decay_experiment(LoziParams(cfg["a"], cfg["b"]), cfg["H"], cfg["A"],
                                    cfg["sigmas"], cfg["n_max"], cfg["seed"], cfg["count"],
                                    cfg["K"], cfg["seed"], cfg["tol"], cfg["level"])
    write_csv(d / "forecast.csv", ["sigma", "n", "abs_error", "stat_err"],
              [(r.sigma, r.n, r.abs_error, r.stat_err) for r in res.rows])
    write_csv(d / "posterior.csv", ["sigma", "h_error"], sorted(res.posterior_h_error.items(),
                                                                 key=lambda kv: -kv[0]))
    return ["forecast.csv", "posterior.csv"]


RUNNERS: dict[str, Callable[[dict, Path, int], list[str]]] = {
    "lozi-cond-hist": run_lozi_cond_hist,
    "lozi-cond-mix": run_lozi_cond_mix,
    "lozi-covering": run_lozi_covering,
    "baker-mix": run_baker_mix,
    "baker-fourier": run_baker_fourier,
    "bayes-forecast": run_bayes_forecast,
}


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with experiment fields")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for replicas")
    common.add_argument("--precision-bits", type=int, dest="precision",
                        help="interval precision in bits (default 196)")
    common.add_argument("--out", type=Path, default=Path("runs"), help="output root directory")
    common.add_argument("--overwrite", action="store_true",
                        help="write into OUT/<experiment> instead of a new timestamped directory")
    p = argparse.ArgumentParser(prog="condmix", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        from .selftest import run_selftest
        return 0 if run_selftest() else 1
    try:
        user = None
        if args.config is not None:
            try:
                user = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(user, dict):
                raise ConfigError("config must be a JSON object")
        if args.threads < 1:
            raise ConfigError("threads: must be at least 1")
        cfg = resolve_config(args.command, user, args.seed, args.precision)
        d = make_run_dir(args.out, args.command, args.overwrite)
        outputs = RUNNERS[args.command](cfg, d, args.threads)
        write_manifest(d, cfg, outputs, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CondMixError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(d)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
