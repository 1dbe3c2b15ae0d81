"""``score-landscape`` command line.

Settings resolve in three layers: per-experiment defaults, then a flat
``key=value`` config file (``--config``), then explicit flags. Keys in the
file are the long flag names without dashes, e.g. ``n-list=128,256,512``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import DEFAULTS, KINDS, ConfigError, ExperimentSpec, NumericalFailure, run, write_result
from .llsfe import EstimatorError
from .optimizer import NonFiniteLoss

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

# flag name -> (spec field, parser)
_INT_LIST = lambda s: tuple(int(v) for v in str(s).split(",") if v.strip())
_FLOAT_LIST = lambda s: tuple(float(v) for v in str(s).split(",") if v.strip())


def _batch(s):
    return None if str(s) == "full" else int(s)


def _neurons(s):
    return None if str(s) == "auto" else int(s)


OPTIONS = {
    "seed": ("seed", int),
    "dist": ("dist", str),
    "dim": ("dim", int),
    "neurons": ("neurons", _neurons),
    "n-list": ("n_list", _INT_LIST),
    "trials": ("trials", int),
    "percentiles": ("percentiles", _FLOAT_LIST),
    "mu": ("mu", float),
    "lambda": ("lam", float),
    "sign": ("sign", float),
    "lr": ("lr", float),
    "lr-l2": ("lr_l2", float),
    "iters": ("iters", int),
    "batch": ("batch", _batch),
    "record-every": ("record_every", int),
    "activation": ("activation", str),
    "noise-std": ("noise_std", float),
    "bandwidth": ("bandwidth", str),
    "query": ("query", str),
    "mc-samples": ("mc_samples", int),
}

_HELP = {
    "dist": "gaussian | mixture | laplace (stein-check accepts a comma list)",
    "n-list": "comma-separated sample sizes, strictly increasing",
    "batch": "mini-batch size or 'full'",
    "bandwidth": "kernel bandwidth, or 'rule' for n^(-1/(2p+2+d))",
    "query": "random | fixed:<c1>,<c2>,...",
    "sign": "+1 or -1; multiplies the tensor terms of the designed loss",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="score-landscape",
                                     description="Score-function estimation and landscape-designed losses.")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="subcommand")
    for kind in KINDS:
        p = sub.add_parser(kind, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="flat key=value settings file")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        for flag in OPTIONS:
            p.add_argument(f"--{flag}", dest=flag.replace("-", "_"), help=_HELP.get(flag))
    return parser


def read_config(path) -> dict:
    settings = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS and key not in ("out",):
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        settings[key] = value
    return settings


def resolve_spec(kind: str, file_settings: dict, flag_settings: dict) -> ExperimentSpec:
    merged = {**file_settings, **flag_settings}
    fields = dict(DEFAULTS[kind])
    for key, value in merged.items():
        if key not in OPTIONS:
            continue
        name, conv = OPTIONS[key]
        try:
            fields[name] = conv(value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    try:
        return ExperimentSpec(kind=kind, **fields)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    kind = args.pop("kind")
    config_path = args.pop("config", None)
    flags = {k.replace("_", "-"): v for k, v in args.items()}
    try:
        file_settings = read_config(config_path) if config_path else {}
        out = flags.pop("out", file_settings.pop("out", None))
        spec = resolve_spec(kind, file_settings, flags)
        result = run(spec)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, NonFiniteLoss, EstimatorError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if out in (None, "-"):
        write_result(result, spec, sys.stdout)
    else:
        with open(out, "w", newline="") as fh:
            write_result(result, spec, fh)
        print(json.dumps({k: (v if isinstance(v, (str, bool, int)) else float(v))
                          for k, v in result.summary.items()}))
    return EXIT_OK if result.ok else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
