"""Command-line entry point: ``hemimac <subcommand> [flags]``.

Every subcommand reads optional defaults from a YAML file (``--config``);
flags override file values and the effective configuration is echoed into
the JSON summary. Exit codes: 0 success, 2 parameter error, 3 runtime or
decode failure.
"""

import argparse
import json
import sys

import yaml

from . import asymptotics, harness, wendel
from .channel import ChannelParams, SamplingMode
from .decoder import DEFAULT_ENUMERATION_CAP, Strategy, TauSchedule
from .errors import DecodeError, ParameterError
from .harness import ExperimentConfig, Measurement

EXIT_OK, EXIT_PARAM, EXIT_RUNTIME = 0, 2, 3


def _int_list(text):
    return [int(float(v)) for v in str(text).split(",") if v.strip()]


# name -> (type, default, help); None default means "required"
OPTIONS = {
    "n": (int, None, "blocklength / dimension"),
    "N": (int, None, "number of points"),
    "d": (float, 2.2, "codebook exponent, M = round(n^d)"),
    "beta": (float, None, "user density, K_a = round(beta n)"),
    "P": (float, 1.0, "per-symbol power"),
    "trials": (int, None, "Monte Carlo trials"),
    "l": (int, 1, "number of swapped codewords in Delta"),
    "tau_schedule": (str, "zero", "zero | power:GAMMA | log:SCALE"),
    "mode": (str, "conditioned", "codebook sampling: conditioned | full"),
    "strategy": (str, "exact", "ML stage: exact (if feasible) | local"),
    "enumeration_cap": (int, DEFAULT_ENUMERATION_CAP, "largest subset count for exact ML"),
    "n_values": (_int_list, None, "comma-separated blocklengths"),
    "measure": (str, "align", "sweep measurement: align | retention | capcount | decode"),
    "seed": (int, None, "base seed (required for stochastic subcommands)"),
    "threads": (int, 1, "worker threads (results do not depend on it)"),
}

SUBCOMMANDS = {
    "wendel": (["n", "N", "trials", "seed", "threads"], False),
    "regime": (["beta"], False),
    "limits": (["beta", "P"], False),
    "align": (["n", "d", "beta", "P", "trials", "seed", "threads"], True),
    "retention": (["n", "d", "beta", "P", "trials", "tau_schedule", "mode", "seed", "threads"], True),
    "capcount": (["n", "d", "beta", "P", "trials", "tau_schedule", "seed", "threads"], True),
    "decode": (["n", "d", "beta", "P", "trials", "tau_schedule", "strategy", "enumeration_cap",
                "seed", "threads"], True),
    "exponent": (["n_values", "d", "beta", "P"], False),
    "delta": (["n", "P", "l", "trials", "seed"], True),
    "sweep": (["n_values", "d", "beta", "P", "trials", "tau_schedule", "mode", "measure",
               "seed", "threads"], True),
}

OPTIONAL = {"trials": {"wendel"}, "seed": {"wendel"}}

# per-subcommand defaults that differ from OPTIONS
DEFAULT_OVERRIDES = {"decode": {"tau_schedule": "power:0.25"}}


def build_parser():
    parser = argparse.ArgumentParser(prog="hemimac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, (keys, _) in SUBCOMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML file with default values for the flags")
        sp.add_argument("--output", help="write the JSON summary here")
        if name in {"align", "retention", "capcount", "decode"}:
            sp.add_argument("--csv", help="write the per-trial table here")
            sp.add_argument("--timing", action="store_true", default=None,
                            help="record per-trial runtime_ms (makes output non-reproducible)")
        for key in keys:
            typ, default, help_text = OPTIONS[key]
            default = DEFAULT_OVERRIDES.get(name, {}).get(key, default)
            flag = "--" + key.replace("_", "-")
            if default is not None:
                help_text = f"{help_text} (default {default})"
            sp.add_argument(flag, dest=key, type=typ, default=None, help=help_text)
    return parser


def effective_config(args):
    keys, stochastic = SUBCOMMANDS[args.subcommand]
    cfg = {}
    for key in keys:
        default = OPTIONS[key][1]
        if default is not None:
            cfg[key] = default
    cfg.update(DEFAULT_OVERRIDES.get(args.subcommand, {}))
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ParameterError("config file must hold a mapping")
        unknown = set(loaded) - set(keys) - {"subcommand", "timing"}
        if unknown:
            raise ParameterError(f"unknown config keys for {args.subcommand}: {sorted(unknown)}")
        for key, value in loaded.items():
            if key in OPTIONS:
                cfg[key] = OPTIONS[key][0](value)
            elif key == "timing":
                cfg[key] = bool(value)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "timing", None):
        cfg["timing"] = True
    missing = [k for k in keys if k not in cfg and args.subcommand not in OPTIONAL.get(k, ())]
    if missing:
        raise ParameterError(f"missing required values: {', '.join('--' + m for m in missing)}")
    if stochastic and "seed" not in cfg:
        raise ParameterError("--seed is required")
    if args.subcommand == "wendel" and "trials" in cfg and "seed" not in cfg:
        raise ParameterError("--seed is required for the Monte Carlo estimate")
    return cfg


def _params(cfg, n=None, mode=None):
    mode = mode or cfg.get("mode", "conditioned")
    try:
        sampling = SamplingMode(mode)
    except ValueError:
        raise ParameterError(f"unknown mode {mode!r}") from None
    return ChannelParams(n or cfg["n"], cfg["d"], cfg["beta"], cfg["P"], sampling)


def _strategy(cfg):
    try:
        return Strategy(cfg.get("strategy", "exact"))
    except ValueError:
        raise ParameterError(f"unknown strategy {cfg['strategy']!r}") from None


def _fmt(v):
    if v is None:
        return "nan"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _line(name, measured, predicted=None, stderr=None):
    parts = [f"{name}: measured={_fmt(measured)}"]
    if stderr is not None:
        parts.append(f"stderr={_fmt(stderr)}")
    if predicted is not None:
        parts.append(f"predicted={_fmt(predicted)}")
    return " ".join(parts)


def cmd_wendel(cfg):
    n, N = cfg["n"], cfg["N"]
    num, den = wendel.wendel_count(n, N)
    p = wendel.wendel_probability(n, N)
    lines = [f"p_{{n,N}} = {p!r}", f"exact = {num}/{den}"]
    results = {"probability": p, "numerator": num, "denominator": den}
    if "trials" in cfg:
        est, se = harness.estimate_wendel_mc(n, N, cfg["trials"], cfg["seed"])
        lines.append(_line("monte_carlo", est, p, se))
        results.update(mc_estimate=est, mc_stderr=se)
    return lines, results, None


def cmd_regime(cfg):
    r = wendel.classify_regime(cfg["beta"])
    line = r.kind.value if r.rate is None else f"{r.kind.value} rate={r.rate:.6f}"
    return [line], {"kind": r.kind.value, "rate": r.rate}, None


def cmd_limits(cfg):
    rep = asymptotics.limit_report(cfg["beta"], cfg["P"]).as_dict()
    return [f"{k} = {v:.6f}" for k, v in rep.items()], rep, None


def _experiment(cfg, measurements, mode=None, schedule=None, n=None):
    config = ExperimentConfig(
        params=_params(cfg, n=n, mode=mode),
        schedule=schedule or TauSchedule.parse(cfg.get("tau_schedule", "zero")),
        strategy=_strategy(cfg),
        trials=cfg["trials"],
        base_seed=cfg["seed"],
        measurements=frozenset(measurements),
        enumeration_cap=cfg.get("enumeration_cap", DEFAULT_ENUMERATION_CAP),
        record_timing=cfg.get("timing", False),
    )
    return harness.run_experiment(config, threads=cfg.get("threads", 1))


def _align_lines(rep):
    e, lim = rep.estimators, rep.limits
    return [
        _line("alignment", e["alignment_mean"], lim["c"], e["alignment_stderr"]),
        _line("y_norm_over_n", e["y_norm_over_n_mean"], lim["output_norm_limit"],
              e["y_norm_over_n_stderr"]),
        _line("y_parallel_over_n", e["y_parallel_over_n_mean"], lim["parallel_limit"],
              e["y_parallel_over_n_stderr"]),
    ]


def _retention_lines(rep, tau):
    e, lim = rep.estimators, rep.limits
    predicted = lim["retention_at_zero"] if tau == 0 else None
    return [_line("p_ret", e["p_ret_hat"], predicted, e["p_ret_stderr"]),
            _line("pupe_p", e["pupe_p_hat"], None if predicted is None else 1 - predicted)]


def _capcount_lines(rep):
    e = rep.estimators
    return [_line("p_n", e["p_n_hat"], 0.5 if rep.config["tau"] == 0 else None),
            _line("cap_underflow_rate", e["cap_underflow_rate"], 0.0)]


def _decode_lines(rep):
    e = rep.estimators
    return [_line("pupe_ml", e["pupe_ml_hat"]),
            f"pupe_ml_upper95: {_fmt(e['pupe_ml_upper95'])}",
            f"misses_histogram: {json.dumps(e['misses_histogram'], sort_keys=True)}",
            _line("cap_underflow_rate", e["cap_underflow_rate"], 0.0)]


def cmd_align(cfg):
    rep = _experiment(cfg, {Measurement.ALIGNMENT}, mode="conditioned")
    return _align_lines(rep), rep.to_dict_summary(), rep


def cmd_retention(cfg):
    rep = _experiment(cfg, {Measurement.ALIGNMENT, Measurement.RETENTION})
    return _retention_lines(rep, rep.config["tau"]), rep.to_dict_summary(), rep


def cmd_capcount(cfg):
    rep = _experiment(cfg, {Measurement.CAP_CARDINALITY, Measurement.UNSENT_RETENTION},
                      mode="full")
    return _capcount_lines(rep), rep.to_dict_summary(), rep


def cmd_decode(cfg):
    rep = _experiment(cfg, {Measurement.DECODE}, mode="full")
    return _decode_lines(rep), rep.to_dict_summary(), rep


def cmd_exponent(cfg):
    d, beta, P = cfg["d"], cfg["beta"], cfg["P"]
    target = asymptotics.ml_error_exponent(P)
    lines, rows = [], []
    for n in cfg["n_values"]:
        ladder = asymptotics.error_term_ladder(n, d, beta, P)
        est = -ladder[0] / n
        log_ratio = float(ladder[1] - ladder[0]) if ladder.size > 1 else None
        top = int(ladder.argmax()) + 1
        rows.append({"n": n, "exponent_estimate": est, "gap": target - est,
                     "argmax_l": top, "log_ratio_E2_E1": log_ratio})
        lines.append(f"n={n} " + _line("exponent", est, target)
                     + f" argmax_l={top} log_ratio_E2_E1={_fmt(log_ratio)}")
    return lines, {"rows": rows, "ml_exponent": target}, None


def cmd_delta(cfg):
    n, P, l = cfg["n"], cfg["P"], cfg["l"]
    est = asymptotics.delta_concentration_check(n, P, l, cfg["trials"], cfg["seed"])
    return [_line("delta_norm_sq_over_n", est, 2 * l * P)], {"mean": est, "predicted": 2 * l * P}, None


def cmd_sweep(cfg):
    measure = cfg["measure"]
    table = {
        "align": ({Measurement.ALIGNMENT}, "conditioned", _align_lines),
        "retention": ({Measurement.ALIGNMENT, Measurement.RETENTION}, None,
                      lambda r: _retention_lines(r, r.config["tau"])),
        "capcount": ({Measurement.CAP_CARDINALITY, Measurement.UNSENT_RETENTION}, "full",
                     _capcount_lines),
        "decode": ({Measurement.DECODE}, "full", _decode_lines),
    }
    if measure not in table:
        raise ParameterError(f"unknown sweep measurement {measure!r}")
    measurements, mode, fmt = table[measure]
    lines, rows = [], []
    for n in cfg["n_values"]:
        rep = _experiment(cfg, measurements, mode=mode, n=n)
        lines.extend(f"n={n} {line}" for line in fmt(rep))
        rows.append(rep.to_dict_summary())
    return lines, {"rows": rows}, None


COMMANDS = {
    "wendel": cmd_wendel, "regime": cmd_regime, "limits": cmd_limits, "align": cmd_align,
    "retention": cmd_retention, "capcount": cmd_capcount, "decode": cmd_decode,
    "exponent": cmd_exponent, "delta": cmd_delta, "sweep": cmd_sweep,
}


def dispatch(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_PARAM
    try:
        cfg = effective_config(args)
        lines, results, report = COMMANDS[args.subcommand](cfg)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (DecodeError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in lines:
        print(line, file=stdout)
    summary = {"subcommand": args.subcommand, "config": cfg, "results": results}
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    if getattr(args, "csv", None) and report is not None:
        report.write_csv(args.csv)
    return EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
