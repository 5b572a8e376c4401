"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
from dataclasses import asdict, replace
import math
import sys

from . import detect_dapsk as dap
from .config import config_from_dict, load_config, parse_snr_list
from .harness import ConfigError, SimConfig, csv_text, emit_csv, prepare, sweep, threshold_table

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

DETECTOR_CHOICES = ("ml", "decoupled", "id", "multibit", "energy", "vql", "coherent")


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _add_run_flags(p):
    p.add_argument("--snr-db", help="comma-separated SNR grid in dB (\"inf\" allowed)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--detector", choices=DETECTOR_CHOICES)
    p.add_argument("--workers", type=int)


def _parse_value(text):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if "," in text:
        return [_parse_value(t) for t in text.split(",") if t]
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffmimo", description="Low-resolution differential massive-MIMO link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the sweep described by a config file")
    p.add_argument("config")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a sweep from defaults or a config, with overrides")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. --set U=128 --set scheme=coherent")
    _add_run_flags(p)

    p = sub.add_parser("calibrate-threshold", help="tabulate energy-detector thresholds over U and SNR")
    p.add_argument("--U", default="42,84,126", help="comma-separated antenna counts")
    p.add_argument("--snr-db", default="0,10,20")
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--q-bits", type=int, default=2, choices=(0, 1, 2))
    p.add_argument("--vql", action="store_true", help="use the VQL partition (requires --q-bits 1)")
    p.add_argument("--trials", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("info", help="print derived quantities of a configuration")
    p.add_argument("config", nargs="?")
    return parser


def _apply_flags(cfg: SimConfig, args) -> SimConfig:
    over = {}
    if args.snr_db is not None:
        over["snr_db"] = parse_snr_list(args.snr_db)
    for name in ("trials", "seed", "workers"):
        if getattr(args, name) is not None:
            over[name] = getattr(args, name)
    if args.detector is not None:
        if args.detector == "coherent":
            over["scheme"] = "coherent"
        over["detector"] = args.detector
    return config_from_dict({**asdict(cfg), **over})


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="ascii", newline="") as fh:
            fh.write(text)


def _cmd_run(cfg, args):
    records = sweep(cfg)
    if args.out is None:
        sys.stdout.write(csv_text(records))
    else:
        emit_csv(records, args.out)
    for r in records:
        print(f"# snr {r.snr_db:g} dB: ber={r.ber:.4g} ser={r.ser:.4g} ({r.trials} trials, {r.wall_time:.1f} s)",
              file=sys.stderr)


def _cmd_simulate(args):
    return _cmd_run(_apply_flags(load_config(args.config), args), args)


def _cmd_sweep(args):
    base = load_config(args.config) if args.config else SimConfig()
    data = asdict(base)
    keys = set()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key = key.strip()
        keys.add(key)
        if key.startswith("channel."):
            data["channel"] = {**data["channel"], key.split(".", 1)[1]: float(value)}
        else:
            data[key] = _parse_value(value.strip())
    if "scheme" in keys and "detector" not in keys:
        data["detector"] = None
    return _cmd_run(_apply_flags(config_from_dict(data), args), args)


def _cmd_calibrate(args):
    if args.vql and args.q_bits != 1:
        raise ConfigError("--vql requires --q-bits 1")
    if not args.vql and args.q_bits == 1:
        raise ConfigError("one-bit energy statistics are constant; use --q-bits 2 or --vql")
    rows = threshold_table(_int_list(args.U), parse_snr_list(args.snr_db), args.a, args.q_bits, args.vql,
                           args.seed, args.trials)
    lines = ["U,snr_db,gamma_mc,gamma_analytic"]
    lines += [f"{U},{snr!r},{g!r},{ga!r}" for U, snr, g, ga in rows]
    _write("\n".join(lines) + "\n", args.out)


def _cmd_info(args):
    cfg = load_config(args.config) if args.config else SimConfig().validate()
    ctx = prepare(replace(cfg, calibration_trials=max(cfg.calibration_trials, 10**4)))
    spec = cfg.channel_spec()
    print(f"scheme={cfg.scheme} mode={cfg.mode} detector={cfg.detector} U={cfg.U} K={cfg.K} N={cfg.N} M={cfg.M}")
    print(f"taps L={spec.num_taps}")
    print("pdp=" + ",".join(f"{p:.6g}" for p in spec.pdp))
    if cfg.mode == "ofdm":
        print(f"cyclic prefix={cfg.cp_len}")
    eta, eps = dap._bussgang_pair(ctx.quantizer)
    print(f"eta={eta:.6g} sigma_eps2={eps:.6g}")
    print(f"information bits per frame={cfg.bits_per_frame} data fraction={cfg.data_fraction:.6g}")
    for snr in sorted(set(cfg.snr_db)):
        sz = 0.0 if snr == math.inf else 10.0 ** (-snr / 10.0)
        rhos = dap.rho_set(eta, eps, sz / (1 + sz), cfg.a)
        line = f"snr={snr:g} dB rho_set=" + ",".join(f"{r:.6g}" for r in rhos)
        if snr in ctx.thresholds:
            line += f" gamma={ctx.thresholds[snr]:.6g}"
        print(line)


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "calibrate-threshold": _cmd_calibrate,
    "info": _cmd_info,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
