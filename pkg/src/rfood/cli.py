"""Command line entry point: ``rfood {sweep,kernel-verify,spectra-audit,diagnose}``."""

from __future__ import annotations

import argparse
import logging
import sys

from rfood.config import format_config, parse_config
from rfood.errors import ConfigError, DomainError
from rfood.reports import diagnose, kernel_verify, spectral_ratio_report
from rfood.spectra import spectrum_from_text
from rfood.sweep import SweepAborted, run_sweep

log = logging.getLogger("rfood")


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)


def _cmd_sweep(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    log.info("resolved config:\n%s", format_config(cfg).rstrip())
    result = run_sweep(cfg, workers=args.workers)
    _emit(result.to_csv(), args.out)


def _cmd_kernel_verify(args):
    p_values = [int(s) for s in args.p_values.split(",")]
    seed = 0 if args.seed is None else args.seed
    log.info("kernel-verify p=%s n=%d spectrum=%s seed=%d", p_values, args.n, args.spectrum, seed)
    _emit(kernel_verify(p_values, args.n, args.spectrum, seed), args.out)


def _cmd_spectra_audit(args):
    log.info("spectra-audit base=%s shifted=%s tau=%g n=%d b=%g", args.baseline, args.shifted, args.tau, args.n, args.b)
    _emit(spectral_ratio_report(args.baseline, args.shifted, None, tau=args.tau, n=args.n, b=args.b), args.out)


def _cmd_diagnose(args):
    if args.config is not None:
        cfg = parse_config(args.config)
        spectrum, n, p, b, xi = cfg.spectrum, cfg.n, cfg.p, cfg.b, cfg.xi
        m = args.m if args.m is not None else max(cfg.m_values)
    else:
        if args.spectrum is None or args.n is None or args.m is None:
            raise ConfigError("diagnose needs --config or all of --spectrum, --n, --m")
        spectrum, n, p, b, xi, m = args.spectrum, args.n, args.p, args.b, args.xi, args.m
    spec = spectrum_from_text(spectrum, n, p if p is not None else n)
    _emit(diagnose(spec, n, m, b=b, xi=xi), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rfood", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="experiment config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, help="override the master seed")

    p = sub.add_parser("sweep", help="Monte Carlo sweep over m, writes the results CSV")
    common(p, config_required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("kernel-verify", help="closed-form K vs linearized kernel per p")
    common(p)
    p.add_argument("--p-values", default="256,1024,4096")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--spectrum", default="example2")
    p.set_defaults(func=_cmd_kernel_verify)

    p = sub.add_parser("spectra-audit", help="eigenvalue ratio report for two spectrum files")
    common(p)
    p.add_argument("baseline")
    p.add_argument("shifted")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--b", type=float, default=1.0)
    p.set_defaults(func=_cmd_spectra_audit)

    p = sub.add_parser("diagnose", help="benign and high-dimension diagnostics")
    common(p)
    p.add_argument("--spectrum")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=0.5)
    p.set_defaults(func=_cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        args.func(args)
    except (ConfigError, DomainError, SweepAborted, OSError) as err:
        log.error("%s", err)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
