"""Command-line interface.

Subcommands: ``design-quant``, ``run``, ``crb-sweep``, ``analysis``. Every
subcommand accepts ``--config FILE`` (flat key=value lines) with explicit
flags taking precedence. Exit codes: 0 success, 1 usage error, 2 some
trials failed (results for the rest were still written), 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError, ConvergenceError, DegenerateInputError, QprError
from .config import build_config
from .runner import (
    EXIT_NUMERICAL,
    EXIT_USAGE,
    analysis_tables,
    crb_sweep,
    design_quant,
    run_experiment,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _csv_floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _csv_ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--seed", type=int, help="base seed (trials derive from it)")
    p.add_argument("--no-plot", dest="plot", action="store_false", default=None,
                   help="skip figure rendering")
    p.add_argument("--k", type=int, help="quantizer levels")
    p.add_argument("--kind", dest="quantizer_kind", choices=("eq", "lmq"),
                   help="quantizer design")
    p.add_argument("--saturation", choices=("wide", "narrow"),
                   help="saturation symbol rule: wide = last threshold + 2*precision, "
                        "narrow = + precision/2")


def build_parser() -> _Parser:
    parser = _Parser(prog="qprkit",
                     description="Phase retrieval from k-level quantized intensities")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-quant", parents=[], help="design and export a quantizer")
    _add_common(p)

    p = sub.add_parser("run", help="multi-trial reconstruction experiment")
    _add_common(p)
    p.add_argument("--algos", dest="algorithms", type=_csv_list,
                   help="comma list; entries may pin a quantizer, e.g. qpr-a@eq,pl-a@lmq")
    p.add_argument("--n", type=int, help="signal dimension")
    p.add_argument("--m", type=int, help="measurement count (default 10n)")
    p.add_argument("--trials", dest="n_trials", type=int)
    p.add_argument("--iters", dest="n_iter", type=int)
    p.add_argument("--sigma-xi", dest="sigma_xi", type=float,
                   help="noise std before quantization")
    p.add_argument("--sparsity", type=int, help="thresholding level for sqpr/sqpr-a")
    p.add_argument("--truth", choices=("sphere", "sparse", "two-sinusoid"))
    p.add_argument("--truth-sparsity", dest="truth_sparsity", type=int)

    p = sub.add_parser("crb-sweep", help="reconstruction MSE versus the information bound")
    _add_common(p)
    p.add_argument("--algos", dest="algorithms", type=_csv_list)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--iters", dest="n_iter", type=int)
    p.add_argument("--snr-grid", dest="snr_grid", type=_csv_floats,
                   help="input SNR grid in dB, e.g. 25,30,35")
    p.add_argument("--ensembles", dest="n_ensembles", type=int)
    p.add_argument("--noise-draws", dest="n_noise", type=int)
    p.add_argument("--truth", choices=("sphere", "sparse", "two-sinusoid"))

    p = sub.add_parser("analysis", help="distinguishability and robustness tables")
    _add_common(p)
    p.add_argument("--tau", dest="tau_penultimate", type=float,
                   help="fixed last finite threshold for the sweep table")
    p.add_argument("--delta-grid", dest="delta_grid", type=_csv_floats)
    p.add_argument("--rho-grid", dest="rho_grid", type=_csv_floats)
    p.add_argument("--eps", type=float, help="target overall failure probability")
    p.add_argument("--robust-k", dest="robust_k", type=_csv_ints)
    p.add_argument("--sigma-sq-grid", dest="sigma_sq_grid", type=_csv_floats)
    p.add_argument("--robust-trials", dest="robust_trials", type=int)
    return parser


_COMMANDS = {
    "design-quant": design_quant,
    "run": run_experiment,
    "crb-sweep": crb_sweep,
    "analysis": analysis_tables,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    try:
        cfg = build_config(ns.config, overrides)
        return _COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"qprkit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, DegenerateInputError, FloatingPointError) as exc:
        print(f"qprkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QprError as exc:
        print(f"qprkit: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:
    raise SystemExit(main())
