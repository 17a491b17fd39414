"""
Command-line entry point: parser, logging setup and error reporting
"""

import argparse
import logging
import sys
import warnings
from typing import List, Optional

from src.core.config import RunConfig, default_log_level, default_workers
from src.core.errors import BankSpillError, EstimationWarning
from src.core.results import ResultStore
from .commands import COMMANDS

LOGGER = logging.getLogger(__name__)

# Options excluded from the manifest's config hash: they do not change results
RUNTIME_OPTIONS = ("out", "verbose", "quiet", "workers", "handler")

# Option values that start with '-' and would otherwise read as flags
NEGATIVE_VALUE_OPTIONS = ("--horizons",)


def configure_logging(level: str):
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="results", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, default=42, help="random seed (default: %(default)s)")
    common.add_argument("--workers", type=int, default=default_workers(),
                        help="parallel workers, -1 for all cores (default: BANKSPILL_WORKERS or 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return common


def _panel_options() -> argparse.ArgumentParser:
    panel = argparse.ArgumentParser(add_help=False)
    panel.add_argument("--panel", required=True, help="canonical panel file written by ingest or simulate")
    panel.add_argument("--schema", help="JSON schema mapping canonical names to columns")
    panel.add_argument("--sep", default=",", help="field delimiter (default: %(default)r)")
    return panel


def _weight_options(parser: argparse.ArgumentParser, default: str = "network"):
    parser.add_argument("--weights", default=default,
                        help="network, geographic, ring, a weight-matrix file, or auto for the weights.csv "
                             "beside the panel, else network (default: %(default)s)")
    parser.add_argument("--bandwidth", type=float, help="network kernel bandwidth (default: SD of avg log assets)")
    parser.add_argument("--no-normalize", action="store_true", help="accept a pre-normalized custom matrix")


def _sdid_options(parser: argparse.ArgumentParser):
    parser.add_argument("--outcome", type=str.upper, default="ROE", choices=["ROA", "ROE"],
                        help="outcome variable (default: %(default)s)")
    parser.add_argument("--t0", default="2023Q1", help="treatment-start quarter (default: %(default)s)")
    parser.add_argument("--bootstrap", type=int, default=200, help="bootstrap replications (default: %(default)s)")
    parser.add_argument("--zeta-unit", type=float, help="unit-weight regularization (default: data-driven)")
    parser.add_argument("--zeta-time", type=float, help="time-weight regularization (default: data-driven)")
    parser.add_argument("--with-intercept", action="store_true", help="allow an intercept in the weight programs")
    parser.add_argument("--shift", help="placebo: fake treatment quarter")
    parser.add_argument("--random", action="store_true", help="placebo: random reassignment of treatment")
    parser.add_argument("--reps", type=int, default=500, help="random placebo replications (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bankspill",
                                     description="Spatial spillover and synthetic DiD estimation for bank panels")
    sub = parser.add_subparsers(dest="command", required=True)
    common, panel = _common_options(), _panel_options()

    ingest = sub.add_parser("ingest", parents=[common], help="read, filter and winsorize a raw panel")
    ingest.add_argument("--input", required=True, help="delimited file, one row per entity-quarter")
    ingest.add_argument("--schema", help="JSON schema mapping canonical names to columns")
    ingest.add_argument("--sep", default=",", help="field delimiter (default: %(default)r)")
    ingest.add_argument("--treatment", default="absorbing", choices=["absorbing", "raw"],
                        help="treatment rule for mention counts (default: %(default)s)")
    ingest.add_argument("--earliest-quarter", help="mentions before this quarter mark an entity as excluded")
    ingest.add_argument("--corpus", help="directory of <entity>_<quarter>.txt documents to count mentions in")
    ingest.add_argument("--keywords", help="keyword dictionary (default: data/keywords.txt)")
    ingest.add_argument("--winsorize", action="store_true", help="winsorize outcomes")
    ingest.add_argument("--winsor-limits", type=float, nargs=2, default=[1.0, 99.0], metavar=("LOW", "HIGH"),
                        help="winsorization percentiles (default: 1 99)")
    ingest.add_argument("--min-quarters", type=int, default=4,
                        help="minimum observed quarters per entity (default: %(default)s)")

    weights = sub.add_parser("weights", parents=[common], help="build and validate a spatial weight matrix")
    weights.add_argument("--kind", default="network", choices=["network", "geographic", "ring", "custom"],
                         help="weight construction (default: %(default)s)")
    weights.add_argument("--input", help="custom weight-matrix file")
    weights.add_argument("--panel", help="panel supplying assets or coordinates")
    weights.add_argument("--schema", help="JSON schema for the panel")
    weights.add_argument("--sep", default=",", help="field delimiter (default: %(default)r)")
    weights.add_argument("--bandwidth", type=float, help="network kernel bandwidth")
    weights.add_argument("--no-normalize", action="store_true", help="accept a pre-normalized custom matrix")

    dsdm = sub.add_parser("dsdm", parents=[common, panel], help="fit the dynamic spatial Durbin model")
    dsdm.add_argument("--outcome", type=str.upper, default="ROE", choices=["ROA", "ROE"],
                      help="outcome variable (default: %(default)s)")
    _weight_options(dsdm, default="auto")
    dsdm.add_argument("--controls", default="", help="comma-separated control names")
    dsdm.add_argument("--fixed-effects", default="both", choices=["entity", "time", "both"],
                      help="fixed effects absorbed by demeaning (default: %(default)s)")
    dsdm.add_argument("--estimator", default="mle", choices=["mle", "qmle", "bayes"],
                      help="estimator (default: %(default)s)")
    dsdm.add_argument("--bias-correction", default="none", choices=["none", "analytic"],
                      help="fixed-effect bias correction of mle/qmle estimates (default: %(default)s)")
    dsdm.add_argument("--iterations", type=int, default=10000, help="MCMC iterations (default: %(default)s)")
    dsdm.add_argument("--burn-in", type=int, default=5000, help="MCMC burn-in (default: %(default)s)")
    dsdm.add_argument("--rho-step", type=float, default=0.05, help="rho proposal scale (default: %(default)s)")
    dsdm.add_argument("--no-adapt", action="store_true", help="keep the rho proposal scale fixed")
    dsdm.add_argument("--draws", action="store_true", help="write posterior draws to draws.csv")

    effects = sub.add_parser("effects", parents=[common], help="direct, indirect and total effects of a fit")
    effects.add_argument("--fit", required=True, help="fit.json written by dsdm")
    effects.add_argument("--weights", help="weight matrix (default: the one beside fit.json)")
    effects.add_argument("--reps", type=int, default=1000, help="simulation draws (default: %(default)s)")
    effects.add_argument("--method", choices=["delta", "posterior_sim"],
                         help="uncertainty method (default: posterior_sim for bayes fits, else delta)")

    sdid = sub.add_parser("sdid", parents=[common, panel], help="synthetic difference-in-differences")
    sdid.add_argument("action", nargs="?", default="fit", choices=["fit", "event-study", "placebo"],
                      help="analysis to run (default: %(default)s)")
    _sdid_options(sdid)
    sdid.add_argument("--horizons", default="-4:4", help="event-study horizons (default: %(default)s)")
    sdid.add_argument("--earliest-quarter", help="event study: ignore cohorts adopting before this quarter")
    sdid.add_argument("--no-size-split", dest="size_split", action="store_false",
                      help="skip the large/small size groups in the ATT table")

    placebo = sub.add_parser("placebo", parents=[common, panel], help="placebo tests for the SDID design")
    _sdid_options(placebo)

    netrisk = sub.add_parser("netrisk", parents=[common, panel], help="network topology statistics")
    _weight_options(netrisk)
    netrisk.add_argument("--threshold", default="auto", help="edge threshold or 'auto' (median positive weight)")
    netrisk.add_argument("--coupling-base", type=float, default=0.0, help="baseline correlation (default: 0)")
    netrisk.add_argument("--coupling-delta", type=float, help="extra correlation between adopter pairs")
    netrisk.add_argument("--overlap", default="1.0", help="vendor overlap: a number or an N x N file (default: 1.0)")

    simulate = sub.add_parser("simulate", parents=[common], help="generate a synthetic panel with known truth")
    simulate.add_argument("kind", choices=["dsdm", "sdid"], help="data-generating process")
    simulate.add_argument("--n", type=int, default=50, help="entities (default: %(default)s)")
    simulate.add_argument("--t", type=int, default=40, help="retained quarters (default: %(default)s)")
    for name in ("tau", "rho", "eta", "beta", "theta"):
        simulate.add_argument(f"--{name}", type=float, default=0.0, help=f"{name} (default: 0)")
    simulate.add_argument("--gamma", default="", help="comma-separated control coefficients")
    simulate.add_argument("--sigma", type=float, default=1.0, help="innovation SD (default: %(default)s)")
    simulate.add_argument("--fe-scale", type=float, default=0.0, help="SD of fixed effects (default: 0)")
    simulate.add_argument("--weights", default="ring", help="ring or a weight-matrix file (default: ring)")
    simulate.add_argument("--neighbours", type=int, default=2, help="ring neighbours per side (default: 2)")
    simulate.add_argument("--treatment", default="random", choices=["none", "random", "selection"],
                          help="treatment rule (default: %(default)s)")
    simulate.add_argument("--treat-share", type=float, default=0.5, help="treated share (default: %(default)s)")
    simulate.add_argument("--t0", type=int, help="treatment-onset column (default: T/2)")
    simulate.add_argument("--variant", default="parallel", choices=["parallel", "trends", "step"],
                          help="SDID outcome variant (default: %(default)s)")
    simulate.add_argument("--effect", type=float, default=0.0, help="true ATT (default: 0)")
    simulate.add_argument("--trend-scale", type=float, default=0.0, help="entity trend scale (default: 0)")
    simulate.add_argument("--cohorts", type=int, default=1, help="staggered cohorts for 'step' (default: 1)")
    simulate.add_argument("--errors", default="normal", choices=["normal", "t5"],
                          help="innovation distribution (default: %(default)s)")
    simulate.add_argument("--burn-in", type=int, default=50, help="discarded periods (default: %(default)s)")
    simulate.add_argument("--start-quarter", default="2015Q1", help="first quarter label (default: %(default)s)")
    simulate.add_argument("--outcome", type=str.upper, default="ROE", choices=["ROA", "ROE"],
                          help="outcome name (default: %(default)s)")
    return parser


def _join_negative_values(argv: List[str]) -> List[str]:
    """'--horizons -4:4' -> '--horizons=-4:4'"""
    joined = []
    i = 0
    while i < len(argv):
        if argv[i] in NEGATIVE_VALUE_OPTIONS and i + 1 < len(argv):
            joined.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
            continue
        joined.append(argv[i])
        i += 1
    return joined


def run_config(args) -> RunConfig:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in RUNTIME_OPTIONS}
    if args.verbose:
        level = "DEBUG"
    elif args.quiet:
        level = "WARNING"
    else:
        level = default_log_level()
    return RunConfig(command=args.command, params=params, seed=args.seed, output_dir=args.out,
                     log_level=level, workers=args.workers)


def run(argv: Optional[List[str]] = None) -> int:
    """Execute one subcommand; 0 on success, 1 on a BankSpill error, 2 on a usage error"""
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(list(sys.argv[1:] if argv is None else argv)))
    except SystemExit as exc:
        return int(exc.code or 0)
    config = run_config(args)
    configure_logging(config.log_level)

    try:
        store = ResultStore(config.output_dir)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", EstimationWarning)
            inputs = COMMANDS[config.command](args, store)
        notes = []
        for warning in caught:
            LOGGER.warning("%s", warning.message)
            notes.append(str(warning.message))
        params = dict(config.params)
        params["warnings"] = notes
        store.record_manifest(config.command, params, inputs)
    except BankSpillError as exc:
        print(exc.structured(), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[cli]: {exc}", file=sys.stderr)
        return 1
    LOGGER.info("%s finished; results in %s", config.command, store.output_dir)
    return 0
