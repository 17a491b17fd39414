"""
Subcommand handlers
Each handler reads its inputs, runs one pipeline stage and writes results through the ResultStore;
it returns the input files the manifest checksums
"""

import logging
import os
from typing import List, Optional

import pandas as pd

from src.core.config import EventStudyConfig, McmcConfig, SdidConfig
from src.core.errors import ConfigError, EffectsError, SpatialWeightsError
from src.core.results import ResultStore, read_json
from src.dsdm import DsdmFit, DsdmSpec, fit_bayes, fit_mle, fit_qmle
from src.effects import effects_table, effects_uncertainty
from src.netrisk import binarize, coupling_matrix, edge_list, graph_summary
from src.panel import (PanelDataset, PanelSchema, SampleFilter, apply_filter, build_treatment_for_quarters,
                       default_keywords, infer_schema, ingest_panel, load_keywords, mentions_from_corpus,
                       summary_statistics, winsorize_panel, write_panel)
from src.sdid import event_study, fit_sdid, placebo_random, placebo_shift, problem_from_panel, size_split_table
from src.simulate import DgpSpec, gen_dsdm, gen_sdid, ring_weights
from src.spatial import (WeightMatrix, geographic_weights, load_weights, network_weights, write_weights)

LOGGER = logging.getLogger(__name__)


def read_panel(path: str, schema_path: Optional[str] = None, sep: str = ",") -> PanelDataset:
    """Panel from a delimited file; without a schema every extra column is read as a control"""
    schema = PanelSchema.from_json(schema_path) if schema_path else infer_schema(path, sep)
    return ingest_panel(path, schema, sep=sep)


def resolve_weights(choice: str, panel: Optional[PanelDataset], inputs: List[str], bandwidth: Optional[float] = None,
                    normalize: bool = True, panel_path: Optional[str] = None) -> WeightMatrix:
    """'network', 'geographic', 'ring', 'auto' or the path of a custom matrix.

    'auto' takes the weights.csv written beside the panel (as simulate does) and
    falls back to network weights.
    """
    if choice == "auto":
        beside = os.path.join(os.path.dirname(os.path.abspath(panel_path)), "weights.csv") if panel_path else None
        if beside and os.path.exists(beside):
            LOGGER.info("Using %s found beside the panel", beside)
            inputs.append(beside)
            return load_weights(beside, normalize=normalize)
        choice = "network"
    if choice == "network":
        if panel is None or panel.avg_log_assets is None:
            raise SpatialWeightsError("network weights need average log assets in the panel")
        return network_weights(panel.avg_log_assets, bandwidth, labels=panel.entity_ids)
    if choice == "geographic":
        if panel is None or panel.coordinates is None:
            raise SpatialWeightsError("geographic weights need latitude and longitude in the panel")
        return geographic_weights(panel.coordinates, labels=panel.entity_ids)
    if choice == "ring":
        if panel is None:
            raise SpatialWeightsError("ring weights need a panel")
        return ring_weights(panel.n_entities, 2)
    if not os.path.exists(choice):
        raise SpatialWeightsError(f"Weights '{choice}' is neither a built-in kind nor an existing file")
    inputs.append(choice)
    return load_weights(choice, normalize=normalize)


def _weights_report(weights: WeightMatrix) -> dict:
    lower, upper = weights.rho_bounds()
    return {
        "kind": weights.kind,
        "n": weights.n,
        "checksum": weights.checksum,
        "rho_bounds": [lower, upper],
        "min_eigenvalue": float(weights.eigenvalues.real.min()),
    }


def cmd_ingest(args, store: ResultStore) -> List[str]:
    inputs = [args.input] + ([args.schema] if args.schema else [])
    schema = PanelSchema.from_json(args.schema) if args.schema else PanelSchema()
    panel = ingest_panel(args.input, schema, sep=args.sep, treatment_mode=args.treatment,
                         earliest_quarter=args.earliest_quarter)
    if args.corpus:
        dictionary = load_keywords(args.keywords) if args.keywords else default_keywords()
        if args.keywords:
            inputs.append(args.keywords)
        mentions = mentions_from_corpus(args.corpus, dictionary, panel.entity_ids, panel.quarters)
        assignment = build_treatment_for_quarters(mentions, panel.quarters, args.treatment, args.earliest_quarter)
        panel = panel.replace(mentions=mentions, treatment=assignment.indicator, excluded=assignment.excluded)
    # Percentiles are taken over the filtered sample
    panel = apply_filter(panel, SampleFilter(min_quarters=args.min_quarters,
                                             required_fields=tuple(panel.outcomes)))
    if args.winsorize:
        panel = winsorize_panel(panel, lower_pct=args.winsor_limits[0], upper_pct=args.winsor_limits[1])
    panel_path, missing_path = write_panel(panel, store.path("panel.csv"), sep=args.sep)
    store.track(panel_path)
    store.track(missing_path)
    store.record_table("summary_statistics.csv", summary_statistics(panel), index=True)
    store.record_json("ingest.json", {
        "n_entities": panel.n_entities,
        "n_quarters": panel.n_quarters,
        "quarters": [panel.quarters[0], panel.quarters[-1]],
        "filter_report": panel.metadata.get("filter_report", {}),
        "winsorized": bool(args.winsorize),
    })
    return inputs


def cmd_weights(args, store: ResultStore) -> List[str]:
    inputs = []
    panel = None
    if args.panel:
        inputs.append(args.panel)
        panel = read_panel(args.panel, args.schema, args.sep)
    choice = args.input if args.kind == "custom" else args.kind
    if choice is None:
        raise SpatialWeightsError("--kind custom needs --input")
    weights = resolve_weights(choice, panel, inputs, args.bandwidth, normalize=not args.no_normalize)
    store.track(write_weights(weights, store.path("weights.csv")))
    store.record_json("weights.json", _weights_report(weights))
    return inputs


def cmd_dsdm(args, store: ResultStore) -> List[str]:
    inputs = [args.panel]
    panel = read_panel(args.panel, args.schema, args.sep)
    weights = resolve_weights(args.weights, panel, inputs, args.bandwidth, normalize=not args.no_normalize,
                              panel_path=args.panel)
    controls = tuple(c for c in (args.controls or "").split(",") if c)
    spec = DsdmSpec(args.outcome, weights, controls, args.fixed_effects, args.estimator, args.bias_correction)
    if args.estimator == "bayes":
        cfg = McmcConfig(iterations=args.iterations, burn_in=args.burn_in, seed=args.seed,
                         step_sizes={"rho": args.rho_step}, adapt=not args.no_adapt)
        fit = fit_bayes(spec, panel, cfg)
    elif args.estimator == "qmle":
        fit = fit_qmle(spec, panel)
    else:
        fit = fit_mle(spec, panel)
    payload = fit.to_dict()
    payload["weights_file"] = "weights.csv"
    used = weights.restrict(panel.entity_ids) if weights.labels is not None else weights
    store.track(write_weights(used, store.path("weights.csv")))
    store.record_json("fit.json", payload)
    store.record_table("fit_table.csv", fit.table())
    if args.draws and fit.draws is not None:
        store.record_table("draws.csv", pd.DataFrame(fit.draws, columns=fit.param_names))
    return inputs


def cmd_effects(args, store: ResultStore) -> List[str]:
    inputs = [args.fit]
    directory = os.path.dirname(os.path.abspath(args.fit))
    payload = read_json(args.fit)
    draws = None
    draws_path = os.path.join(directory, "draws.csv")
    if payload.get("estimator") == "bayes" and os.path.exists(draws_path):
        inputs.append(draws_path)
        draws = pd.read_csv(draws_path)[payload["param_names"]].to_numpy(dtype=float)
    fit = DsdmFit.from_dict(payload, draws)
    weights_path = args.weights or os.path.join(directory, payload.get("weights_file", "weights.csv"))
    if not os.path.exists(weights_path):
        raise EffectsError(f"Weight matrix {weights_path} not found; pass --weights")
    inputs.append(weights_path)
    weights = load_weights(weights_path, normalize=False)
    if fit.weights_checksum and weights.checksum != fit.weights_checksum:
        raise EffectsError(f"Weight matrix {weights_path} differs from the one the fit used")
    decomposition = effects_uncertainty(fit, weights, reps=args.reps, seed=args.seed, method=args.method)
    store.record_json("effects.json", decomposition.to_dict())
    store.record_table("effects_table.csv", effects_table(decomposition))
    return inputs


def _sdid_config(args) -> SdidConfig:
    return SdidConfig(outcome=args.outcome, t0=args.t0, bootstrap=args.bootstrap, seed=args.seed,
                      zeta_unit=args.zeta_unit, zeta_time=args.zeta_time, intercept=args.with_intercept,
                      n_jobs=args.workers)


def _parse_horizons(text: str) -> tuple:
    """'-4:4' or a comma list '-2,0,3'"""
    try:
        if ":" in text:
            start, end = (int(x) for x in text.split(":"))
            return tuple(range(start, end + 1))
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"Cannot read horizons '{text}'; use 'start:end' or a comma list")


def _sdid_fit(args, store: ResultStore, panel: PanelDataset):
    config = _sdid_config(args)
    result = fit_sdid(problem_from_panel(panel, config), config.bootstrap, config.seed, config.n_jobs)
    payload = result.to_dict()
    payload["outcome"] = config.outcome
    payload["t0"] = config.t0
    store.record_json("sdid.json", payload)
    units, periods = result.weights_frame()
    store.record_table("unit_weights.csv", units)
    store.record_table("time_weights.csv", periods)
    if result.bootstrap_draws.size:
        store.record_table("bootstrap_draws.csv", pd.DataFrame({"att": result.bootstrap_draws}))
    if args.size_split and panel.avg_log_assets is not None:
        table = size_split_table(panel, config)
    else:
        table = pd.DataFrame([["Full Sample", result.att, result.se, result.ci_lower, result.ci_upper,
                               result.n_treated, result.n_control]],
                             columns=["group", "att", "se", "ci_lower", "ci_upper", "n_treated", "n_control"])
    store.record_table("att_table.csv", table)


def _sdid_event_study(args, store: ResultStore, panel: PanelDataset):
    config = EventStudyConfig(outcome=args.outcome, horizons=_parse_horizons(args.horizons),
                              earliest_quarter=args.earliest_quarter, bootstrap=args.bootstrap, seed=args.seed,
                              zeta_unit=args.zeta_unit, zeta_time=args.zeta_time, n_jobs=args.workers)
    result = event_study(panel, config)
    store.record_table("event_study.csv", result.to_frame())
    store.record_json("event_study.json", {"cohort_sizes": result.cohort_sizes, "bootstrap": result.bootstrap,
                                           "series": result.to_frame().to_dict(orient="list")})


def _sdid_placebo(args, store: ResultStore, panel: PanelDataset):
    config = _sdid_config(args)
    if args.random:
        distribution = placebo_random(panel, config, reps=args.reps, seed=args.seed)
        store.record_json("placebo_random.json", distribution.to_dict())
        store.record_table("placebo_draws.csv", pd.DataFrame({"att": distribution.draws}))
        return
    if not args.shift:
        raise ConfigError("placebo needs --shift QUARTER or --random")
    result = placebo_shift(panel, args.shift, config)
    payload = result.to_dict()
    payload["fake_t0"] = args.shift
    payload["true_t0"] = config.t0
    store.record_json("placebo_shift.json", payload)
    units, periods = result.weights_frame()
    store.record_table("placebo_unit_weights.csv", units)
    store.record_table("placebo_time_weights.csv", periods)


SDID_ACTIONS = {"fit": _sdid_fit, "event-study": _sdid_event_study, "placebo": _sdid_placebo}


def cmd_sdid(args, store: ResultStore) -> List[str]:
    panel = read_panel(args.panel, args.schema, args.sep)
    SDID_ACTIONS[args.action](args, store, panel)
    return [args.panel] + ([args.schema] if args.schema else [])


def cmd_placebo(args, store: ResultStore) -> List[str]:
    args.action = "placebo"
    return cmd_sdid(args, store)


def _overlap(value: str, inputs: List[str]):
    if os.path.exists(value):
        inputs.append(value)
        return pd.read_csv(value, header=None).to_numpy(dtype=float)
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"--overlap must be a number or a matrix file, got '{value}'")


def cmd_netrisk(args, store: ResultStore) -> List[str]:
    inputs = [args.panel]
    panel = read_panel(args.panel, args.schema, args.sep)
    weights = resolve_weights(args.weights, panel, inputs, args.bandwidth, normalize=not args.no_normalize)
    threshold = None if args.threshold == "auto" else float(args.threshold)
    adoption = panel.ever_treated & ~panel.excluded
    graph = binarize(weights, threshold, adoption, panel.avg_log_assets)
    store.record_json("graph_stats.json", graph_summary(graph))
    store.record_table("edges.csv", edge_list(graph, weights))
    if args.coupling_delta is not None:
        matrix, summary = coupling_matrix(args.coupling_base, args.coupling_delta, adoption.astype(int),
                                          _overlap(args.overlap, inputs))
        store.record_json("coupling.json", summary)
        store.record_table("coupling_matrix.csv",
                           pd.DataFrame(matrix, index=panel.entity_ids, columns=panel.entity_ids), index=True)
    return inputs


def cmd_simulate(args, store: ResultStore) -> List[str]:
    inputs = []
    weights = None
    if args.kind == "dsdm":
        if args.weights == "ring":
            weights = ring_weights(args.n, args.neighbours)
        else:
            inputs.append(args.weights)
            weights = load_weights(args.weights)
    gamma = tuple(float(g) for g in args.gamma.split(",")) if args.gamma else ()
    spec = DgpSpec(n=args.n, t=args.t, tau=args.tau, rho=args.rho, eta=args.eta, beta=args.beta,
                   theta=args.theta, gamma=gamma, sigma=args.sigma, weights=weights, fe_scale=args.fe_scale,
                   treatment=args.treatment, treat_share=args.treat_share, t0=args.t0,
                   sdid_variant=args.variant, effect=args.effect, trend_scale=args.trend_scale,
                   cohorts=args.cohorts, errors=args.errors, burn_in=args.burn_in, seed=args.seed,
                   start_quarter=args.start_quarter, outcome=args.outcome)
    panel = gen_dsdm(spec) if args.kind == "dsdm" else gen_sdid(spec)
    panel_path, missing_path = write_panel(panel, store.path("panel.csv"))
    store.track(panel_path)
    store.track(missing_path)
    store.record_json("truth.json", panel.metadata["truth"])
    if weights is not None:
        store.track(write_weights(spec.weight_matrix(), store.path("weights.csv")))
    return inputs


COMMANDS = {
    "ingest": cmd_ingest,
    "weights": cmd_weights,
    "dsdm": cmd_dsdm,
    "effects": cmd_effects,
    "sdid": cmd_sdid,
    "placebo": cmd_placebo,
    "netrisk": cmd_netrisk,
    "simulate": cmd_simulate,
}
