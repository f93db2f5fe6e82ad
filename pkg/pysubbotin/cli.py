import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import typing
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .baselines import copula_transform, quantile_edge_path, quantile_neighborhood, quantile_oracle_tune
from .bench import PRESETS, ExperimentConfig, Scenario, StabilityTuning, experiment_metadata, \
    f1_score, generate, run_experiment, write_results
from .constants.constants import STABILITY_THRESHOLD_SUBBOTIN
from .core import Dataset, as_shape, standardize
from .csv_wrapper import load_csv, load_edge_list, load_json, save_csv, serialize_coefficients, serialize_edge_list, \
    serialize_metadata, serialize_path, serialize_profile, serialize_profiles, to_jsonable, write_text
from .errors import ConfigError, InvalidParameterError, SubbotinError, error_category
from .estimator import CombinationRule, assemble_graph, coefficient_matrix, edge_path, fit_neighborhoods, \
    oracle_tune, parallel_map
from .simgen import GraphKind
from .stability import select_stable_graph, tune

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s: %(message)s"


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    out: Optional[str] = None
    threads: Optional[int] = None

    def __post_init__(self):
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")


def _type_name(tp) -> str:
    return getattr(tp, '__name__', str(tp))


def _convert(value: Any, tp, path: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        members = [a for a in args if a is not type(None)]
        if len(members) == 1:
            return _convert(value, members[0], path)
        # tagged union of dataclasses, e.g. {"kind": "stability", "replicates": 20}
        if not isinstance(value, dict) or 'kind' not in value:
            raise ConfigError(f"{path}: expected an object with a 'kind' key")
        kinds = {m.__name__.lower().replace('tuning', ''): m for m in members}
        kind = value['kind']
        if kind not in kinds:
            raise ConfigError(f"{path}.kind: expected one of {sorted(kinds)}, got {kind!r}")
        return config_from_dict(kinds[kind], {k: v for k, v in value.items() if k != 'kind'}, path)
    if origin in (tuple, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        item_type = args[0] if args else Any
        return tuple(_convert(v, item_type, f"{path}[{k}]") for k, v in enumerate(value))
    if dataclasses.is_dataclass(tp):
        return config_from_dict(tp, value, path)
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(str(value).lower())
        except ValueError:
            raise ConfigError(f"{path}: expected one of {[e.value for e in tp]}, got {value!r}")
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def config_from_dict(cls, data: Any, path: str = "config"):
    """Purpose: builds a configuration dataclass from parsed JSON.

    Args:
        cls: the dataclass type.
        data: a dict whose keys are a subset of the dataclass fields.
        path: dotted location used in error messages.

    returns:
        an instance of cls; nested dataclasses, enums and tuples are converted recursively.

    Raises:
        ConfigError: unknown key, wrong scalar type, or a value the dataclass rejects.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown} for {_type_name(cls)}")
    hints = typing.get_type_hints(cls)
    kwargs = {name: _convert(value, hints[name], f"{path}.{name}") for name, value in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}")
    except InvalidParameterError as e:
        raise ConfigError(f"{path}: {e}")


def config_to_dict(config) -> Dict[str, Any]:
    out = to_jsonable(config)
    if isinstance(config, ExperimentConfig):
        kind = 'stability' if isinstance(config.tuning, StabilityTuning) else 'oracle'
        out['tuning'] = dict(out['tuning'], kind=kind)
    return out


def config_hash(config: Any) -> str:
    document = config_to_dict(config) if dataclasses.is_dataclass(config) else to_jsonable(config)
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_run_config(path: str) -> RunConfig:
    return config_from_dict(RunConfig, load_json(path))


def _metadata(args, argv: Sequence[str], params: Dict[str, Any], seed: Optional[int], **extra) -> Dict[str, Any]:
    return dict({
        "version": __version__,
        "command": args.command,
        "command_line": list(argv),
        "config_hash": config_hash(params),
        "seed": seed,
        "parameters": params,
    }, **extra)


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


def _out_dir(args, default: str) -> Path:
    return Path(args.out or default)


def _parse_lambda(value: str):
    if value == "auto":
        return value
    try:
        lam = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"lambda must be a number or 'auto', got {value!r}")
    if lam < 0:
        raise argparse.ArgumentTypeError(f"lambda can't be negative, got {lam}")
    return lam


def _parse_nu_grid(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"nu must be an even integer or a comma-separated list, got {value!r}")


def cmd_simulate(args, argv) -> int:
    if args.config:
        run = load_run_config(args.config)
        experiment = run.experiment
        out_dir = Path(args.out or run.out or "simulation")
    else:
        if args.p is None or args.n is None:
            raise ConfigError("simulate needs --config or both --p and --n")
        preset = PRESETS[{"subbotin": "table1", "block_maxima": "table2", "pot": "table3"}[args.scenario]]
        overrides = dict(graph_kind=GraphKind(args.graph), nu_true=args.nu[0] if args.nu else 8)
        if args.block_size is not None:
            overrides['block_size'] = args.block_size
        if args.threshold is not None:
            overrides['threshold'] = args.threshold
        experiment = preset(p=args.p, n=args.n, replicates=1, **overrides)
        out_dir = _out_dir(args, "simulation")
    seed = args.seed if args.seed is not None else experiment.seed

    data, truth = generate(experiment, seed)
    save_csv(out_dir / "data.csv", data)
    write_text(out_dir / "truth.csv", serialize_edge_list(truth))
    params = config_to_dict(experiment)
    write_text(out_dir / "metadata.json", serialize_metadata(_metadata(args, argv, params, seed, edges=truth.edge_count)))
    logger.info("wrote %d x %d dataset and %d true edges to %s", data.n, data.p, truth.edge_count, out_dir)
    return 0


def _fit_data(args, data: Dataset) -> Dataset:
    if args.block_size is not None:
        return standardize(copula_transform(data, args.block_size, _threads(args)))
    return standardize(data)


def cmd_fit(args, argv) -> int:
    raw = load_csv(args.data)
    data = _fit_data(args, raw)
    rule = CombinationRule.parse(args.rule)
    threads = _threads(args)
    out_dir = _out_dir(args, "fit")
    quantile = args.quantile
    nu = None
    if quantile is None:
        nu = as_shape(args.nu[0] if args.nu else (2 if args.block_size is not None else 8))
    params = {"data": str(args.data), "nu": None if nu is None else nu.nu, "lambda": args.lambda_,
              "rule": rule.value, "quantile": quantile, "block_size": args.block_size,
              "target_edges": args.target_edges}

    lam = args.lambda_
    if lam == "auto":
        if quantile is None:
            path = edge_path(data, nu, rule=rule, threads=threads)
        else:
            path = quantile_edge_path(data, quantile, rule=rule, threads=threads)
        write_text(out_dir / "path.csv", serialize_path(path))
        if args.target_edges is None:
            write_text(out_dir / "metadata.json", serialize_metadata(_metadata(args, argv, params, None)))
            return 0
        if quantile is None:
            lam, _ = oracle_tune(data, nu, args.target_edges, rule, threads=threads)
        else:
            lam, _ = quantile_oracle_tune(data, quantile, args.target_edges, rule, threads=threads)

    if quantile is None:
        neighborhoods = fit_neighborhoods(data, lam, nu, threads)
    else:
        neighborhoods = parallel_map(lambda i: quantile_neighborhood(data, i, quantile, lam), range(data.p), threads)
    graph = assemble_graph(neighborhoods, rule)
    write_text(out_dir / "edges.csv", serialize_edge_list(graph))
    write_text(out_dir / "coefficients.csv", serialize_coefficients(coefficient_matrix(neighborhoods)))
    write_text(out_dir / "metadata.json",
               serialize_metadata(_metadata(args, argv, params, None, selected_lambda=lam, edges=graph.edge_count)))
    return 0


def cmd_stability(args, argv) -> int:
    if args.quantile is not None:
        raise ConfigError("stability selection tunes the Subbotin model; --quantile is only for fit")
    data = _fit_data(args, load_csv(args.data))
    rule = CombinationRule.parse(args.rule)
    out_dir = _out_dir(args, "stability")
    seed = args.seed if args.seed is not None else 0
    nu_grid = args.nu or [4, 6, 8]
    threshold = args.threshold if args.threshold is not None else STABILITY_THRESHOLD_SUBBOTIN
    lambda_grid = None if args.lambda_ in (None, "auto") else [args.lambda_]
    params = {"data": str(args.data), "nu_grid": nu_grid, "lambda": args.lambda_, "n_lambdas": args.n_lambdas,
              "replicates": args.replicates, "threshold": threshold, "rule": rule.value,
              "block_size": args.block_size}

    choice = tune(data, nu_grid, lambda_grid, args.replicates, threshold, rule, seed, threads=_threads(args),
                  n_lambdas=args.n_lambdas)
    best = next(prof for prof in choice.profiles if prof.nu == choice.nu and prof.lambda_ == choice.lambda_)
    write_text(out_dir / "profile.csv", serialize_profile(best))
    write_text(out_dir / "profiles.csv", serialize_profiles(choice.profiles))
    write_text(out_dir / "edges.csv", serialize_edge_list(select_stable_graph(best, threshold)))
    write_text(out_dir / "metadata.json", serialize_metadata(_metadata(
        args, argv, params, seed, selected_nu=choice.nu.nu, selected_lambda=choice.lambda_,
        edges=choice.graph.edge_count)))
    return 0


def cmd_benchmark(args, argv) -> int:
    if args.config:
        run = load_run_config(args.config)
        experiment = run.experiment
        threads = args.threads or run.threads or experiment.threads
        out_dir = Path(args.out or run.out or experiment.output_path or "benchmark")
    else:
        experiment = PRESETS[args.preset](replicates=args.replicates)
        threads = _threads(args)
        out_dir = _out_dir(args, "benchmark")
    if args.seed is not None:
        experiment = dataclasses.replace(experiment, seed=args.seed)
    experiment = dataclasses.replace(experiment, threads=threads)

    rows = run_experiment(experiment)
    # thread count doesn't change results, so it stays out of the hash
    params = config_to_dict(dataclasses.replace(experiment, threads=1))
    metadata = _metadata(args, argv, params, experiment.seed, experiment=experiment_metadata(experiment))
    write_results(rows, out_dir, metadata)
    return 0


def cmd_score(args, argv) -> int:
    estimate = load_edge_list(args.estimate, args.p)
    truth = load_edge_list(args.truth, args.p)
    f1, tpr, fdr = f1_score(estimate, truth)
    print(f"{f1},{tpr},{fdr}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--nu", type=_parse_nu_grid, help="shape parameter, or a comma-separated grid")
    common.add_argument("--lambda", dest="lambda_", type=_parse_lambda, default="auto", help="penalty or 'auto'")
    common.add_argument("--rule", choices=["and", "or"], default="and")
    common.add_argument("--quantile", type=float, help="fit the quantile graphical model at this level")
    common.add_argument("--block-size", type=int, help="block size for block maxima")
    common.add_argument("--threshold", type=float)
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="pysubbotin",
                                     description="Graph estimation for extremes with the Subbotin graphical model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="generate a benchmark dataset and its truth graph")
    simulate.add_argument("--scenario", choices=[s.value for s in Scenario], default="subbotin")
    simulate.add_argument("--p", type=int)
    simulate.add_argument("--n", type=int)
    simulate.add_argument("--graph", choices=[k.value for k in GraphKind], default=GraphKind.SMALL_WORLD_CLIQUES.value)
    simulate.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", parents=[common], help="estimate a graph from a CSV dataset")
    fit.add_argument("data")
    fit.add_argument("--target-edges", type=int, help="with --lambda auto, pick lambda matching this edge count")
    fit.set_defaults(func=cmd_fit)

    stability = sub.add_parser("stability", parents=[common], help="select (nu, lambda) by stability selection")
    stability.add_argument("data")
    stability.add_argument("--replicates", type=int, default=50)
    stability.add_argument("--n-lambdas", type=int, default=10)
    stability.set_defaults(func=cmd_stability)

    benchmark = sub.add_parser("benchmark", parents=[common], help="run an experiment and write result tables")
    benchmark.add_argument("--preset", choices=sorted(PRESETS), default="table1")
    benchmark.add_argument("--replicates", type=int, default=10)
    benchmark.set_defaults(func=cmd_benchmark)

    score = sub.add_parser("score", parents=[common], help="print f1,tpr,fdr of an edge list against the truth")
    score.add_argument("estimate")
    score.add_argument("truth")
    score.add_argument("--p", type=int, required=True)
    score.set_defaults(func=cmd_score)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, args.log_level))
    try:
        return args.func(args, argv)
    except SubbotinError as e:
        print(f"error: {error_category(e)}: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        print(f"error: internal: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
