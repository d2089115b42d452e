"""Command-line front end.

Every option can also come from a flat JSON config file (``--config``); keys
are the option names with dashes replaced by underscores.  Flags given on the
command line override the file, which overrides built-in defaults.  Results go
to files or stdout as JSON/CSV; progress and summaries go to stderr.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy

from . import __version__
from .data_io import (
    FORMATS, GENERATORS, DataFormatError, default_generator, generate_synthetic, load_dataset, save_dataset,
)
from .evaluation import (
    make_splits, projection_scatter, recall_vs_fraction_curve, run_benchmark_suite, split_records, write_csv,
    write_jsonl,
)
from .methods import METHODS, MethodConfig, build_index, get_method, search_index
from .permutation import make_rng, worker_count
from .snapshot import SnapshotError, index_bytes, load_index_snapshot, save_index_snapshot
from .spaces import SpaceKind, Space, mu_defectiveness_probe, triangle_violation_rate
from .tuning import tune

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


# option name -> method parameter name
METHOD_FLAGS = {
    "m": "m", "mi": "m_i", "ms": "m_s", "t": "t", "D": "D", "gamma": "gamma", "chunk_size": "chunk_size",
    "bucket_size": "bucket_size", "alpha_left": "alpha_left", "alpha_right": "alpha_right", "beta": "beta",
    "nn": "nn", "attempts": "attempts", "query_attempts": "query_attempts", "mode": "mode", "b": "b",
    "perm_distance": "perm_distance", "metric": "metric",
}

DEFAULTS = {
    "space": "l2", "query_mode": "left", "sqfd_alpha": 1.0, "format": None, "seed": 0, "k": 10, "threads": 1,
    "floor_epsilon": 1e-5, "normalize": True, "limit": None,
    "method": None, "out": None, "stats": None, "index": None, "queries": None, "data": None,
    "splits": 5, "queries_per_split": 1000, "out_jsonl": None, "out_csv": None, "warmup": True,
    "band_low": 0.85, "band_high": 0.95, "num_queries": 50, "sample_size": None,
    "what": None, "pairs": 20_000, "random_share": 0.5, "neighbors": 100, "projector": "permutation",
    "fractions": "0.001,0.01,0.1,1.0", "triples": 100_000,
    "kind": None, "n": 1000, "dim": None, "clusters": None, "spread": None, "alpha": None,
    "mean_length": None, "sd_length": None, "nnz": None,
}


def _gamma(text: str):
    s = str(text)
    return float(s) if any(c in s for c in ".eE") else int(s)


def _opt_int(text: str):
    return None if str(text).lower() in ("none", "inf", "") else int(text)


def _add_method_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("method parameters")
    g.add_argument("--m", type=int, help="number of pivots")
    g.add_argument("--mi", type=int, help="pivots indexed per object (m_i)")
    g.add_argument("--ms", type=_opt_int, help="pivots used per query (m_s)")
    g.add_argument("--t", type=int, help="NAPP minimum shared pivots")
    g.add_argument("--D", type=_opt_int, help="MI-file maximum position difference")
    g.add_argument("--gamma", type=_gamma, help="candidate budget: fraction (0,1] or count")
    g.add_argument("--chunk-size", type=int)
    g.add_argument("--bucket-size", type=int)
    g.add_argument("--alpha-left", type=float)
    g.add_argument("--alpha-right", type=float)
    g.add_argument("--beta", type=int, choices=(1, 2))
    g.add_argument("--nn", type=int, help="SW-graph neighbours per insertion")
    g.add_argument("--attempts", type=int, help="SW-graph insertion restarts")
    g.add_argument("--query-attempts", type=int, help="SW-graph query restarts")
    g.add_argument("--mode", choices=("full", "binary"), help="permfilter representation")
    g.add_argument("--b", type=int, help="binarization threshold")
    g.add_argument("--perm-distance", choices=("spearman", "footrule", "hamming"))
    g.add_argument("--metric", choices=("footrule", "spearman"), help="MI-file accumulator")


def _add_data_flags(p: argparse.ArgumentParser, data_required=True):
    p.add_argument("--data", help="dataset file" + ("" if data_required else " (optional)"))
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--space", choices=[k.value for k in SpaceKind])
    p.add_argument("--query-mode", choices=("left", "right"))
    p.add_argument("--sqfd-alpha", type=float)
    p.add_argument("--floor-epsilon", type=float)
    p.add_argument("--no-normalize", dest="normalize", action="store_const", const=False)
    p.add_argument("--limit", type=int, help="read only the first N records")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat JSON key-value file")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--threads", type=int, help="worker threads for builds (capped by PERMKIT_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permkit", description="Permutation-based k-NN search toolkit.",
                                     argument_default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"permkit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    methods = ", ".join(METHODS)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        _add_common(p)
        return p

    p = command("build", "build an index and write a snapshot")
    _add_data_flags(p)
    p.add_argument("--method", help=methods)
    p.add_argument("--out", help="snapshot path")
    p.add_argument("--stats", help="build statistics JSON path (default: <out>.stats.json)")
    _add_method_flags(p)

    p = command("search", "answer k-NN queries with a saved index")
    _add_data_flags(p)
    p.add_argument("--index", help="snapshot path")
    p.add_argument("--queries", help="query file (same format as the data)")
    p.add_argument("--out", help="JSON-lines output (default stdout)")
    _add_method_flags(p)

    p = command("bench", "run the split-based benchmark for one or more methods")
    _add_data_flags(p)
    p.add_argument("--method", help=f"comma-separated list of: {methods}")
    p.add_argument("--splits", type=int)
    p.add_argument("--queries-per-split", type=int)
    p.add_argument("--out-jsonl")
    p.add_argument("--out-csv")
    p.add_argument("--no-warmup", dest="warmup", action="store_const", const=False)
    _add_method_flags(p)

    p = command("tune", "search method parameters for a target recall band")
    _add_data_flags(p)
    p.add_argument("--method", help=methods)
    p.add_argument("--band-low", type=float)
    p.add_argument("--band-high", type=float)
    p.add_argument("--num-queries", type=int, help="held-out tuning queries")
    p.add_argument("--sample-size", type=int, help="tune on a random sample of this size")
    p.add_argument("--out", help="best-parameter JSON (default stdout)")
    _add_method_flags(p)

    p = command("analyze", "projection scatter, recall-vs-fraction curve, or space diagnostics")
    _add_data_flags(p)
    p.add_argument("--what", choices=("scatter", "curve", "space-diagnostics"))
    p.add_argument("--pairs", type=int)
    p.add_argument("--random-share", type=float)
    p.add_argument("--neighbors", type=int)
    p.add_argument("--projector", choices=("permutation", "random-projection"))
    p.add_argument("--fractions", help="comma-separated candidate fractions")
    p.add_argument("--num-queries", type=int)
    p.add_argument("--triples", type=int)
    p.add_argument("--out", help="output path (default stdout)")
    _add_method_flags(p)

    p = command("generate", "write a synthetic dataset")
    p.add_argument("--kind", choices=GENERATORS)
    p.add_argument("--space", choices=[k.value for k in SpaceKind], help="pick a matching generator")
    p.add_argument("--n", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--spread", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mean-length", type=float)
    p.add_argument("--sd-length", type=float)
    p.add_argument("--nnz", type=int)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", help="dataset path")

    p = command("diagnose", "report the environment and validate a dataset")
    _add_data_flags(p, data_required=False)
    return parser


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_dict(self) -> dict:
        return {"command": self.command, **{k: self.values[k] for k in sorted(self.values)}}


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or any(isinstance(v, (dict, list)) for v in doc.values()):
        raise UsageError("config file must be one flat JSON object of scalar values")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve_config(ns: argparse.Namespace) -> tuple[RunConfig, set[str]]:
    """Merge CLI > config file > defaults; also return the keys given on the command line."""
    cli = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    file_vals = load_config_file(ns.config) if getattr(ns, "config", None) else {}
    known = set(DEFAULTS) | set(METHOD_FLAGS)
    unknown = set(file_vals) - known
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    values = {**DEFAULTS, **{k: v for k, v in file_vals.items()}, **cli}
    if "gamma" in file_vals and "gamma" not in cli and isinstance(values["gamma"], str):
        values["gamma"] = _gamma(values["gamma"])
    return RunConfig(ns.command, values), set(cli)


def method_config(cfg: RunConfig, name: str, explicit: set[str], strict: bool) -> MethodConfig:
    spec = get_method(name)
    accepted = set(spec.build_params) | set(spec.query_params)
    params = {}
    for flag, pname in METHOD_FLAGS.items():
        if flag not in cfg.values:
            continue
        if pname in accepted:
            params[pname] = cfg.values[flag]
        elif strict and flag in explicit:
            raise UsageError(f"--{flag.replace('_', '-')} does not apply to method {name}")
    return MethodConfig(name, params)


def _space(cfg: RunConfig) -> Space:
    return Space(SpaceKind(cfg["space"]), cfg["query_mode"], float(cfg["sqfd_alpha"]))


def _load(cfg: RunConfig, path_key: str = "data"):
    path = cfg.get(path_key)
    if not path:
        raise UsageError(f"--{path_key} is required")
    return load_dataset(path, cfg["format"], cfg["space"], float(cfg["floor_epsilon"]), bool(cfg["normalize"]),
                        cfg["limit"])


def _require(cfg: RunConfig, key: str):
    if cfg.get(key) is None:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    return cfg[key]


def _emit(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _provenance(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "version": __version__}


def _log(msg: str):
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig, explicit: set[str]) -> int:
    mcfg = method_config(cfg, _require(cfg, "method"), explicit, strict=True)
    out = _require(cfg, "out")
    data = _load(cfg)
    space = _space(cfg)
    t0 = time.perf_counter()
    index = build_index(mcfg, data, space, int(cfg["seed"]), cfg["threads"])
    build_ms = 1000.0 * (time.perf_counter() - t0)
    save_index_snapshot(index, out)
    with open(out, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    stats = {"method": mcfg.name, "params": mcfg.resolved(), "build_time_ms": build_ms,
             "index_bytes": index_bytes(index), "num_objects": len(data), "snapshot_sha256": digest,
             **_provenance(cfg)}
    _emit(json.dumps(stats, sort_keys=True, indent=2) + "\n", cfg.get("stats") or f"{out}.stats.json")
    _log(f"built {mcfg.name} on {len(data)} objects in {build_ms:.1f} ms -> {out}")
    return EXIT_OK


def cmd_search(cfg: RunConfig, explicit: set[str]) -> int:
    data = _load(cfg)
    queries = _load(cfg, "queries")
    index = load_index_snapshot(_require(cfg, "index"), data)
    mcfg = method_config(cfg, index.kind, explicit, strict=True)
    k = int(cfg["k"])
    buf = io.StringIO()
    for i in range(len(queries)):
        r = search_index(mcfg, index, queries[i], k)
        buf.write(json.dumps({"query": i, "ids": r.ids.tolist(), "distances": r.distances.tolist(),
                              "distance_computations": int(r.distance_computations)}) + "\n")
    _emit(buf.getvalue(), cfg.get("out"))
    _log(f"answered {len(queries)} queries with {index.kind}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, explicit: set[str]) -> int:
    names = [s.strip() for s in str(_require(cfg, "method")).split(",") if s.strip()]
    if not names:
        raise UsageError("--method needs at least one method name")
    configs = [method_config(cfg, n, explicit, strict=len(names) == 1) for n in names]
    data = _load(cfg)
    space = _space(cfg)
    splits = make_splits(data, int(cfg["splits"]), int(cfg["queries_per_split"]), int(cfg["seed"]))
    reports = run_benchmark_suite(configs, data, space, int(cfg["k"]), splits, int(cfg["seed"]),
                                  bool(cfg["warmup"]), cfg["threads"])
    records = split_records(reports, cfg.to_dict())
    if cfg.get("out_jsonl"):
        write_jsonl(records, cfg["out_jsonl"])
    else:
        sys.stdout.write("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    if cfg.get("out_csv"):
        write_csv(records, cfg["out_csv"])
    for rep in reports:
        s = rep.summary()
        _log(f"{s['method']}: recall={s['recall']} improvement={s['improvement_in_efficiency']} "
             f"failed_splits={s['failed_splits']}")
    return EXIT_OK


def cmd_tune(cfg: RunConfig, explicit: set[str]) -> int:
    name = _require(cfg, "method")
    mcfg = method_config(cfg, name, explicit, strict=True)
    data = _load(cfg)
    if cfg.get("sample_size"):
        size = min(int(cfg["sample_size"]), len(data))
        data = data.subset(np.sort(make_rng(int(cfg["seed"])).choice(len(data), size, replace=False)))
    band = (float(cfg["band_low"]), float(cfg["band_high"]))
    res = tune(name, data, _space(cfg), band, int(cfg["k"]), int(cfg["num_queries"]), mcfg.params,
               int(cfg["seed"]), cfg["threads"])
    doc = {"method": name, "band": list(band), **res.to_dict(), **_provenance(cfg)}
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", cfg.get("out"))
    _log(f"{name}: best {res.params} recall={res.recall:.3f} reached={res.reached}")
    return EXIT_OK


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_analyze(cfg: RunConfig, explicit: set[str]) -> int:
    what = _require(cfg, "what")
    data = _load(cfg)
    space = _space(cfg)
    seed = int(cfg["seed"])
    m = int(cfg.get("m") or 64)
    if what == "scatter":
        pd = cfg.get("perm_distance") or "l2"
        if pd == "hamming":
            raise UsageError("scatter supports l2, footrule or spearman projected distances")
        rows = projection_scatter(data, space, m, int(cfg["pairs"]), float(cfg["random_share"]),
                                  int(cfg["neighbors"]), cfg["projector"], pd, seed, cfg["threads"])
        text = _csv_text(("original", "projected"), rows.tolist())
    elif what == "curve":
        try:
            fractions = [float(f) for f in str(cfg["fractions"]).split(",") if f.strip()]
        except ValueError:
            raise UsageError("--fractions must be comma-separated numbers") from None
        curve = recall_vs_fraction_curve(data, space, m, int(cfg["k"]), fractions, int(cfg["num_queries"]),
                                         cfg.get("perm_distance") or "spearman", seed, cfg["threads"])
        text = _csv_text(("fraction", "candidates", "recall"), curve.rows())
    else:
        n = int(cfg["triples"])
        doc = {"triangle_violation_rate": triangle_violation_rate(data, space, n, seed),
               "mu_identity": mu_defectiveness_probe(data, space, "id", n, seed),
               "mu_sqrt": mu_defectiveness_probe(data, space, "sqrt", n, seed),
               "triples": n, "space": space.to_dict(), **_provenance(cfg)}
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    _emit(text, cfg.get("out"))
    _log(f"analyze {what}: done")
    return EXIT_OK


def cmd_generate(cfg: RunConfig, explicit: set[str]) -> int:
    out = _require(cfg, "out")
    kind = cfg.get("kind") or default_generator(cfg["space"])
    params = {k: cfg[k] for k in ("dim", "clusters", "spread", "alpha", "mean_length", "sd_length", "nnz")
              if cfg.get(k) is not None}
    data = generate_synthetic(kind, int(cfg["n"]), int(cfg["seed"]), **params)
    save_dataset(data, out, cfg.get("format"))
    _log(f"wrote {len(data)} {kind} records to {out}")
    return EXIT_OK


def cmd_diagnose(cfg: RunConfig, explicit: set[str]) -> int:
    doc = {"version": __version__, "python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__, "numba": numba.__version__,
           "PERMKIT_THREADS": os.environ.get("PERMKIT_THREADS"), "effective_threads": worker_count(cfg["threads"])}
    if cfg.get("data"):
        data = _load(cfg)
        space = _space(cfg)
        space.validate(data)
        doc["dataset"] = {"path": cfg["data"], "kind": data.kind.value, "count": len(data), "dim": data.dim,
                          "content_hash": data.content_hash(), "space": space.to_dict()}
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {"build": cmd_build, "search": cmd_search, "bench": cmd_bench, "tune": cmd_tune,
            "analyze": cmd_analyze, "generate": cmd_generate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg, explicit = resolve_config(ns)
        return COMMANDS[ns.command](cfg, explicit)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _log(f"permkit: error: {exc}")
        return EXIT_USAGE
    except (DataFormatError, SnapshotError, FileNotFoundError) as exc:
        _log(f"permkit: data error: {exc}")
        return EXIT_DATA
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        _log(f"permkit: error: {exc}")
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort classification
        _log(f"permkit: internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
