"""Registry of search methods: one place that knows how to build and query each index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .dataset import DataSet
from .inverted import build_mifile, build_napp, knn_search_mifile, knn_search_napp
from .permfilter import build_permfilter, knn_search_permfilter
from .results import QueryResult, build_exact, knn_search_exact
from .spaces import Space
from .swgraph import build_swgraph, knn_search_swgraph
from .vptree import PrunerParams, build_vptree, knn_search_vptree


@dataclass(frozen=True)
class MethodSpec:
    name: str
    build: Callable
    search: Callable
    build_params: dict  # name -> default
    query_params: dict
    threaded_build: bool = False


def _vp_search(index, query, k, alpha_left=1.0, alpha_right=1.0, beta=None):
    params = PrunerParams.for_space(index.space, alpha_left, alpha_right)
    if beta is not None:
        params = PrunerParams(alpha_left, alpha_right, int(beta))
    return knn_search_vptree(index, query, k, params)


def _sw_search(index, query, k, query_attempts=None):
    return knn_search_swgraph(index, query, k, attempts=query_attempts)


METHODS: dict[str, MethodSpec] = {
    "bruteforce": MethodSpec("bruteforce", build_exact, knn_search_exact, {}, {}),
    "permfilter": MethodSpec(
        "permfilter", build_permfilter, knn_search_permfilter,
        {"m": 128, "mode": "full", "b": None}, {"gamma": 0.01, "perm_distance": None}, True,
    ),
    "mifile": MethodSpec(
        "mifile", build_mifile, knn_search_mifile,
        {"m": 128, "m_i": 32}, {"gamma": 0.01, "m_s": None, "D": None, "metric": "footrule"}, True,
    ),
    "napp": MethodSpec(
        "napp", build_napp, knn_search_napp,
        {"m": 512, "m_i": 32, "chunk_size": 65536}, {"t": 1, "gamma": None}, True,
    ),
    "vptree": MethodSpec(
        "vptree", build_vptree, _vp_search,
        {"bucket_size": 50}, {"alpha_left": 1.0, "alpha_right": 1.0, "beta": None},
    ),
    "swgraph": MethodSpec(
        "swgraph", build_swgraph, _sw_search,
        {"nn": 10, "attempts": 2}, {"query_attempts": None}, True,
    ),
}


def get_method(name: str) -> MethodSpec:
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None


@dataclass
class MethodConfig:
    """A method name plus parameter overrides; unknown parameters are rejected."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        spec = get_method(self.name)
        bad = set(self.params) - set(spec.build_params) - set(spec.query_params)
        if bad:
            raise ValueError(f"{self.name} does not take parameter(s) {', '.join(sorted(bad))}")

    @property
    def spec(self) -> MethodSpec:
        return get_method(self.name)

    def build_kwargs(self) -> dict:
        spec = self.spec
        return {key: self.params.get(key, d) for key, d in spec.build_params.items()}

    def query_kwargs(self) -> dict:
        spec = self.spec
        return {key: self.params.get(key, d) for key, d in spec.query_params.items()}

    def resolved(self) -> dict:
        """Every parameter with defaults filled in."""
        return {**self.build_kwargs(), **self.query_kwargs()}

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.resolved()}


def build_index(config: MethodConfig, dataset: DataSet, space: Space, rng_seed: int = 0, num_threads=1):
    spec = config.spec
    kwargs = config.build_kwargs()
    if spec.name != "bruteforce":
        kwargs["rng_seed"] = rng_seed
    if spec.threaded_build:
        kwargs["num_threads"] = num_threads
    return spec.build(dataset, space, **kwargs)


def search_index(config: MethodConfig, index, query, k: int) -> QueryResult:
    return config.spec.search(index, query, k, **config.query_kwargs())
