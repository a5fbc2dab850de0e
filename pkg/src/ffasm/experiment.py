"""Monte Carlo sweeps over simulated scenarios.

Each replication draws its data from a stream keyed by ``(seed, G, param,
rep)``, so results do not depend on the number of workers or on which
methods are run alongside.
"""

from __future__ import annotations

import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .competitors import fit_group_mcp, fit_mcp_scores
from .exceptions import InvalidArgument
from .metrics import RunRecord, imse, summarize, tpr
from .model import FfasmConfig, fit_ffasm, functional_scores
from .simulate import ScenarioConfig, generate

METHODS = ("ffasm", "mcp", "grmcp")

# Settings used by the simulation harness unless an experiment overrides them.
HARNESS_FIT = {
    "n_components": 10,
    "cv": "validate_third",
    "lambda_ratio": 1e-3,
    "penalize_intercept": True,
}


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str = "factor"
    G: tuple[int, ...] = (20,)
    params: tuple[float, ...] = (1,)
    R: int = 50
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    n: int = 100
    threads: int = 1
    scenario_options: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.R < 1:
            raise InvalidArgument("R must be at least 1")
        if not self.methods:
            raise InvalidArgument("methods must be non-empty")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise InvalidArgument(f"unknown methods {sorted(bad)}")
        if self.scenario not in ("factor", "equal_corr"):
            raise InvalidArgument(f"unknown scenario {self.scenario!r}")
        if not self.G or not self.params:
            raise InvalidArgument("G and the K/rho list must be non-empty")
        if self.threads < 1:
            raise InvalidArgument("threads must be positive")
        self.fit_config()
        for G in self.G:
            for p in self.params:
                self.scenario_config(G, p)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        scenario = d.pop("scenario", "factor")
        key = "K" if scenario == "factor" else "rho"
        if key not in d:
            raise InvalidArgument(f"scenario {scenario!r} needs a {key!r} list")
        other = "rho" if key == "K" else "K"
        if other in d:
            raise InvalidArgument(f"scenario {scenario!r} does not take {other!r}")
        params = d.pop(key)
        params = tuple(params) if isinstance(params, (list, tuple)) else (params,)
        G = d.pop("G", [20])
        G = tuple(G) if isinstance(G, (list, tuple)) else (G,)
        known = {"R", "methods", "seed", "n", "threads", "scenario_options", "fit"}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgument(f"unknown experiment keys: {sorted(unknown)}")
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(scenario=scenario, G=G, params=params, **d)

    def fit_config(self) -> FfasmConfig:
        return FfasmConfig.from_dict({**HARNESS_FIT, **self.fit})

    def scenario_config(self, G: int, param) -> ScenarioConfig:
        kw = dict(self.scenario_options)
        if self.scenario == "factor":
            kw["K"] = int(param)
        else:
            kw["rho"] = float(param)
        return ScenarioConfig(self.scenario, n=self.n, G=int(G), seed=self.seed, **kw)


def _param_key(param) -> int:
    return int(round(float(param) * 1_000_000))


def replication_seeds(seed: int, G: int, param, rep: int) -> tuple[np.random.Generator, int]:
    """Data stream and CV seed for one replication."""
    ss = np.random.SeedSequence([int(seed), int(G), _param_key(param), int(rep)])
    data_ss, cv_ss = ss.spawn(2)
    return np.random.default_rng(data_ss), int(cv_ss.generate_state(1)[0])


def run_replication(scfg: ScenarioConfig, fcfg: FfasmConfig, methods: Sequence[str],
                    rep: int, param) -> list[RunRecord]:
    rng, cv_seed = replication_seeds(scfg.seed, scfg.G, param, rep)
    sample, y, truth = generate(scfg, rng)
    fcfg = replace(fcfg, seed=cv_seed)
    fs = functional_scores(sample, fcfg.n_components, fcfg.fve_threshold)
    echo = {"scenario": scfg.scenario, "G": scfg.G, "n": scfg.n,
            "K": scfg.K, "rho": scfg.rho}
    out = []
    for method in methods:
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if method == "ffasm":
                fit = fit_ffasm(sample, y, fcfg, fs)
            elif method == "mcp":
                fit = fit_mcp_scores(fs, y, fcfg)
            else:
                fit = fit_group_mcp(fs, y, fcfg)
        ms = 1000 * (time.perf_counter() - t0)
        out.append(RunRecord(
            method=method, rep=rep, scenario=echo,
            imse=imse(fit.beta_curves, truth.betas, sample.grid),
            tpr=tpr(fit.selected, truth.support),
            selected=fit.selected, runtime_ms=ms,
            k_hat=fit.K if method == "ffasm" else None,
            type1=truth.type1, type2=truth.type2,
        ))
    return out


def _job(args):
    scfg, fcfg, methods, rep, param = args
    try:
        return run_replication(scfg, fcfg, methods, rep, param), None
    except Exception:  # reported, not fatal: the sweep keeps its other results
        return [], f"G={scfg.G} param={param} rep={rep}: {traceback.format_exc(limit=3)}"


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    errors: list[str]

    def cells(self) -> list[dict]:
        groups: dict[tuple, list[RunRecord]] = {}
        for r in self.records:
            sc = r.scenario
            param = sc["K"] if sc["scenario"] == "factor" else sc["rho"]
            groups.setdefault((sc["scenario"], sc["G"], param, r.method), []).append(r)
        return [{"scenario": k[0], "G": k[1], "param": k[2], "method": k[3], **summarize(v)}
                for k, v in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][2],
                                                                   METHODS.index(kv[0][3])))]


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return int(threads)
    env = os.environ.get("FFASM_THREADS")
    return int(env) if env else 1


def run_experiment(spec: ExperimentSpec, threads: int | None = None) -> ExperimentResult:
    fcfg = spec.fit_config()
    jobs = [(spec.scenario_config(G, p), fcfg, spec.methods, rep, p)
            for G in spec.G for p in spec.params for rep in range(spec.R)]
    workers = threads if threads is not None else spec.threads
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    records = [r for recs, _ in results for r in recs]
    errors = [e for _, e in results if e]
    order = {m: i for i, m in enumerate(METHODS)}
    records.sort(key=lambda r: (r.scenario["G"],
                                r.scenario["K"] if r.scenario["K"] is not None else r.scenario["rho"],
                                r.rep, order[r.method]))
    return ExperimentResult(records, errors)
