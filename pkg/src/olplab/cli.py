"""Config-driven command line front end.

Subcommands `regret`, `dualconv`, and `trajectory` read an INI recipe,
run the corresponding experiment, and emit CSV whose body is a pure
function of (config, seed); `verify` runs the built-in cross-check suite
against the independent reference oracles and reports pass/fail counts.

Exit codes: 0 success, 1 verification failures, 2 configuration error,
3 numerical failure during an experiment.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .core import (ConfigError, DualPrice, NumericalFailure, SolverOptions,
                   instance_arrays)
from .bench import (DegenerateDualWarning, dual_convergence_experiment,
                    estimate_regret, loglog_slope, run_trial,
                    trajectory_export)
from .dual import classify_binding, estimate_pstar
from .inputs import RNG_METHOD, make_model, resolve_d
from .policies import (POLICY_NAMES, make_ahd_policy, make_dynamic_policy,
                       make_static_policy)

EXPERIMENT_KINDS = ("regret", "dualconv", "trajectory", "verify")

REGRET_COLUMNS = ("model", "algorithm", "m", "n", "trials", "mean_regret",
                  "stderr", "mean_binding_leftover", "mean_stop_gap",
                  "mean_price_error")
DUALCONV_COLUMNS = ("model", "n", "trials", "mean_sq_error", "stderr")
TRAJECTORY_COLUMNS = ("model", "algorithm", "resource", "trial", "t",
                      "remaining")


@dataclass
class ExperimentConfig:
    """Validated recipe for one experiment run."""

    kind: str
    model_kind: str
    model_params: Dict[str, object]
    m: int
    d_spec: str
    algorithms: Tuple[str, ...]
    n_list: Tuple[int, ...]
    trials: int
    base_seed: int
    threads: int
    out: Optional[str]
    solver: SolverOptions
    pstar_source: Optional[str]          # None | analytic | saa | explicit
    pstar_samples: int
    pstar_seed: int
    pstar_values: Optional[Tuple[float, ...]]
    cache_dir: str
    resource: int
    raw_items: Tuple[Tuple[str, str], ...] = field(default=())

    def config_hash(self) -> str:
        """Digest of every result-affecting setting.

        threads/out never change results and the raw seed key is
        superseded by the effective seed, so a seed given by flag and the
        same seed given in the file hash identically.
        """
        skip = ("out", "threads", "cache", "seed")
        lines = ["%s=%s" % kv for kv in sorted(self.raw_items)
                 if kv[0].split(".")[-1] not in skip]
        lines.append("seed=%d" % self.base_seed)
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _get(cp: configparser.ConfigParser, section: str, key: str,
         default=None, required: bool = False) -> Optional[str]:
    if cp.has_option(section, key):
        return cp.get(section, key)
    if required:
        raise ConfigError(f"missing key '{key}' in section [{section}]")
    return default


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {raw!r}")


def _parse_float(raw: str, where: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {raw!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite, got {raw!r}")
    return v


def _parse_int_list(raw: str, where: str) -> Tuple[int, ...]:
    vals = tuple(_parse_int(tok, where) for tok in raw.split())
    if not vals:
        raise ConfigError(f"{where}: expected at least one integer")
    return vals


_MODEL_PARAM_KEYS = {
    "random_input_i": ("m",),
    "random_input_ii": ("m",),
    "uniform_square": ("m",),
    "multi_secretary": ("lo", "hi"),
    "replay": ("path",),
    "finite_support": ("probs", "rewards", "columns"),
}


def _model_params(cp, kind: str) -> Dict[str, object]:
    if kind not in _MODEL_PARAM_KEYS:
        raise ConfigError(
            f"model.kind {kind!r} unknown; expected one of "
            f"{sorted(_MODEL_PARAM_KEYS)}")
    params: Dict[str, object] = {}
    if kind in ("random_input_i", "random_input_ii", "uniform_square"):
        params["m"] = _parse_int(_get(cp, "model", "m", "4"), "model.m")
    elif kind == "multi_secretary":
        params["lo"] = _parse_float(_get(cp, "model", "lo", "0.0"), "model.lo")
        params["hi"] = _parse_float(_get(cp, "model", "hi", "1.0"), "model.hi")
    elif kind == "replay":
        params["path"] = _get(cp, "model", "path", required=True)
    elif kind == "finite_support":
        probs = [_parse_float(x, "model.probs")
                 for x in _get(cp, "model", "probs", required=True).split()]
        rewards = [_parse_float(x, "model.rewards")
                   for x in _get(cp, "model", "rewards", required=True).split()]
        cols = [[_parse_float(x, "model.columns") for x in row.split()]
                for row in _get(cp, "model", "columns", required=True).split(";")]
        params.update(probs=probs, rewards=rewards, columns=cols)
    return params


def parse_config(path: Optional[str], kind: str,
                 overrides: Dict[str, object]) -> ExperimentConfig:
    """Read and validate the INI recipe; command-line overrides win."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error in {path}: {exc}")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment kind {kind!r} unknown; expected one of "
            f"{EXPERIMENT_KINDS}")

    for section in cp.sections():
        if section not in ("experiment", "model", "solver", "pstar",
                           "regret", "dualconv", "trajectory"):
            raise ConfigError(f"unknown config section [{section}]")

    declared_kind = _get(cp, "experiment", "kind")
    if declared_kind is not None and declared_kind != kind:
        raise ConfigError(
            f"experiment.kind {declared_kind!r} does not match the "
            f"{kind!r} subcommand")

    model_kind = _get(cp, "model", "kind", required=True)
    model_params = _model_params(cp, model_kind)
    model = make_model(model_kind, **model_params)
    m = model.m
    d_spec = _get(cp, "model", "d", "0.25")
    try:
        resolve_d(d_spec, m)  # validate shape and values before running
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"model.d: {exc}")

    sect = kind if kind in ("regret", "dualconv", "trajectory") else None
    algorithms: Tuple[str, ...] = ()
    n_list: Tuple[int, ...] = ()
    trials = 0
    resource = 0
    if sect is not None:
        if not cp.has_section(sect):
            raise ConfigError(f"missing section [{sect}] with key 'trials'")
        raw_n = _get(cp, sect, "n", required=True)
        n_list = _parse_int_list(raw_n, f"{sect}.n")
        trials = _parse_int(_get(cp, sect, "trials", required=True),
                            f"{sect}.trials")
        if trials < 2:
            raise ConfigError(f"{sect}.trials must be at least 2")
        if sect in ("regret", "trajectory"):
            raw_alg = _get(cp, sect, "algorithms", required=True)
            algorithms = tuple(raw_alg.split())
            for alg in algorithms:
                if alg not in POLICY_NAMES:
                    raise ConfigError(
                        f"{sect}.algorithms: {alg!r} is not one of "
                        f"{POLICY_NAMES}")
        if sect == "trajectory":
            resource = _parse_int(_get(cp, sect, "resource", "0"),
                                  "trajectory.resource")
            if not 0 <= resource < m:
                raise ConfigError(
                    f"trajectory.resource {resource} out of range for m={m}")

    base_seed = _parse_int(_get(cp, "experiment", "seed", "0"),
                           "experiment.seed")
    threads = _parse_int(_get(cp, "experiment", "threads", "1"),
                         "experiment.threads")
    out = _get(cp, "experiment", "out")

    eps_raw = _get(cp, "solver", "eps_sub")
    pmax_raw = _get(cp, "solver", "p_max")
    try:
        solver = SolverOptions(
            eps_sub=None if eps_raw is None else _parse_float(
                eps_raw, "solver.eps_sub"),
            budget=_parse_int(_get(cp, "solver", "budget", "500"),
                              "solver.budget"),
            p_max=None if pmax_raw is None else _parse_float(
                pmax_raw, "solver.p_max"),
            resolve_engine=_get(cp, "solver", "resolve_engine", "simplex"))
    except ValueError as exc:
        raise ConfigError(f"solver options: {exc}")

    pstar_source = _get(cp, "pstar", "source")
    if pstar_source is not None and pstar_source not in ("analytic", "saa",
                                                         "explicit"):
        raise ConfigError(
            f"pstar.source {pstar_source!r} must be analytic, saa, or "
            f"explicit")
    pstar_values = None
    if pstar_source == "explicit":
        raw_vals = _get(cp, "pstar", "values", required=True)
        pstar_values = tuple(_parse_float(x, "pstar.values")
                             for x in raw_vals.split())
        if len(pstar_values) != m:
            raise ConfigError(
                f"pstar.values has {len(pstar_values)} entries, model has "
                f"m={m}")
    pstar_samples = _parse_int(_get(cp, "pstar", "samples", "1000000"),
                               "pstar.samples")
    pstar_seed = _parse_int(_get(cp, "pstar", "seed", "0"), "pstar.seed")
    cache_dir = _get(cp, "pstar", "cache", ".olplab-cache")

    # command-line overrides
    if overrides.get("seed") is not None:
        base_seed = int(overrides["seed"])
    if overrides.get("threads") is not None:
        threads = int(overrides["threads"])
    if overrides.get("out") is not None:
        out = str(overrides["out"])
    if threads < 1:
        raise ConfigError("experiment.threads must be at least 1")

    raw_items = tuple((f"{s}.{k}", v) for s in cp.sections()
                      for k, v in cp.items(s))
    return ExperimentConfig(
        kind=kind, model_kind=model_kind, model_params=model_params, m=m,
        d_spec=d_spec, algorithms=algorithms, n_list=n_list, trials=trials,
        base_seed=base_seed, threads=threads, out=out, solver=solver,
        pstar_source=pstar_source, pstar_samples=pstar_samples,
        pstar_seed=pstar_seed, pstar_values=pstar_values,
        cache_dir=cache_dir, resource=resource, raw_items=raw_items)


def _pstar_cache_key(cfg: ExperimentConfig) -> str:
    blob = "|".join([cfg.model_kind,
                     repr(sorted(cfg.model_params.items())),
                     cfg.d_spec, str(cfg.pstar_samples), str(cfg.pstar_seed)])
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def obtain_pstar(cfg: ExperimentConfig, model) -> Optional[DualPrice]:
    """Resolve the reference price per the [pstar] section, caching SAA runs."""
    if cfg.pstar_source is None:
        return None
    d_vec = resolve_d(cfg.d_spec, cfg.m)
    if cfg.pstar_source == "explicit":
        return DualPrice(np.array(cfg.pstar_values, dtype=float),
                         provenance="analytic")
    if cfg.pstar_source == "analytic":
        if not hasattr(model, "analytic_pstar"):
            raise ConfigError(
                f"pstar.source analytic: model {cfg.model_kind!r} has no "
                f"closed-form price; use source saa or explicit")
        vals = np.atleast_1d(np.asarray(
            model.analytic_pstar(float(d_vec[0])), dtype=float))
        return DualPrice(vals, provenance="analytic")
    # saa, cached on disk keyed by the generating settings
    os.makedirs(cfg.cache_dir, exist_ok=True)
    path = os.path.join(cfg.cache_dir, f"pstar_{_pstar_cache_key(cfg)}.npy")
    if os.path.exists(path):
        return DualPrice(np.load(path), provenance="saa_oracle")
    price = estimate_pstar(model, d_vec, samples=cfg.pstar_samples,
                           seed=cfg.pstar_seed)
    np.save(path, price.p)
    return price


def _fmt(value) -> str:
    """One CSV cell: shortest round-trip decimal; empty for missing."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            raise NumericalFailure(f"refusing to emit non-finite value {v}")
        return repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _emit(cfg: ExperimentConfig, columns: Sequence[str],
          rows: Sequence[Sequence[object]], stream) -> None:
    stream.write(f"# olplab {cfg.kind}\n")
    stream.write(f"# config_hash: sha256:{cfg.config_hash()}\n")
    stream.write(f"# build: olplab {__version__}\n")
    stream.write(f"# seed: {cfg.base_seed}\n")
    stream.write(f"# rng: {RNG_METHOD}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


_POLICY_FACTORIES = {
    "static": lambda cfg, pstar: make_static_policy(pstar),
    "scheduled": lambda cfg, pstar: make_dynamic_policy(),
    "resolving": lambda cfg, pstar: make_ahd_policy(cfg.solver),
}


def _make_policy(cfg: ExperimentConfig, name: str, pstar):
    if name == "static" and pstar is None:
        raise ConfigError(
            "algorithm 'static' needs a [pstar] section (key pstar.source)")
    return _POLICY_FACTORIES[name](cfg, pstar)


def cmd_regret(cfg: ExperimentConfig, stream) -> None:
    model = make_model(cfg.model_kind, **cfg.model_params)
    pstar = obtain_pstar(cfg, model)
    binding = None
    if pstar is not None:
        binding = classify_binding(model, resolve_d(cfg.d_spec, cfg.m), pstar,
                                   seed=cfg.pstar_seed)
    rows = []
    for name in cfg.algorithms:
        for n in cfg.n_list:
            policy = _make_policy(cfg, name, pstar)
            rep = estimate_regret(model, policy, n, cfg.d_spec,
                                  trials=cfg.trials, base_seed=cfg.base_seed,
                                  pstar=pstar, binding=binding,
                                  threads=cfg.threads)
            rows.append((rep.model, rep.algorithm, rep.m, rep.n, rep.trials,
                         rep.mean_regret, rep.stderr,
                         rep.mean_binding_leftover, rep.mean_stop_gap,
                         rep.mean_price_error))
    _emit(cfg, REGRET_COLUMNS, rows, stream)


def cmd_dualconv(cfg: ExperimentConfig, stream) -> None:
    model = make_model(cfg.model_kind, **cfg.model_params)
    pstar = obtain_pstar(cfg, model)
    if pstar is None:
        raise ConfigError(
            "dualconv needs a reference price: set pstar.source")
    table = dual_convergence_experiment(model, cfg.d_spec, cfg.n_list,
                                        cfg.trials, cfg.base_seed, pstar)
    rows = [(model.describe(), n, cfg.trials, mse, se)
            for n, mse, se in table]
    _emit(cfg, DUALCONV_COLUMNS, rows, stream)


def cmd_trajectory(cfg: ExperimentConfig, stream) -> None:
    model = make_model(cfg.model_kind, **cfg.model_params)
    pstar = obtain_pstar(cfg, model)
    if len(cfg.n_list) != 1:
        raise ConfigError("trajectory.n must contain exactly one horizon")
    n = cfg.n_list[0]
    rows = []
    for name in cfg.algorithms:
        policy = _make_policy(cfg, name, pstar)
        paths = trajectory_export(model, policy, n, cfg.d_spec, cfg.trials,
                                  cfg.base_seed, resource=cfg.resource)
        for trial in range(cfg.trials):
            for t in range(n + 1):
                rows.append((model.describe(), name, cfg.resource, trial, t,
                             float(paths[trial, t])))
    _emit(cfg, TRAJECTORY_COLUMNS, rows, stream)


# ---------------------------------------------------------------------------
# verify: cross-checks against the independent reference oracles


def _check_offline_oracle(rng: np.random.Generator) -> Tuple[bool, str]:
    from .reference import enumerate_dual_value, enumerate_primal_value
    from .simplex import solve_box_lp
    worst_obj = worst_gap = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 21))
        m = int(rng.integers(1, 5))
        r = rng.uniform(-1, 2, n)
        a = rng.uniform(-0.5, 1, (n, m))
        b = rng.uniform(0.3, 1.2, m) * max(n, 1) * 0.3
        sol = solve_box_lp(r, a, b)
        ref = enumerate_dual_value(r, a, b)
        worst_obj = max(worst_obj, abs(sol.objective - ref))
        if n <= 9:      # primal basic-solution walk is exponential in n
            worst_obj = max(worst_obj,
                            abs(sol.objective - enumerate_primal_value(r, a, b)))
        dual_obj = float(b @ sol.dual_price.p) + np.maximum(
            r - a @ sol.dual_price.p, 0.0).sum()
        rel = abs(dual_obj - sol.objective) / (1.0 + abs(sol.objective))
        worst_gap = max(worst_gap, rel)
    ok = worst_obj <= 1e-8 and worst_gap <= 1e-8
    return ok, f"max |objective-oracle| {worst_obj:.2e}, max gap {worst_gap:.2e}"


def _check_f_value(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, f_value
    worst = 0.0
    for _ in range(100):
        t = int(rng.integers(1, 40))
        m = int(rng.integers(1, 5))
        r = rng.uniform(-1, 2, t)
        a = rng.uniform(-1, 1, (t, m))
        d = rng.uniform(0.05, 1.0, m)
        p = rng.uniform(0, 2, m)
        prob = SampledDualProblem(r, a, d)
        direct = float(d @ p) + sum(max(r[j] - float(a[j] @ p), 0.0)
                                    for j in range(t)) / t
        worst = max(worst, abs(f_value(prob, p) - direct))
    return worst <= 1e-12, f"max |f - direct| {worst:.2e}"


def _check_subgradient_fd(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, f_value, subgradient
    worst = 0.0
    for _ in range(60):
        t = int(rng.integers(2, 30))
        m = int(rng.integers(1, 4))
        r = rng.uniform(0, 1, t)
        a = rng.uniform(-1, 1, (t, m))
        d = rng.uniform(0.1, 1.0, m)
        prob = SampledDualProblem(r, a, d)
        p = rng.uniform(0.05, 2, m)
        margins = np.abs(r - a @ p)
        if margins.min() < 1e-4:      # too close to a kink for differencing
            continue
        g = subgradient(prob, p)
        h = 1e-7
        for i in range(m):
            e = np.zeros(m)
            e[i] = h
            fd = (f_value(prob, p + e) - f_value(prob, p - e)) / (2 * h)
            worst = max(worst, abs(fd - g[i]))
    return worst <= 1e-6, f"max |subgradient - finite difference| {worst:.2e}"


def _check_scan_1d(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, solve_sampled_dual_exact
    from .reference import scan_dual_1d
    worst = 0.0
    for _ in range(100):
        t = int(rng.integers(1, 60))
        r = rng.uniform(0, 1, t)
        a = rng.uniform(0.2, 1.5, (t, 1))
        d = float(rng.uniform(0.05, 1.0))
        got = solve_sampled_dual_exact(
            SampledDualProblem(r, a, np.array([d]))).p[0]
        want, _ = scan_dual_1d(r, a[:, 0], d)
        worst = max(worst, abs(got - want))
    return worst <= 1e-9, f"max |exact - breakpoint scan| {worst:.2e}"


def _check_secretary_quantile(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, solve_sampled_dual_exact
    from .reference import secretary_quantile
    worst = 0.0
    for _ in range(100):
        t = int(rng.integers(2, 200))
        r = rng.uniform(0, 1, t)
        d = float(rng.uniform(0.05, 0.95))
        got = solve_sampled_dual_exact(
            SampledDualProblem(r, np.ones((t, 1)), np.array([d]))).p[0]
        want = secretary_quantile(r, d)
        worst = max(worst, abs(got - want))
    return worst <= 1e-9, f"max |price - sample quantile| {worst:.2e}"


def _check_taylor(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, taylor_identity_residual
    worst = 0.0
    for _ in range(100):
        t = int(rng.integers(1, 80))
        m = int(rng.integers(1, 5))
        r = rng.uniform(-1, 2, t)
        a = rng.uniform(-1, 1, (t, m))
        d = rng.uniform(0.05, 1.0, m)
        prob = SampledDualProblem(r, a, d)
        worst = max(worst, taylor_identity_residual(
            prob, rng.uniform(0, 2, m), rng.uniform(0, 2, m)))
    return worst <= 1e-10, f"max residual {worst:.2e}"


def _check_warm(rng) -> Tuple[bool, str]:
    """Every resolve leaves a price within eps_sub of the sampled optimum
    (either the warm path certified it or the exact fallback supplied it)."""
    from .core import SolverOptions
    from .dual import SampledDualProblem, f_value, solve_sampled_dual_exact
    from .inputs import RandomInputI, generate_instance
    from .policies import make_ahd_policy, policy_step
    model = RandomInputI(dim=4)
    worst = -np.inf
    resolves = 0
    for engine in ("simplex", "subgradient"):
        for seed in (11, 12, 13, 14, 15):
            policy = make_ahd_policy(SolverOptions(resolve_engine=engine))
            orders, cap = generate_instance(model, 40, 0.25, seed=seed)
            eps = 1e-6 * (1.0 + model.bounds().r_bar)
            state = policy.start(cap)
            for t, order in enumerate(orders, start=1):
                policy_step(policy, state, order)
                if t >= cap.n:
                    continue
                d_eff = state.ledger.remaining() / (cap.n - t)
                prob = SampledDualProblem(state.rewards[:t],
                                          state.columns[:t], d_eff)
                opt = solve_sampled_dual_exact(prob)
                gap = f_value(prob, state.price) - f_value(prob, opt.p)
                worst = max(worst, gap - eps)
                resolves += 1
    ok = worst <= 0.0
    return ok, f"{resolves} resolves, max gap excess over eps {worst:.2e}"


def _check_schedule(rng) -> Tuple[bool, str]:
    from .policies import geometric_schedule
    want = {8: (2, 4), 100: (1, 3, 7, 13, 26, 51),
            2000: (1, 3, 7, 15, 31, 63, 126, 251, 502, 1002)}
    bad = {n: geometric_schedule(n) for n in want
           if geometric_schedule(n) != want[n]}
    return not bad, f"mismatches: {bad}" if bad else "pinned schedules match"


def _check_determinism(rng) -> Tuple[bool, str]:
    from .inputs import MultiSecretary, RandomInputI
    from .policies import make_dynamic_policy, make_ahd_policy
    for model, d in ((MultiSecretary(), 0.25), (RandomInputI(dim=4), 0.25)):
        for factory in (make_dynamic_policy, make_ahd_policy):
            a = run_trial(model, factory(), 40, d, seed=9)
            b = run_trial(model, factory(), 40, d, seed=9)
            if (a.online_revenue != b.online_revenue
                    or not np.array_equal(a.ledger.x, b.ledger.x)):
                return False, f"{model.describe()}: reruns differ"
    return True, "identical reruns on fresh policies"


def _check_feasibility(rng) -> Tuple[bool, str]:
    from .inputs import RandomInputI, RandomInputII
    from .policies import make_dynamic_policy, make_ahd_policy
    worst = np.inf
    min_regret = np.inf
    for model, d in ((RandomInputI(dim=4), 0.25),
                     (RandomInputII(dim=4), "alternating 0.2 0.3")):
        for factory in (make_dynamic_policy, make_ahd_policy):
            for seed in range(5):
                res = run_trial(model, factory(), 60, d, seed=seed)
                worst = min(worst, float(res.ledger.b[:61].min()))
                min_regret = min(min_regret, res.regret)
    ok = worst >= 0.0 and min_regret >= -1e-6
    return ok, f"min capacity {worst:.3g}, min regret {min_regret:.3g}"


def _check_replay_roundtrip(rng) -> Tuple[bool, str]:
    import tempfile
    from .inputs import Replay, generate_instance
    r = rng.uniform(0, 1, 7)
    a = rng.uniform(-0.5, 1, (7, 3))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "inst.olp")
        with open(path, "w") as fh:
            fh.write("olp v1 n=7 m=3\n")
            for j in range(7):
                fh.write(repr(float(r[j])) + " "
                         + " ".join(repr(float(x)) for x in a[j]) + "\n")
        model = Replay(path)
        orders, _ = generate_instance(model, 7, 0.5, seed=0)
    ok = (all(orders[j].reward == r[j] for j in range(7))
          and all(np.array_equal(orders[j].column, a[j]) for j in range(7)))
    return ok, "file round-trip bit-exact" if ok else "round-trip mismatch"


def _check_history_dependence(rng) -> Tuple[bool, str]:
    """Decisions through period t depend only on orders 1..t."""
    from .core import CapacitySpec, Order
    from .policies import make_ahd_policy, make_dynamic_policy, policy_step
    n, m = 24, 2
    cap = CapacitySpec(n, m, np.full(m, 0.4 * n))
    r = rng.uniform(0, 1, n)
    a = rng.uniform(-0.5, 1, (n, m))
    r2 = r.copy()
    a2 = a.copy()
    r2[12:] = rng.uniform(0, 1, n - 12)     # divergent suffix
    a2[12:] = rng.uniform(-0.5, 1, (n - 12, m))
    for factory in (make_dynamic_policy, make_ahd_policy):
        seqs = []
        for rr, aa in ((r, a), (r2, a2)):
            policy = factory()
            state = policy.start(cap)
            seqs.append([policy_step(policy, state,
                                     Order(rr[j], aa[j]))[0]
                         for j in range(n)])
        if seqs[0][:12] != seqs[1][:12]:
            return False, "shared prefix produced different decisions"
    return True, "prefix decisions independent of the future"


def _check_convexity(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, f_value
    worst = -np.inf
    for _ in range(200):
        t = int(rng.integers(1, 50))
        m = int(rng.integers(1, 5))
        prob = SampledDualProblem(rng.uniform(-1, 2, t),
                                  rng.uniform(-1, 1, (t, m)),
                                  rng.uniform(0.05, 1.0, m))
        p = rng.uniform(0, 3, m)
        q = rng.uniform(0, 3, m)
        mid = f_value(prob, (p + q) / 2)
        worst = max(worst, mid - (f_value(prob, p) + f_value(prob, q)) / 2)
    return worst <= 1e-12, f"max midpoint excess {worst:.2e}"


def _check_price_bound(rng) -> Tuple[bool, str]:
    from .dual import SampledDualProblem, solve_sampled_dual_exact
    worst = -np.inf
    for _ in range(150):
        t = int(rng.integers(1, 40))
        m = int(rng.integers(1, 5))
        r = rng.uniform(-1, 2, t)
        a = rng.uniform(-1, 1, (t, m))
        d = rng.uniform(0.05, 1.0, m)
        price = solve_sampled_dual_exact(SampledDualProblem(r, a, d))
        worst = max(worst, float(d @ price.p) - max(float(r.max()), 0.0))
    return worst <= 1e-8, f"max d.p - max(r+) = {worst:.2e}"


VERIFY_CHECKS = (
    ("offline_oracle_and_duality", _check_offline_oracle),
    ("sampled_dual_value", _check_f_value),
    ("subgradient_finite_difference", _check_subgradient_fd),
    ("one_dimensional_breakpoint_scan", _check_scan_1d),
    ("secretary_quantile_price", _check_secretary_quantile),
    ("taylor_identity", _check_taylor),
    ("warm_path_suboptimality", _check_warm),
    ("refresh_schedule_pins", _check_schedule),
    ("trial_determinism", _check_determinism),
    ("feasibility_and_regret_sign", _check_feasibility),
    ("replay_round_trip", _check_replay_roundtrip),
    ("history_dependence", _check_history_dependence),
    ("dual_convexity", _check_convexity),
    ("price_capacity_bound", _check_price_bound),
)


def run_verification(seed: int = 0, stream=None) -> Tuple[int, int]:
    """Run every cross-check; returns (passed, total)."""
    stream = stream or sys.stdout
    passed = 0
    for name, fn in VERIFY_CHECKS:
        tag = int(hashlib.sha256(name.encode()).hexdigest()[:8], 16)
        rng = np.random.default_rng((seed & 0xFFFFFFFF) ^ tag)
        ok, detail = fn(rng)
        passed += ok
        stream.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    stream.write(f"passed {passed}/{len(VERIFY_CHECKS)} checks\n")
    return passed, len(VERIFY_CHECKS)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="olplab",
        description="online LP experiment runner (regret tables, dual "
                    "convergence curves, capacity trajectories, self checks)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENT_KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="INI recipe (see configs/ for examples)")
        p.add_argument("--seed", type=int, default=None,
                       help="override experiment.seed")
        p.add_argument("--out", default=None,
                       help="override experiment.out (default stdout)")
        p.add_argument("--threads", type=int, default=None,
                       help="override experiment.threads")
    return parser


_COMMANDS = {"regret": cmd_regret, "dualconv": cmd_dualconv,
             "trajectory": cmd_trajectory}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out, "threads": args.threads}
    try:
        if args.command == "verify":
            seed = args.seed if args.seed is not None else 0
            passed, total = run_verification(seed)
            return 0 if passed == total else 1
        if args.config is None:
            raise ConfigError(
                f"{args.command} requires --config (key 'kind' experiments "
                f"need a recipe)")
        cfg = parse_config(args.config, args.command, overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("always", DegenerateDualWarning)
            if cfg.out is None:
                _COMMANDS[args.command](cfg, sys.stdout)
            else:
                os.makedirs(os.path.dirname(cfg.out) or ".", exist_ok=True)
                tmp = cfg.out + ".part"
                with open(tmp, "w") as fh:
                    _COMMANDS[args.command](cfg, fh)
                os.replace(tmp, cfg.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
