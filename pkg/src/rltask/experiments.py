"""Experiment runners returning :class:`ResultTable` objects."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .agents import finalize, run_elstdq, run_state_agent, simulate_stream, step_size
from .bellman import action_value_matrices, control_value_iteration, exact_value, lambda_operator
from .contraction import (
    behavior_interest_weighting,
    build_system,
    emphasis_weighting,
    is_positive_definite,
    on_policy_weighting,
    weighted_norm,
)
from .core import Policy, TerminationError, build_matrices, stationary_distribution
from .equivalence import verify_equivalence

WEIGHTINGS = ("d_pi", "behavior", "emphasis")
TABLE_LAMBDAS = (0.0, 0.5, 0.9, 0.99, 0.999)


@dataclass
class ExperimentConfig:
    command: str
    domain: str | None = None
    variant: str | None = None
    task: str | None = None
    lambdas: tuple = ()
    weightings: tuple = WEIGHTINGS
    algorithm: str = "td"
    alpha: float = 0.1
    tau: float = 1e3
    runs: int = 1
    steps: int = 100
    seed: int = 0
    termination: str | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        bad = set(self.weightings) - set(WEIGHTINGS)
        if bad:
            raise ValueError(f"unknown weighting(s) {sorted(bad)}")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, label, metric, mean, stderr=None):
        self.rows.append((str(label), str(metric), float(mean), None if stderr is None else float(stderr)))

    def value(self, label, metric) -> float:
        for lab, met, mean, _ in self.rows:
            if lab == label and met == metric:
                return mean
        raise KeyError((label, metric))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "metric", "mean", "stderr", "config_hash"])
        h = self.metadata.get("config_hash", "")
        for lab, met, mean, se in self.rows:
            w.writerow([lab, met, _fmt(mean), "" if se is None else _fmt(se), h])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [{"label": lab, "metric": met, "mean": _num(mean), "stderr": None if se is None else _num(se),
                 "config_hash": self.metadata.get("config_hash", "")}
                for lab, met, mean, se in self.rows]
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=1)

    def render(self, fmt: str = "csv") -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _num(x: float):
    return None if not np.isfinite(x) else float(_fmt(x))


def _table(cfg: ExperimentConfig) -> ResultTable:
    return ResultTable(metadata={"seed": cfg.seed, "config_hash": cfg.digest(), "version": __version__,
                                 "command": cfg.command})


def _stats(x):
    x = np.asarray(x, dtype=float)
    se = x.std(ddof=1) / np.sqrt(len(x)) if len(x) > 1 else None
    return float(x.mean()), se


@dataclass
class Problem:
    dynamics: object
    task: object
    policy: Policy
    behavior: Policy
    absorbing: tuple = ()


def resolve_problem(cfg: ExperimentConfig) -> Problem:
    """Build the problem named by ``cfg.task`` (a file) or ``cfg.domain``."""
    from .taskfile import load_task

    if cfg.task:
        tf = load_task(cfg.task)
        return Problem(tf.dynamics, tf.task, tf.policy, tf.behavior)
    if cfg.domain == "counterexample":
        from .domains.counterexample import make_counterexample

        dyn, task = make_counterexample()
        pi = Policy.uniform(dyn.n_states, dyn.n_actions)
        return Problem(dyn, task, pi, pi)
    if cfg.domain == "chain":
        from .domains.chain import chain_policy, make_chain

        kind = cfg.variant or "transition_based"
        dyn, task = make_chain(kind)
        pi = chain_policy(kind, 0.75)
        return Problem(dyn, task, pi, pi, (3,) if kind == "absorbing" else ())
    if cfg.domain == "taxi":
        from .domains.taxi import TaxiSpec, make_taxi

        variant = cfg.variant or "trans_hard"
        spec = TaxiSpec(discount_variant=variant, gamma_c=0.99 if variant == "constant" else None)
        dyn, task = make_taxi(spec)
        if cfg.termination:
            from .domains.terminations import TerminationPattern, apply_random_termination

            mode, _, frac = cfg.termination.partition(":")
            pattern = TerminationPattern(mode, float(frac or 0.01))
            task, _ = apply_random_termination(dyn, task, pattern, cfg.seed)
        pi = Policy.uniform(dyn.n_states, dyn.n_actions)
        return Problem(dyn, task, pi, pi)
    if cfg.domain == "random":
        from .random_tasks import random_task

        rt = random_task(cfg.seed)
        return Problem(rt.dynamics, rt.task, rt.target, rt.behavior)
    raise ValueError(f"unknown domain {cfg.domain!r}; give --task or --domain")


def analyze_cells(problem: Problem, lambdas, weightings=WEIGHTINGS, check_definite: bool = True):
    """Yield ``(weighting, lambda, result dict)`` cells.

    ``lambdas`` empty means the task's own trace. A singular discount yields a
    cell with an ``error`` entry.
    """
    dyn, pi, mu = problem.dynamics, problem.policy, problem.behavior
    d_pi = stationary_distribution(build_matrices(dyn, problem.task, pi).P_pi)
    d_mu = d_pi if mu is pi else stationary_distribution(build_matrices(dyn, problem.task, mu).P_pi)
    interest = problem.task.interest_vector(dyn.n_states)
    for lam in (lambdas or [None]):
        task = problem.task if lam is None else problem.task.replace(trace=float(lam))
        label = "task" if lam is None else lam
        try:
            mats = build_matrices(dyn, task, pi)
            op = lambda_operator(mats)
        except TerminationError as exc:
            for wname in weightings:
                yield wname, label, {"error": str(exc)}
            continue
        for wname in weightings:
            if wname == "d_pi":
                w = on_policy_weighting(d_pi)
            elif wname == "behavior":
                w = behavior_interest_weighting(d_mu, interest)
            else:
                w = emphasis_weighting(op, d_mu, interest)
            xi = weighted_norm(op.P_lambda, w)
            cell = {"xi": xi, "contraction": float(xi < 1.0)}
            if check_definite:
                A = build_system(op, mats, np.eye(dyn.n_states), w).A
                cell["A_positive_definite"] = float(is_positive_definite(A))
            yield wname, label, cell


def cmd_analyze(cfg: ExperimentConfig, problem: Problem | None = None) -> ResultTable:
    problem = resolve_problem(cfg) if problem is None else problem
    out = _table(cfg)
    check = problem.dynamics.n_states <= 500
    for wname, lam, cell in analyze_cells(problem, list(cfg.lambdas), cfg.weightings, check):
        label = f"{wname} lambda={lam}"
        if "error" in cell:
            out.add(label, "termination_error", float("nan"))
            continue
        for metric, val in cell.items():
            out.add(label, metric, val)
    return out


def cmd_simulate(cfg: ExperimentConfig) -> ResultTable:
    """Greedy-policy taxi rollouts: drop-offs and added turn cost per run."""
    from .core import RLTask
    from .domains.taxi import build_taxi, simulate_greedy, taxi_discount

    out = _table(cfg)
    variants = [cfg.variant] if cfg.variant else ["trans_soft", "trans_hard", "state_based"]
    taxi, dyn, R, _ = build_taxi()
    for k, variant in enumerate(variants):
        _, pol = control_value_iteration(dyn, RLTask(reward=R, discount=taxi_discount(taxi, variant)))
        actions = np.argmax(pol.probs, axis=1)
        deliveries, turn = simulate_greedy(taxi, actions, cfg.runs, cfg.steps, cfg.seed + k)
        out.add(variant, "deliveries", *_stats(deliveries))
        out.add(variant, "turn_cost", *_stats(turn))
    return out


def cmd_equivalence(cfg: ExperimentConfig, problem: Problem | None = None):
    """Returns ``(table, passed)``."""
    problem = resolve_problem(cfg) if problem is None else problem
    rep = verify_equivalence(problem.dynamics, problem.task, problem.policy)
    out = _table(cfg)
    for key, val in rep.as_dict().items():
        if key in ("passed", "mismatches"):
            continue
        out.add("equivalence", key, val)
    out.add("equivalence", "passed", float(rep.passed))
    out.metadata["mismatches"] = list(rep.mismatches)
    return out, rep.passed


def cmd_learn(cfg: ExperimentConfig, problem: Problem | None = None, checkpoints: int = 10) -> ResultTable:
    """Learning curve of ``||v_hat - v_pi||_D`` with tabular features, weighted by ``d_pi``."""
    problem = resolve_problem(cfg) if problem is None else problem
    dyn, pi = problem.dynamics, problem.policy
    task = problem.task if not cfg.lambdas else problem.task.replace(trace=float(cfg.lambdas[0]))
    out = _table(cfg)
    if cfg.steps == 0:
        return out
    stream = simulate_stream(dyn, task, problem.behavior, cfg.steps, cfg.seed, target=pi)
    every = max(1, cfg.steps // checkpoints)
    if cfg.algorithm == "elstdq":
        mats = action_value_matrices(dyn, task, pi)
        q = exact_value(mats)
        d = stationary_distribution(mats.P_pi)
        n_a = dyn.n_actions
        for k in range(every, cfg.steps + 1, every):
            st = run_elstdq(stream[:k], np.eye(len(q)), task.interest_vector(dyn.n_states), n_a)
            err = np.sqrt(d @ (finalize(st).w - q) ** 2)
            out.add(f"step={k}", "value_error", err)
        return out
    mats = build_matrices(dyn, task, pi)
    v = exact_value(mats, problem.absorbing)
    d = stationary_distribution(mats.P_pi)
    _, curve = run_state_agent(cfg.algorithm, stream, np.eye(dyn.n_states), step_size(cfg.alpha, cfg.tau), every)
    for k, w in curve:
        out.add(f"step={k}", "value_error", np.sqrt(d @ (w - v) ** 2))
    return out


def table1(seed: int = 0, lambdas=TABLE_LAMBDAS):
    """Rows of ``xi(D_pi)`` for the taxi variants under the uniform random policy."""
    from .domains.taxi import TaxiSpec, make_taxi
    from .domains.terminations import TerminationPattern, apply_random_termination

    dyn, episodic = make_taxi(TaxiSpec(discount_variant="trans_hard"))
    _, constant = make_taxi(TaxiSpec(discount_variant="constant", gamma_c=0.99))
    pi = Policy.uniform(dyn.n_states, dyn.n_actions)
    d = on_policy_weighting(stationary_distribution(build_matrices(dyn, episodic, pi).P_pi))
    tasks = {"episodic": episodic, "constant_0.99": constant}
    for mode in ("single_path", "all_paths"):
        for frac in (0.01, 0.1):
            tasks[f"{mode}_{frac:g}"], _ = apply_random_termination(
                dyn, episodic, TerminationPattern(mode, frac), seed)
    rows = {}
    for name, task in tasks.items():
        rows[name] = [weighted_norm(lambda_operator(build_matrices(dyn, task.replace(trace=lam), pi)).P_lambda, d)
                      for lam in lambdas]
    return rows


def cmd_reproduce(cfg: ExperimentConfig) -> ResultTable:
    """Norm table for the taxi variants followed by the greedy rollout statistics."""
    out = _table(cfg)
    lambdas = list(cfg.lambdas) or list(TABLE_LAMBDAS)
    for name, row in table1(cfg.seed, lambdas).items():
        for lam, xi in zip(lambdas, row):
            out.add(f"{name} lambda={lam:g}", "xi_d_pi", xi)
    sim = cmd_simulate(ExperimentConfig("simulate", runs=cfg.runs, steps=cfg.steps, seed=cfg.seed))
    out.rows.extend(sim.rows)
    return out
