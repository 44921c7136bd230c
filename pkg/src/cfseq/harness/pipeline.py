"""End-to-end protocol: train, collect failures, explain, evaluate, report.

Run directory layout::

    config.ini
    policy.json
    failures.jsonl
    trajectories/<case-id>.jsonl
    explanations/<method>/<case-id>.json
    results.csv
    diversity.csv
    report.md
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..baselines import run_baseline
from ..core import Environment, FailureCase, InputError, derive_seed
from ..diversity import diversity_report
from ..envs import NavController, make_env
from ..explanation import ExplanationSet
from ..nsga2 import METHOD as NSGA_METHOD, evolve
from ..policy import QFunction, collect_failures, train_tabular_q
from .config import ALL_METHODS, ConfigError, RunConfig

log = logging.getLogger(__name__)

RESULT_FIELDS = ("method", "failures", "generated_pct", "empty_sets", "validity", "proximity",
                 "sparsity", "stochastic_certainty", "recency")
DIVERSITY_FIELDS = ("method", "failures", "coverage", "action_diversity", "cf_property_diversity")


@dataclass
class MethodSummary:
    """Macro-averaged properties: per counterfactual, then per failure, then per method.

    ``sparsity`` is the fraction of window positions changed so that windows
    of different lengths are comparable.  Property means are ``None`` when
    the method produced no counterfactual at all.
    """

    method: str
    failures: int
    generated: int
    validity: float | None = None
    proximity: float | None = None
    sparsity: float | None = None
    stochastic_certainty: float | None = None
    recency: float | None = None

    @property
    def empty_sets(self) -> int:
        return self.failures - self.generated

    @property
    def generated_pct(self) -> float:
        return 100.0 * self.generated / self.failures if self.failures else 0.0


@dataclass
class ResultsTable:
    env: str
    summaries: list = field(default_factory=list)
    diversity: dict = field(default_factory=dict)
    status: str = "ok"

    def summary(self, method: str) -> MethodSummary:
        for s in self.summaries:
            if s.method == method:
                return s
        raise KeyError(method)

    def results_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        for s in self.summaries:
            writer.writerow([s.method, s.failures, _num(s.generated_pct), s.empty_sets] +
                            [_num(getattr(s, f)) for f in RESULT_FIELDS[4:]])
        return buf.getvalue()

    def diversity_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(DIVERSITY_FIELDS)
        for s in self.summaries:
            d = self.diversity[s.method]
            writer.writerow([s.method, d.failures_evaluated, _num(d.coverage),
                             _num(d.action_diversity), _num(d.cf_property_diversity)])
        return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def summarize(method: str, sets: list) -> MethodSummary:
    found = [s for s in sets if s.found]
    out = MethodSummary(method, len(sets), len(found))
    if not found:
        return out

    def macro(fn):
        return math.fsum(math.fsum(fn(m) for m in s.members) / len(s.members) for s in found) / len(found)

    out.validity = macro(lambda m: m.properties.validity)
    out.proximity = macro(lambda m: m.properties.proximity)
    out.sparsity = macro(lambda m: m.properties.sparsity / len(m.actions))
    out.stochastic_certainty = macro(lambda m: m.properties.stochastic_certainty)
    out.recency = macro(lambda m: m.properties.recency)
    return out


# ---------------------------------------------------------------------------
# stages


def build_env(cfg: RunConfig) -> Environment:
    try:
        return make_env(cfg.env, **cfg.env_params)
    except InputError as exc:
        raise ConfigError(str(exc)) from None


def prepare_output(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from None
    (out / "config.ini").write_text(cfg.to_ini())
    return out


def load_policy(env: Environment, path: Path):
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read policy {path}: {exc}") from None
    if data.get("kind") == "scripted-nav":
        return NavController(env, data["cruise"], data["brake_at"])
    return QFunction.from_json(data, env)


def train_stage(cfg: RunConfig, env: Environment, out: Path):
    if env.action_space.is_discrete:
        policy = train_tabular_q(env, cfg.train_config(derive_seed(cfg.seed, "train")))
    else:
        policy = NavController(env)
    (out / "policy.json").write_text(json.dumps(policy.to_json(), sort_keys=True) + "\n")
    return policy


def collect_stage(cfg: RunConfig, env: Environment, policy, out: Path) -> list:
    cases, trajectories = collect_failures(env, policy, cfg.n_episodes, cfg.horizon,
                                           derive_seed(cfg.seed, "collect"), return_trajectories=True)
    if cfg.max_cases:
        cases, trajectories = cases[: cfg.max_cases], trajectories[: cfg.max_cases]
    (out / "failures.jsonl").write_text("".join(json.dumps(c.to_json(), sort_keys=True) + "\n" for c in cases))
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    for case, traj in zip(cases, trajectories):
        (traj_dir / f"{case.case_id}.jsonl").write_text(traj.to_jsonl())
    return cases


def load_cases(out: Path) -> list:
    path = out / "failures.jsonl"
    if not path.exists():
        raise ConfigError(f"{path} missing; run the collect stage first")
    return [FailureCase.from_json(json.loads(line)) for line in path.read_text().splitlines() if line.strip()]


def explain_case(cfg: RunConfig, env: Environment, policy, case: FailureCase, method: str) -> ExplanationSet:
    seed = derive_seed(cfg.seed, f"cf:{case.case_id}:{method}")
    mc_seed = derive_seed(cfg.seed, f"mc:{case.case_id}")
    if method == NSGA_METHOD:
        return evolve(env, case, cfg.nsga_config(seed), cfg.samples, cfg.eps, mc_seed, cfg.terminal_only)
    return run_baseline(method, env, policy, case, cfg.temperature, cfg.trials, seed, cfg.samples,
                        cfg.eps, mc_seed, cfg.terminal_only)


def explain_stage(cfg: RunConfig, env: Environment, policy, cases: list, out: Path,
                  methods=None) -> dict:
    results = {}
    for method in methods or cfg.method_list:
        mdir = out / "explanations" / method
        mdir.mkdir(parents=True, exist_ok=True)
        sets = []
        for case in sorted(cases, key=lambda c: c.case_id):
            result = explain_case(cfg, env, policy, case, method)
            (mdir / f"{case.case_id}.json").write_text(result.dumps() + "\n")
            sets.append(result)
        log.info("%s: %d/%d failures explained", method, sum(s.found for s in sets), len(sets))
        results[method] = sets
    return results


def load_explanations(out: Path, cases: list, methods) -> dict:
    results = {}
    for method in methods:
        mdir = out / "explanations" / method
        if not mdir.is_dir():
            continue
        sets = []
        for case in sorted(cases, key=lambda c: c.case_id):
            path = mdir / f"{case.case_id}.json"
            if not path.exists():
                raise ConfigError(f"{path} missing; run the explain stage for {method}")
            sets.append(ExplanationSet.loads(path.read_text()))
        results[method] = sets
    return results


def evaluate_stage(cfg: RunConfig, env: Environment, explanations: dict, out: Path) -> ResultsTable:
    table = ResultsTable(cfg.env)
    for method in ALL_METHODS:
        sets = explanations.get(method)
        if not sets:
            continue
        sets = sorted(sets, key=lambda s: s.case_id)
        table.summaries.append(summarize(method, sets))
        table.diversity[method] = diversity_report(sets, env.action_space)
    if not table.summaries:
        table.status = "no-failures"
    (out / "results.csv").write_text(table.results_csv())
    (out / "diversity.csv").write_text(table.diversity_csv())
    return table


def run_pipeline(cfg: RunConfig) -> ResultsTable:
    """Run every stage.  Returns a table with ``status == "no-failures"`` when
    the policy never failed; all artifacts are still written."""
    from .report import report

    env = build_env(cfg)
    out = prepare_output(cfg)
    policy = train_stage(cfg, env, out)
    cases = collect_stage(cfg, env, policy, out)
    log.info("collected %d failure cases", len(cases))
    explanations = explain_stage(cfg, env, policy, cases, out)
    table = evaluate_stage(cfg, env, explanations, out)
    (out / "report.md").write_text(report(out, "markdown"))
    return table
