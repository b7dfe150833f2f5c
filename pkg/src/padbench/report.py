"""Run configuration, input ingestion, diagnostic suites and aggregation of
their results through the observable and latent utility trees."""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .causal import Dag, FactorizationSpec, factorization_consistent, is_acyclic, query_identifiable
from .convergence import ESS_THRESHOLD, RHAT_THRESHOLD, convergence_report, ess, sampling_efficiency
from .draws import DrawsFormatError, DrawsTensor, Pushforward, SummaryStatistic, read_draws_csv
from .fairness import (
    AttributeSchema,
    DecisionRule,
    anti_classification_check,
    demographic_parity_gap,
    dif_check,
    read_fairness_csv,
)
from .models import get_approximator, get_model, read_dataset_csv, prior_draws
from .parsimony import enp_loo, enp_waic, laplace_log_marginal_likelihood, mdl
from .predictive import PointwiseLogLik, elpd, log_marginal_likelihood_mc, loo_is, waic
from .recoverability import coverage, posterior_contraction, run_recovery_study
from .sbc import ecdf_diff_envelope, run_sbc, uniformity_chisq
from .sensitivity import (
    SensitivitySpec,
    is_practically_sensitive,
    sensitivity_curve,
    sensitivity_distance,
    sensitivity_inputs,
)
from ._utils import derive_seed, rng_for

UTILITIES = (
    "causal_consistency",
    "parameter_recoverability",
    "predictive_performance",
    "fairness",
    "structural_faithfulness",
    "parsimony",
    "interpretability",
    "convergence",
    "estimation_speed",
    "robustness",
)
MANUAL_UTILITIES = ("structural_faithfulness", "interpretability")
STATUSES = ("pass", "fail", "flag", "not_applicable", "manual", "not_run")

TREES = {
    "observable": {
        "gates": ("fairness",),
        "secondary": ("predictive_performance", "estimation_speed", "interpretability", "robustness"),
        "tertiary": (
            "causal_consistency", "convergence", "parameter_recoverability",
            "parsimony", "structural_faithfulness",
        ),
        "required": ("predictive_performance", "fairness"),
    },
    "latent": {
        "gates": ("fairness", "causal_consistency", "convergence"),
        "secondary": ("parameter_recoverability", "estimation_speed", "interpretability", "robustness"),
        "tertiary": ("parsimony", "structural_faithfulness", "predictive_performance"),
        "required": ("convergence", "causal_consistency", "parameter_recoverability", "fairness"),
    },
}

DEFAULT_STATISTICS = ("mean", "sd", "q0.05", "q0.5", "q0.95")

DEFAULT_THRESHOLDS = {
    "rhat": RHAT_THRESHOLD,
    "ess": ESS_THRESHOLD,
    "sbc_alpha": 0.001,
    "delta": 0.2,
    "dif": 0.5,
    "parity": 0.1,
}


class InputError(ValueError):
    """Bad or inconsistent input; ``problems`` lists every issue."""

    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


class MissingSuiteError(InputError):
    pass


# --------------------------------------------------------------------------
# tree evaluation


@dataclass
class TreeVerdict:
    overall: str
    gate_failures: list
    trade_offs: list
    supporting_flags: list


def evaluate_tree(goal: str, statuses: dict) -> TreeVerdict:
    """Aggregate utility statuses through the goal's tree.

    Gates are checked in order and every failing gate is listed; any gate
    failure makes the overall verdict ``fail``. Failing or flagged secondary
    utilities are reported as trade-offs and tertiary ones as supporting
    flags; neither changes the verdict. Required suites must not be
    ``not_run``.
    """
    try:
        tree = TREES[goal]
    except KeyError:
        raise InputError(f"unknown goal {goal!r}; expected one of {sorted(TREES)}") from None
    unknown = set(statuses) - set(UTILITIES)
    if unknown:
        raise InputError(f"unknown utilities {sorted(unknown)}")
    for name in UTILITIES:
        if statuses.get(name, "not_run") not in STATUSES:
            raise InputError(f"bad status {statuses[name]!r} for {name}")
    missing = [u for u in tree["required"] if statuses.get(u, "not_run") == "not_run"]
    if missing:
        raise MissingSuiteError([f"goal {goal!r} requires the {u} suite" for u in missing])
    gate_failures = [u for u in tree["gates"] if statuses.get(u) == "fail"]
    trade_offs = [u for u in tree["secondary"] if statuses.get(u) in ("fail", "flag")]
    supporting = [u for u in tree["tertiary"] if statuses.get(u) in ("fail", "flag")]
    overall = "fail" if gate_failures else "pass"
    return TreeVerdict(overall, gate_failures, trade_offs, supporting)


def tier_of(goal: str, utility: str) -> str:
    tree = TREES[goal]
    for tier in ("gates", "secondary", "tertiary"):
        if utility in tree[tier]:
            return "primary" if tier == "gates" else tier
    raise KeyError(utility)


# --------------------------------------------------------------------------
# configuration and ingestion


@dataclass
class RunConfig:
    goal: str
    seed: int
    model: dict
    approximator: dict
    analyses: dict
    thresholds: dict
    base_dir: Path
    data: str | None = None
    draws: str | None = None
    loglik: str | None = None
    config_sha256: str = ""

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".", sha256: str = "") -> "RunConfig":
        problems = []
        if not isinstance(raw, dict):
            raise InputError("config must be a JSON object")
        goal = raw.get("goal")
        if goal not in TREES:
            problems.append(f"goal must be one of {sorted(TREES)}")
        seed = raw.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            problems.append("seed is mandatory and must be a nonnegative integer")
        model = raw.get("model")
        if not isinstance(model, dict) or "id" not in model:
            problems.append("model must be an object with an 'id'")
        approx = raw.get("approximator", {"id": "exact"})
        if not isinstance(approx, dict) or "id" not in approx:
            problems.append("approximator must be an object with an 'id'")
        analyses = raw.get("analyses", {})
        if not isinstance(analyses, dict):
            problems.append("analyses must be an object keyed by utility name")
            analyses = {}
        unknown = set(analyses) - set(UTILITIES)
        if unknown:
            problems.append(f"unknown analyses {sorted(unknown)}")
        for name, value in list(analyses.items()):
            if value is True or value is None:
                analyses[name] = {}
            elif not isinstance(value, dict):
                problems.append(f"analysis {name!r} must be true or an object of parameters")
                analyses[name] = {}
        thresholds = dict(DEFAULT_THRESHOLDS)
        extra = raw.get("thresholds", {})
        bad = set(extra) - set(DEFAULT_THRESHOLDS)
        if bad:
            problems.append(f"unknown thresholds {sorted(bad)}")
        thresholds.update({k: v for k, v in extra.items() if k in DEFAULT_THRESHOLDS})
        base = Path(base_dir)
        for key in ("data", "draws", "loglik"):
            if raw.get(key) is not None and not (base / raw[key]).is_file():
                problems.append(f"{key} file {raw[key]!r} not found")
        for key in ("dag", "spec"):
            path = analyses.get("causal_consistency", {}).get(key)
            if path is not None and not (base / path).is_file():
                problems.append(f"causal {key} file {path!r} not found")
        fair = analyses.get("fairness", {})
        if fair.get("data") is not None and not (base / fair["data"]).is_file():
            problems.append(f"fairness data file {fair['data']!r} not found")
        if problems:
            raise InputError(problems)
        return cls(
            goal, seed, model, approx, analyses, thresholds, base,
            raw.get("data"), raw.get("draws"), raw.get("loglik"), sha256,
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read config: {exc}") from None
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw, path.parent, hashlib.sha256(text).hexdigest())

    def path(self, name) -> Path:
        return self.base_dir / name


@dataclass
class Bundle:
    model: object
    approximator: object
    data: object
    draws: DrawsTensor
    loglik: PointwiseLogLik
    fit_time: float | None
    data_source: str
    warnings: list = field(default_factory=list)


def ingest(config: RunConfig) -> Bundle:
    """Build the model, load or simulate data, load or produce draws, and
    cross-check every file against the others."""
    problems = []
    try:
        model = get_model(config.model["id"], **config.model.get("params", {}))
        approximator = get_approximator(config.approximator["id"], **config.approximator.get("params", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(str(exc).strip("'\"")) from None

    if config.data is not None:
        try:
            data = read_dataset_csv(config.path(config.data))
        except (ValueError, OSError, StopIteration) as exc:
            raise InputError(f"data: {exc}") from None
        source = config.data
    else:
        rng = rng_for(config.seed, "observed-data")
        data = model.simulate(model.prior_sample(rng), rng)
        source = "simulated"

    fit_time = None
    if config.draws is not None:
        try:
            draws = read_draws_csv(config.path(config.draws))
        except DrawsFormatError as exc:
            raise InputError(exc.problems) from None
        missing = [v for v in model.parameter_names if v not in draws.variable_names]
        if missing:
            problems.append(f"draws lack model parameters {missing}")
    else:
        fit = approximator.fit(model, data, seed=derive_seed(config.seed, "main-fit"))
        draws, fit_time = fit.draws, fit.duration

    loglik = None
    if config.loglik is not None:
        try:
            loglik = PointwiseLogLik.read_csv(config.path(config.loglik))
        except (ValueError, OSError) as exc:
            problems.append(f"loglik: {exc}")
        else:
            if loglik.n_draws != draws.n_draws:
                problems.append(
                    f"loglik references {loglik.n_draws} draws but the draws file has {draws.n_draws}"
                )
            if loglik.n_obs != data.n:
                problems.append(f"loglik has {loglik.n_obs} observations but the data has {data.n}")
    if problems:
        raise InputError(problems)
    if loglik is None:
        theta = draws.select(model.parameter_names)
        loglik = PointwiseLogLik.from_model(model, theta, data)
    return Bundle(model, approximator, data, draws, loglik, fit_time, source)


# --------------------------------------------------------------------------
# suites


@dataclass
class SuiteResult:
    status: str
    metrics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)


def _variable(bundle: Bundle, params: dict) -> str:
    var = params.get("variable", bundle.model.parameter_names[0])
    if var not in bundle.draws.variable_names:
        raise InputError(f"variable {var!r} not in draws")
    return var


def suite_convergence(bundle, params, config):
    stats = [SummaryStatistic.parse(s) for s in params.get("statistics", DEFAULT_STATISTICS)]
    rep = convergence_report(
        bundle.draws, params.get("variables"), stats,
        rhat_threshold=config.thresholds["rhat"], ess_threshold=config.thresholds["ess"],
    )
    rows = rep.to_dicts()
    if any("high_rhat" in r["flags"] or "nonfinite" in r["flags"] for r in rows):
        status = "fail"
    elif rep.flagged:
        status = "flag"
    else:
        status = "pass"
    return SuiteResult(status, {"records": rows}, files={"convergence.csv": rows})


def suite_speed(bundle, params, config):
    var = _variable(bundle, params)
    e = ess(bundle.draws, var)
    timing = {}
    if bundle.fit_time is not None and bundle.fit_time > 0:
        timing = {"fit_seconds": bundle.fit_time, "ess_per_second": sampling_efficiency(e, 0.0, bundle.fit_time)}
    return SuiteResult(
        "pass", {"variable": var, "ess": e, "hyperparameter_count": bundle.approximator.hyperparameter_count},
        ["wall-clock values are recorded under the timestamp block"], timing,
    )


def suite_recoverability(bundle, params, config):
    model, approx = bundle.model, bundle.approximator
    var = params.get("variable", model.parameter_names[0])
    psi = Pushforward.identity(var)
    M, L = int(params.get("M", 200)), int(params.get("L", 99))
    n_bins = int(params.get("n_bins", 10))
    seed = derive_seed(config.seed, "recoverability")
    sbc = run_sbc(model, approx, psi, M, L, seed=seed)
    stat, p = uniformity_chisq(sbc, n_bins)
    metrics = {"variable": var, "M": M, "L": L, "chisq": stat, "p_value": p, "n_skipped": sbc.n_skipped}
    files = {"ranks.csv": sbc}
    failed = p <= config.thresholds["sbc_alpha"]
    if sbc.M >= 50:
        env = ecdf_diff_envelope(sbc, seed=seed)
        metrics["ecdf_violated"] = env.violated
        files["ecdf.csv"] = env
        failed = failed or env.violated
    cov = {}
    for q in params.get("q", [0.5, 0.9]):
        study = run_recovery_study(model, approx, psi, int(params.get("coverage_M", M)), seed=seed)
        res = coverage(study, q)
        cov[str(q)] = {"coverage": res.coverage, "ci": list(res.ci)}
        failed = failed or not (res.ci[0] <= q <= res.ci[1])
    metrics["coverage"] = cov
    prior = prior_draws(model, n_draws=4000, seed=derive_seed(config.seed, "pc-prior"))
    metrics["posterior_contraction"] = posterior_contraction(prior, bundle.draws.select([var]), psi)
    return SuiteResult("fail" if failed else "pass", metrics, files=files)


def suite_predictive(bundle, params, config):
    ll = bundle.loglik
    ins = elpd(ll)
    metrics = {"elpd_in_sample": ins.total, "elpd_in_sample_se": ins.se}
    notes = []
    flags = list(ins.flags)
    if ll.n_draws >= 100:
        loo = loo_is(ll)
        metrics["elpd_loo_is"] = loo.total
        metrics["elpd_loo_is_se"] = loo.se
        flags += loo.flags
    w = waic(ll)
    metrics["elpd_waic"] = w.total
    try:
        metrics["log_ml"] = bundle.model.log_evidence(bundle.data)
        metrics["log_ml_method"] = "analytic"
    except NotImplementedError:
        ml = log_marginal_likelihood_mc(
            bundle.model, bundle.data, int(params.get("n_prior_draws", 10_000)),
            seed=derive_seed(config.seed, "log-ml"),
        )
        metrics["log_ml"] = ml.log_ml
        metrics["log_ml_method"] = "prior_monte_carlo"
        if ml.mc_se_flag:
            flags.append("log_ml_unreliable")
    metrics["flags"] = flags
    return SuiteResult("flag" if flags else "pass", metrics, notes)


def suite_parsimony(bundle, params, config):
    ll = bundle.loglik
    metrics = {"nominal_param_count": bundle.model.dim, "enp_waic": enp_waic(ll)}
    if ll.n_draws >= 100:
        metrics["enp_loo"] = enp_loo(elpd(ll), loo_is(ll))
    try:
        log_ml, occam = laplace_log_marginal_likelihood(bundle.model, bundle.data, seed=derive_seed(config.seed, "laplace"))
        metrics["occam_factor_log"] = occam
        metrics["mdl_laplace"] = mdl(log_ml)
    except ValueError as exc:
        metrics["laplace_error"] = str(exc)
    return SuiteResult("pass", metrics, ["reported for comparison; no threshold is applied"])


def suite_robustness(bundle, params, config):
    var = _variable(bundle, params)
    delta = float(params.get("delta", config.thresholds["delta"]))
    inputs = sensitivity_inputs(bundle.model, bundle.draws.select(bundle.model.parameter_names), bundle.data, Pushforward.identity(var))
    metrics, files = {"variable": var, "delta": delta}, {}
    sensitive = False
    for component in params.get("components", ["prior", "likelihood"]):
        spec = SensitivitySpec(component, tuple(params.get("alphas", (0.8, 1.25))), delta=delta)
        dists = {}
        for a in spec.alphas:
            if a == spec.alpha0:
                continue
            d = sensitivity_distance(inputs, spec, a)
            dists[repr(a)] = d
            sensitive = sensitive or is_practically_sensitive(d, delta)
        metrics[component] = dists
        fname = "sensitivity.csv" if not files else f"sensitivity_{component}.csv"
        files[fname] = sensitivity_curve(inputs, spec)
    return SuiteResult("fail" if sensitive else "pass", metrics, files=files)


def _risk_function(spec: dict):
    weights = spec.get("weights", {})
    intercept = float(spec.get("intercept", 0.0))
    theta_weight = float(spec.get("parameter_weight", 0.0))
    link = spec.get("link", "identity")
    if link not in ("identity", "logistic"):
        raise InputError(f"unknown risk link {link!r}")

    def risk(theta, x):
        eta = intercept + sum(float(w) * float(x[a]) for a, w in weights.items())
        eta += theta_weight * float(np.asarray(theta).reshape(-1)[0])
        return 1.0 / (1.0 + math.exp(-eta)) if link == "logistic" else eta

    return risk


def suite_fairness(bundle, params, config):
    if params.get("not_applicable"):
        return SuiteResult("not_applicable", {}, ["marked not applicable in the config"])
    schema = AttributeSchema(params.get("protected", ()), params.get("unprotected", ()))
    metrics, failed, vacuous = {}, False, False
    if "data" in params:
        try:
            fdata = read_fairness_csv(config.path(params["data"]), schema)
        except (ValueError, KeyError) as exc:
            raise InputError(f"fairness data: {exc}") from None
        rule = DecisionRule(_risk_function(params.get("risk", {})), float(params.get("tau", 0.5)))
        draws = bundle.draws.select(bundle.model.parameter_names)
        grid = params.get("grid") or {
            p: sorted({a[p] for a in fdata.attributes}, key=str) for p in schema.protected
        }
        ac = anti_classification_check(rule, draws, fdata.attributes, schema, grid)
        metrics["anti_classification"] = {"holds": ac.holds, "n_counterexamples": len(ac.counterexamples)}
        vacuous = ac.vacuous
        failed = failed or not ac.holds
        decisions = [rule(x, draws) for x in fdata.attributes]
        labels = ["|".join(str(x[p]) for p in schema.protected) for x in fdata.attributes]
        gap, rates = demographic_parity_gap(decisions, labels)
        tol = float(params.get("parity_tolerance", config.thresholds["parity"]))
        metrics["demographic_parity"] = {"gap": gap, "rates": rates, "tolerance": tol}
        failed = failed or gap > tol
    if "dif" in params:
        groups = {g: tuple(v) for g, v in params["dif"]["groups"].items()}
        thr = float(params["dif"].get("threshold", config.thresholds["dif"]))
        worst, flagged = dif_check(groups, thr)
        metrics["dif"] = {"max_divergence": worst, "flagged_pairs": [[a, b, v] for a, b, v in flagged], "threshold": thr}
        failed = failed or bool(flagged)
    if not metrics:
        raise InputError("fairness analysis needs 'data', 'dif' or 'not_applicable'")
    status = "fail" if failed else ("flag" if vacuous else "pass")
    return SuiteResult(status, metrics)


def suite_causal(bundle, params, config):
    try:
        dag = Dag.read(config.path(params["dag"]))
        spec = FactorizationSpec.read(config.path(params["spec"]))
    except KeyError as exc:
        raise InputError(f"causal analysis needs {exc}") from None
    except ValueError as exc:
        raise InputError(f"causal input: {exc}") from None
    if not is_acyclic(dag):
        return SuiteResult("fail", {"acyclic": False})
    try:
        consistent, violations = factorization_consistent(dag, spec)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    metrics = {"acyclic": True, "factorization_consistent": consistent, "violations": violations}
    notes = ["causal sufficiency is assumed: no hidden confounders are modeled"]
    if "do" in params:
        ident = query_identifiable(dag, spec, params["do"], params["outcome"])
        metrics["query"] = {
            "do": params["do"],
            "outcome": params["outcome"],
            "identifiable": ident.identifiable,
            "adjustment_set": None if ident.adjustment_set is None else sorted(ident.adjustment_set),
            "required_conditionals_present": ident.required_conditionals_present,
        }
        ok = ident.identifiable is True and ident.required_conditionals_present
    else:
        ok = consistent
    return SuiteResult("pass" if ok else "fail", metrics, notes)


def suite_manual(bundle, params, config):
    status = params.get("status", "manual") if params.get("reviewed") else "manual"
    if status not in ("pass", "fail", "flag", "manual"):
        raise InputError(f"bad manual status {status!r}")
    return SuiteResult(status, {"reviewed": bool(params.get("reviewed"))}, [params.get("note", "manual checklist item")])


SUITES = {
    "convergence": suite_convergence,
    "estimation_speed": suite_speed,
    "parameter_recoverability": suite_recoverability,
    "predictive_performance": suite_predictive,
    "parsimony": suite_parsimony,
    "robustness": suite_robustness,
    "fairness": suite_fairness,
    "causal_consistency": suite_causal,
    "interpretability": suite_manual,
    "structural_faithfulness": suite_manual,
}


# --------------------------------------------------------------------------
# report


def _clean(value):
    """JSON-safe copy: numpy scalars to Python, nonfinite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return value


@dataclass
class UtilityReport:
    goal: str
    entries: dict
    verdict: TreeVerdict | None
    provenance: dict
    thresholds: dict
    warnings: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def overall(self) -> str:
        return self.verdict.overall if self.verdict else "not_run"

    @property
    def gate_failures(self) -> list:
        return self.verdict.gate_failures if self.verdict else []

    def to_dict(self) -> dict:
        utilities = []
        for name in UTILITIES:
            e = self.entries[name]
            utilities.append({
                "name": name,
                "tier": tier_of(self.goal, name),
                "status": e.status,
                "metrics": e.metrics,
                "notes": e.notes,
            })
        v = self.verdict
        return _clean({
            "goal": self.goal,
            "overall": self.overall,
            "gate_failures": self.gate_failures,
            "trade_offs": v.trade_offs if v else [],
            "supporting_flags": v.supporting_flags if v else [],
            "utilities": utilities,
            "thresholds": self.thresholds,
            "provenance": self.provenance,
            "warnings": self.warnings,
            "timestamp": {"created": datetime.datetime.now(datetime.timezone.utc).isoformat(), **self.timing},
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def build_report(config: RunConfig) -> UtilityReport:
    """Run every configured suite and aggregate through the goal's tree.

    Raises :class:`InputError` for input problems; numerical failures inside
    suites propagate unchanged.
    """
    provenance = {"config_sha256": config.config_sha256, "seed": config.seed, "version": __version__}
    if not config.analyses:
        msg = "no analyses configured: every utility is not_run"
        warnings.warn(msg, UserWarning)
        entries = {u: SuiteResult("not_run") for u in UTILITIES}
        return UtilityReport(config.goal, entries, None, provenance, config.thresholds, [msg])
    missing = [u for u in TREES[config.goal]["required"] if u not in config.analyses]
    if missing:
        raise MissingSuiteError([f"goal {config.goal!r} requires the {u} suite" for u in missing])
    bundle = ingest(config)
    provenance["data"] = bundle.data_source
    entries, timing, files = {}, {}, {}
    for name in UTILITIES:
        if name in config.analyses:
            t0 = time.perf_counter()
            res = SUITES[name](bundle, dict(config.analyses[name]), config)
            timing[name] = {"seconds": time.perf_counter() - t0, **res.timing}
            files.update(res.files)
        elif name in MANUAL_UTILITIES:
            res = SuiteResult("manual", {"reviewed": False}, ["manual checklist item"])
        else:
            res = SuiteResult("not_run")
        entries[name] = res
    verdict = evaluate_tree(config.goal, {k: v.status for k, v in entries.items()})
    return UtilityReport(config.goal, entries, verdict, provenance, config.thresholds, bundle.warnings, timing, files)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def emit(report: UtilityReport, out_dir) -> list:
    """Write ``report.json`` and any suite CSVs; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json"]
        (out / "report.json").write_text(report.to_json())
        for name, obj in sorted(report.files.items()):
            path = out / name
            if name == "convergence.csv":
                _write_csv(path, ["variable", "statistic", "rhat", "ess", "mcse", "flags"], [
                    [r["variable"], r["statistic"], repr(r["rhat"]), repr(r["ess"]), repr(r["mcse"]), ";".join(r["flags"])]
                    for r in obj
                ])
            else:
                obj.to_csv(path)
            written.append(path)
    except OSError as exc:
        raise InputError(f"cannot write outputs: {exc}") from None
    return written
