"""Monte Carlo experiment engine.

Data model: y = X beta_star + eps with X an n-by-p standard normal design.
Errors come from one of three centered families (normal, scaled Student-t,
centered skew-t); the heteroscedastic variant multiplies each draw by
(x_i' beta_star)^2 / (sqrt(3) ||beta_star||_2^2), which preserves the
marginal variance of the homoscedastic draw.

Replication k of a run derives its generator from
SeedSequence(entropy=seed, spawn_key=(k,)) over the Philox counter-based
stream, so each replication is identical no matter how many replications
run, in what order, or on how many threads.  Aggregation always reduces in
replication-index order, making serial and parallel runs byte-identical.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .diagnostics import support_metrics
from .errors import ConfigurationError, NumericalError
from .estimators import EstimatorPipeline, make_pipeline
from .objective import Dataset
from .solver import SolverConfig

_METRIC_NAMES = ("l2", "linf", "fp_pct", "fn_pct")


def skew_t_mean(loc: float, scale: float, shape: float, df: float) -> float:
    """Mean of the skew-t law with the given location/scale/shape/df (df > 1):

    loc + scale * delta * sqrt(df/pi) * Gamma((df-1)/2) / Gamma(df/2),
    delta = shape / sqrt(1 + shape^2).
    """
    if df <= 1:
        raise ConfigurationError("skew-t mean requires df > 1")
    delta = shape / math.sqrt(1.0 + shape * shape)
    return loc + scale * delta * math.sqrt(df / math.pi) * math.gamma((df - 1) / 2.0) / math.gamma(
        df / 2.0
    )


def sample_skew_t(loc: float, scale: float, shape: float, df: float, rng: Generator, size=None):
    """Draw from the skew-t law via its stochastic representation.

    Z = delta |U0| + sqrt(1 - delta^2) U1 with U0, U1 independent standard
    normals and delta = shape / sqrt(1 + shape^2) gives a skew-normal
    variate; dividing by sqrt(W/df) with W ~ chi^2_df independent of
    (U0, U1) and applying location/scale yields the skew-t draw.
    """
    if df <= 0 or scale <= 0:
        raise ConfigurationError("sample_skew_t requires df > 0 and scale > 0")
    delta = shape / math.sqrt(1.0 + shape * shape)
    u0 = rng.standard_normal(size)
    u1 = rng.standard_normal(size)
    z = delta * np.abs(u0) + math.sqrt(1.0 - delta * delta) * u1
    w = rng.chisquare(df, size)
    return loc + scale * z / np.sqrt(w / df)


@dataclass(frozen=True)
class NormalErrors:
    """Centered normal base errors with the given variance."""

    var: float = 4.0

    def __post_init__(self):
        if self.var <= 0:
            raise ConfigurationError("normal error variance must be positive")

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        return self.var

    def sample(self, rng: Generator, size):
        return rng.normal(0.0, math.sqrt(self.var), size)


@dataclass(frozen=True)
class StudentTErrors:
    """scale * T with T Student-t distributed (df > 2 so the variance exists)."""

    df: float = 3.0
    scale: float = 2.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigurationError("student-t scale must be positive")
        if self.df <= 2:
            raise ConfigurationError("student-t errors require df > 2")

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        return self.scale**2 * self.df / (self.df - 2.0)

    def sample(self, rng: Generator, size):
        return self.scale * rng.standard_t(self.df, size)


@dataclass(frozen=True)
class SkewTErrors:
    """Skew-t base errors; draws are later centered by the exact mean."""

    loc: float = 0.0
    scale: float = 1.0
    shape: float = 0.6
    df: float = 3.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigurationError("skew-t scale must be positive")
        if self.df <= 2:
            raise ConfigurationError("skew-t errors require df > 2")

    def mean(self) -> float:
        return skew_t_mean(self.loc, self.scale, self.shape, self.df)

    def variance(self) -> float:
        second = self.scale**2 * self.df / (self.df - 2.0)
        return second - (self.mean() - self.loc) ** 2

    def sample(self, rng: Generator, size):
        return sample_skew_t(self.loc, self.scale, self.shape, self.df, rng, size)


_FAMILY_TAGS = {"normal": NormalErrors, "student_t": StudentTErrors, "skew_t": SkewTErrors}


def _family_to_json(fam) -> dict:
    for tag, cls in _FAMILY_TAGS.items():
        if isinstance(fam, cls):
            d = {"family": tag}
            d.update({k: getattr(fam, k) for k in fam.__dataclass_fields__})
            return d
    raise ConfigurationError(f"unknown error family {type(fam).__name__}")


def _family_from_json(obj) -> "NormalErrors | StudentTErrors | SkewTErrors":
    if not isinstance(obj, dict) or "family" not in obj:
        raise ConfigurationError("error_family must be an object with a 'family' tag")
    tag = obj["family"]
    if tag not in _FAMILY_TAGS:
        raise ConfigurationError(
            f"error_family.family must be one of {sorted(_FAMILY_TAGS)}, got {tag!r}"
        )
    cls = _FAMILY_TAGS[tag]
    kwargs = {k: v for k, v in obj.items() if k != "family"}
    allowed = set(cls.__dataclass_fields__)
    unknown = sorted(set(kwargs) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown error_family fields: {unknown}")
    return cls(**kwargs)


@dataclass(frozen=True)
class Scenario:
    """One simulation recipe: dimensions, signal, error law, master seed."""

    n: int
    p: int
    beta_star: np.ndarray
    error_family: object
    heteroscedastic: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ConfigurationError("scenario requires n >= 1 and p >= 1")
        beta = np.ascontiguousarray(self.beta_star, dtype=float).reshape(-1)
        if beta.shape[0] != self.p:
            raise ConfigurationError(
                f"beta_star has length {beta.shape[0]}, expected p = {self.p}"
            )
        if self.heteroscedastic and not np.any(beta != 0.0):
            raise ConfigurationError("heteroscedastic errors need a nonzero beta_star")
        beta.flags.writeable = False
        object.__setattr__(self, "beta_star", beta)

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "p": self.p,
            "beta_star": self.beta_star.tolist(),
            "error_family": _family_to_json(self.error_family),
            "heteroscedastic": self.heteroscedastic,
            "seed": self.seed,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario file is not valid JSON: {exc}") from exc
        required = {"n", "p", "beta_star", "error_family", "heteroscedastic", "seed"}
        if not isinstance(obj, dict):
            raise ConfigurationError("scenario JSON must be an object")
        missing = sorted(required - set(obj))
        extra = sorted(set(obj) - required)
        if missing or extra:
            raise ConfigurationError(
                f"scenario schema mismatch; missing fields {missing}, unknown fields {extra}"
            )
        return cls(
            n=int(obj["n"]),
            p=int(obj["p"]),
            beta_star=np.asarray(obj["beta_star"], dtype=float),
            error_family=_family_from_json(obj["error_family"]),
            heteroscedastic=bool(obj["heteroscedastic"]),
            seed=int(obj["seed"]),
        )


def standard_beta_star(p: int = 400, s: int = 20, value: float = 3.0) -> np.ndarray:
    """Signal vector with `value` on the first s coordinates and zeros after."""
    if s > p:
        raise ConfigurationError("s cannot exceed p")
    beta = np.zeros(p)
    beta[:s] = value
    return beta


def builtin_scenario(name: str, seed: int = 0) -> Scenario:
    """Bundled benchmark scenarios (n=200, p=400, 20 signal coefficients of 3).

    table1/table2: normal errors of variance 4 (homo-/heteroscedastic);
    table3/table4: 2x Student-t with 3 degrees of freedom;
    table5/table6: skew-t(0, 1, 0.6, 3), centered.
    """
    families = {
        "table1": (NormalErrors(4.0), False),
        "table2": (NormalErrors(4.0), True),
        "table3": (StudentTErrors(3.0, 2.0), False),
        "table4": (StudentTErrors(3.0, 2.0), True),
        "table5": (SkewTErrors(0.0, 1.0, 0.6, 3.0), False),
        "table6": (SkewTErrors(0.0, 1.0, 0.6, 3.0), True),
    }
    if name not in families:
        raise ConfigurationError(
            f"unknown builtin scenario {name!r}; expected one of {sorted(families)}"
        )
    fam, hetero = families[name]
    return Scenario(
        n=200, p=400, beta_star=standard_beta_star(), error_family=fam,
        heteroscedastic=hetero, seed=seed,
    )


#: Reported tuned (lambda, alpha) per bundled scenario and estimator label,
#: in the reporting convention of EstimatorPipeline.fit; alpha is None for
#: the squared-loss estimators.  Adaptive labels use the same table's plain
#: estimator as their fixed initial stage.
REFERENCE_TUNING = {
    "table1": {
        "L": (0.154, None), "AL": (0.695, None),
        "LH": (0.157, 0.115), "LPH": (0.150, 0.061),
        "ALH(LH)": (0.066, 0.153), "ALPH(LH)": (0.067, 0.050), "ALPH(LPH)": (0.069, 0.050),
    },
    "table2": {
        "L": (0.150, None), "AL": (0.715, None),
        "LH": (0.018, 3.476),
        "ALH(LH)": (0.0003, 57.068), "ALPH(LH)": (0.0003, 55.474),
    },
    "table3": {
        "L": (0.262, None), "AL": (0.901, None),
        "LH": (0.142, 0.429), "LPH": (0.080, 0.742),
        "ALH(LH)": (0.059, 0.563), "ALPH(LH)": (0.040, 0.769), "ALPH(LPH)": (0.033, 0.974),
    },
    "table4": {
        "L": (0.226, None), "AL": (0.849, None),
        "LH": (0.019, 3.574),
        "ALH(LH)": (0.0005, 33.854), "ALPH(LH)": (0.0006, 29.368),
    },
    "table5": {
        "L": (0.118, None), "AL": (0.709, None),
        "LH": (0.070, 0.863), "LPH": (0.058, 0.871),
        "ALH(LH)": (0.019, 1.124), "ALPH(LH)": (0.011, 1.842), "ALPH(LPH)": (0.010, 2.184),
    },
    "table6": {
        "L": (0.110, None), "AL": (0.649, None),
        "LH": (0.009, 7.00),
        "ALH(LH)": (0.0003, 33.898), "ALPH(LH)": (0.0002, 50.684),
    },
}

_INIT_STAGE_OF = {"AL": "L", "ALH(LH)": "LH", "ALPH(LH)": "LH", "ALPH(LPH)": "LPH"}


def reference_pipeline(scenario_name: str, label: str) -> EstimatorPipeline:
    """Pipeline for a bundled scenario with its reported initial-stage tuning."""
    if scenario_name not in REFERENCE_TUNING:
        raise ConfigurationError(f"no reference tuning for scenario {scenario_name!r}")
    table = REFERENCE_TUNING[scenario_name]
    if label in _INIT_STAGE_OF:
        init_label = _INIT_STAGE_OF[label]
        if init_label not in table:
            raise ConfigurationError(
                f"scenario {scenario_name!r} has no reference tuning for initial stage {init_label!r}"
            )
        init_lam, init_alpha = table[init_label]
        return make_pipeline(label, init_lambda=init_lam, init_alpha=init_alpha)
    return make_pipeline(label)


def gen_design(n: int, p: int, rng: Generator) -> np.ndarray:
    """n-by-p matrix of independent standard normal entries."""
    return rng.standard_normal((n, p))


def heteroscedastic_scale(X, beta_star, eps_tilde) -> np.ndarray:
    """(x_i' beta_star)^2 * eps_i / (sqrt(3) ||beta_star||_2^2).

    The normalization makes the scaled draw match the variance of the
    unscaled one when X is standard normal.
    """
    beta_star = np.asarray(beta_star, dtype=float)
    nrm2 = float(beta_star @ beta_star)
    if nrm2 == 0.0:
        raise ConfigurationError("heteroscedastic scaling needs a nonzero beta_star")
    proj = np.asarray(X, dtype=float) @ beta_star
    return proj * proj * np.asarray(eps_tilde, dtype=float) / (math.sqrt(3.0) * nrm2)


def gen_errors(scenario: Scenario, X, rng: Generator) -> np.ndarray:
    """Error vector for one replication; centered by construction."""
    fam = scenario.error_family
    eps = np.asarray(fam.sample(rng, scenario.n), dtype=float) - fam.mean()
    if scenario.heteroscedastic:
        eps = heteroscedastic_scale(X, scenario.beta_star, eps)
    return eps


def replication_rng(seed: int, k: int) -> Generator:
    """Generator for replication k; independent of all other replications."""
    return Generator(Philox(SeedSequence(entropy=seed, spawn_key=(k,))))


def replication_data(scenario: Scenario, seed: int, k: int) -> Dataset:
    """Fresh (X, y) for replication k of a run keyed by the master seed."""
    rng = replication_rng(seed, k)
    X = gen_design(scenario.n, scenario.p, rng)
    eps = gen_errors(scenario, X, rng)
    return Dataset(X, X @ scenario.beta_star + eps)


@dataclass
class SimReport:
    """Aggregated Monte Carlo metrics for one estimator configuration."""

    estimator_label: str
    lam: float
    alpha: float | None
    mean_l2: float
    mean_linf: float
    mean_fp_pct: float
    mean_fn_pct: float
    replications: int
    seed: int
    failed: int = 0
    details: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> str:
        payload = {
            "estimator_label": self.estimator_label,
            "lambda": self.lam,
            "alpha": self.alpha,
            "mean_l2": self.mean_l2,
            "mean_linf": self.mean_linf,
            "mean_fp_pct": self.mean_fp_pct,
            "mean_fn_pct": self.mean_fn_pct,
            "replications": self.replications,
            "seed": self.seed,
            "failed": self.failed,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimReport":
        obj = json.loads(text)
        return cls(
            estimator_label=obj["estimator_label"],
            lam=obj["lambda"],
            alpha=obj["alpha"],
            mean_l2=obj["mean_l2"],
            mean_linf=obj["mean_linf"],
            mean_fp_pct=obj["mean_fp_pct"],
            mean_fn_pct=obj["mean_fn_pct"],
            replications=obj["replications"],
            seed=obj["seed"],
            failed=obj.get("failed", 0),
        )


def format_table(reports) -> str:
    """Aligned text table, one column per report, rows lambda / alpha /
    l2 norm / linf norm / FP in % / FN in %."""
    reports = list(reports)
    rows = [
        ("lambda", [f"{r.lam:.4g}" for r in reports]),
        ("alpha", ["" if r.alpha is None else f"{r.alpha:.4g}" for r in reports]),
        ("l2 norm", [f"{r.mean_l2:.2f}" for r in reports]),
        ("linf norm", [f"{r.mean_linf:.2f}" for r in reports]),
        ("FP in %", [f"{r.mean_fp_pct:.2f}" for r in reports]),
        ("FN in %", [f"{r.mean_fn_pct:.2f}" for r in reports]),
    ]
    headers = [r.estimator_label for r in reports]
    label_w = max(len(name) for name, _ in rows)
    col_ws = [
        max(len(h), max(len(row[1][j]) for row in rows)) for j, h in enumerate(headers)
    ]
    lines = [" " * label_w + "  " + "  ".join(h.rjust(col_ws[j]) for j, h in enumerate(headers))]
    for name, cells in rows:
        lines.append(
            name.ljust(label_w) + "  " + "  ".join(c.rjust(col_ws[j]) for j, c in enumerate(cells))
        )
    return "\n".join(lines) + "\n"


def _run_one(scenario, pipeline, lam, alpha, cfg, seed, k):
    data = replication_data(scenario, seed, k)
    beta_hat, _ = pipeline.fit(data, lam, alpha, cfg)
    m = support_metrics(beta_hat, scenario.beta_star)
    return (m.l2_error, m.linf_error, m.fp_pct, m.fn_pct)


def run_monte_carlo(
    scenario: Scenario,
    pipeline: EstimatorPipeline,
    lam: float,
    alpha: float | None,
    reps: int,
    seed: int | None = None,
    cfg: SolverConfig | None = None,
    threads: int = 1,
    keep_details: bool = False,
) -> SimReport:
    """Average estimation/selection metrics over seeded replications.

    Replications that raise a numerical failure are excluded from the means
    and counted in ``failed``.  Results are a pure function of
    (scenario, pipeline, lam, alpha, reps, seed) regardless of ``threads``.
    """
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")
    if seed is None:
        seed = scenario.seed
    if cfg is None:
        cfg = SolverConfig()

    def task(k):
        try:
            return _run_one(scenario, pipeline, lam, alpha, cfg, seed, k)
        except NumericalError:
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(reps)))
    else:
        results = [task(k) for k in range(reps)]

    rows = np.asarray([r for r in results if r is not None], dtype=float)
    failed = sum(1 for r in results if r is None)
    if rows.size == 0:
        raise NumericalError("every replication failed")
    means = rows.mean(axis=0)
    return SimReport(
        estimator_label=pipeline.label,
        lam=float(lam),
        alpha=None if alpha is None else float(alpha),
        mean_l2=float(means[0]),
        mean_linf=float(means[1]),
        mean_fp_pct=float(means[2]),
        mean_fn_pct=float(means[3]),
        replications=int(rows.shape[0]),
        seed=int(seed),
        failed=failed,
        details=rows if keep_details else None,
    )


def grid_search(
    scenario: Scenario,
    pipeline: EstimatorPipeline,
    alpha_grid,
    lambda_grid,
    reps: int,
    seed: int | None = None,
    cfg: SolverConfig | None = None,
    threads: int = 1,
):
    """Pick the grid point with the smallest mean l2 error.

    All grid points see the same replication data (common random numbers:
    the per-replication seed does not depend on the grid point).  Ties are
    broken toward the smaller lambda, then the smaller alpha.  Returns
    (alpha_star, lambda_star, winning SimReport, surface rows).
    """
    lambda_grid = [float(v) for v in lambda_grid]
    if pipeline.uses_alpha:
        alpha_grid = [float(a) for a in alpha_grid]
    else:
        alpha_grid = [None]
    if not lambda_grid or not alpha_grid:
        raise ConfigurationError("grids must be nonempty")
    if seed is None:
        seed = scenario.seed
    if cfg is None:
        cfg = SolverConfig()
    points = [(a, l) for a in alpha_grid for l in lambda_grid]

    def rep_task(k):
        data = replication_data(scenario, seed, k)
        out = []
        for a, l in points:
            try:
                beta_hat, _ = pipeline.fit(data, l, a, cfg)
                m = support_metrics(beta_hat, scenario.beta_star)
                out.append((m.l2_error, m.linf_error, m.fp_pct, m.fn_pct))
            except NumericalError:
                out.append(None)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(rep_task, range(reps)))
    else:
        per_rep = [rep_task(k) for k in range(reps)]

    surface = []
    best = None
    for j, (a, l) in enumerate(points):
        rows = np.asarray([r[j] for r in per_rep if r[j] is not None], dtype=float)
        failed = sum(1 for r in per_rep if r[j] is None)
        if rows.size == 0:
            surface.append(
                {"alpha": a, "lambda": l, "mean_l2": float("nan"),
                 "mean_linf": float("nan"), "mean_fp_pct": float("nan"),
                 "mean_fn_pct": float("nan"), "replications": 0, "failed": failed}
            )
            continue
        means = rows.mean(axis=0)
        surface.append(
            {"alpha": a, "lambda": l, "mean_l2": float(means[0]),
             "mean_linf": float(means[1]), "mean_fp_pct": float(means[2]),
             "mean_fn_pct": float(means[3]), "replications": int(rows.shape[0]),
             "failed": failed}
        )
        key = (means[0], l, a if a is not None else 0.0)
        if best is None or key < best[0]:
            report = SimReport(
                estimator_label=pipeline.label,
                lam=l,
                alpha=a,
                mean_l2=float(means[0]),
                mean_linf=float(means[1]),
                mean_fp_pct=float(means[2]),
                mean_fn_pct=float(means[3]),
                replications=int(rows.shape[0]),
                seed=int(seed),
                failed=failed,
            )
            best = (key, a, l, report)
    if best is None:
        raise NumericalError("every grid point failed in every replication")
    _, alpha_star, lambda_star, report = best
    return alpha_star, lambda_star, report, surface
