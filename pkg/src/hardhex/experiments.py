"""Tunneling-time campaigns: beta sweeps, slope fits, exponentiality and reports.

A campaign runs, for every inverse temperature, a batch of coupled
trajectories from a start stable configuration: each trajectory records the
first entrance into the target set (default ``{b, c}``) and, continuing the
same trajectory, the first entrance into the first target (default ``b``).

The slope reported is the least-squares slope of ``log(mean tau)`` against
``beta``.  It estimates the energy barrier up to a finite-beta intercept,
which is why reports state the fit form explicitly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats

from . import __version__
from .config import stable_configs
from .dynamics import DEFAULT_CAP, RNG_ID, DynamicsParams, run_nested_batch
from .lattice import Grid, GridSpec, build_grid

SCHEMA_VERSION = "1.0"
TRUNCATION_LIMIT = 0.05
KS_ALPHA = 0.01

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hardhex campaign summary",
    "type": "object",
    "required": ["schema_version", "grid", "gamma", "start", "target", "inner_target",
                 "seed", "per_beta", "slope", "slope_se", "slope_reliable", "fit",
                 "ks_stat", "ks_critical", "ratio", "ratios"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "grid": {"type": "object", "required": ["K", "L"],
                 "properties": {"K": {"type": "integer", "minimum": 2},
                                "L": {"type": "integer", "minimum": 1}}},
        "gamma": {"type": "integer"},
        "start": {"type": "string"},
        "target": {"type": "string"},
        "inner_target": {"type": "string"},
        "seed": {"type": "integer"},
        "per_beta": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object",
                "required": ["beta", "count", "truncations", "mean", "variance",
                             "inner_mean", "inner_variance"],
                "properties": {
                    "beta": {"type": "number"},
                    "count": {"type": "integer", "minimum": 0},
                    "truncations": {"type": "integer", "minimum": 0},
                    "mean": {"type": ["number", "null"]},
                    "variance": {"type": ["number", "null"]},
                    "inner_mean": {"type": ["number", "null"]},
                    "inner_variance": {"type": ["number", "null"]},
                },
            },
        },
        "slope": {"type": ["number", "null"]},
        "slope_se": {"type": ["number", "null"]},
        "slope_reliable": {"type": "boolean"},
        "fit": {"type": "string"},
        "ks_stat": {"type": ["number", "null"]},
        "ks_critical": {"type": ["number", "null"]},
        "ratio": {"type": ["number", "null"]},
        "ratios": {"type": "array", "items": {"type": ["number", "null"]}},
        "metadata": {"type": "object"},
    },
}


def gamma(grid) -> int:
    """Energy barrier between stable configurations, ``min{K, 2L} + 1``."""
    g = grid if isinstance(grid, (Grid, GridSpec)) else GridSpec(*grid)
    return min(g.K, 2 * g.L) + 1


@dataclass(frozen=True)
class CampaignSpec:
    """What to simulate.

    Parameters
    ----------
    grid : GridSpec
    betas : sequence of float
        Strictly increasing inverse temperatures.
    samples_per_beta : int
        At least 100.
    start : {"a", "b", "c"}
    target : str
        Letters of the target stable configurations, e.g. ``"bc"``.  The
        first letter is also tracked on its own along each trajectory.
    seed : int
    cap : int
        Step cap per trajectory; longer runs are recorded as truncated.
    """

    grid: GridSpec
    betas: tuple
    samples_per_beta: int = 2000
    start: str = "a"
    target: str = "bc"
    seed: int = 0
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not isinstance(self.grid, GridSpec):
            object.__setattr__(self, "grid", GridSpec(*self.grid))
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if not betas:
            raise ValueError("at least one beta is required")
        if any(not math.isfinite(b) or b < 0 for b in betas):
            raise ValueError("betas must be finite and nonnegative")
        if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError("betas must be strictly increasing")
        if self.samples_per_beta < 100:
            raise ValueError("samples_per_beta must be at least 100")
        start = self.start.lower()
        target = self.target.lower()
        if start not in ("a", "b", "c"):
            raise ValueError(f"start must be one of a, b, c; got {self.start!r}")
        if not target or set(target) - {"a", "b", "c"} or len(set(target)) != len(target):
            raise ValueError(f"target must be distinct letters from a, b, c; got {self.target!r}")
        if start in target:
            raise ValueError("start must not belong to the target set")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "target", target)

    @property
    def inner_target(self) -> str:
        return self.target[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = {"K": self.grid.K, "L": self.grid.L}
        d["betas"] = list(self.betas)
        return d


@dataclass
class BetaSummary:
    beta: float
    count: int
    truncations: int
    mean: float | None
    variance: float | None
    inner_mean: float | None
    inner_variance: float | None

    @property
    def ratio(self):
        if not self.mean or self.inner_mean is None:
            return None
        return self.inner_mean / self.mean


@dataclass
class CampaignResult:
    spec: CampaignSpec
    summaries: list
    samples: list  # per beta: list of NestedSample
    slope: float | None
    slope_se: float | None
    slope_reliable: bool
    ks_stat: float | None
    ks_critical: float | None
    ratio: float | None
    intercept: float | None = None
    notes: list = field(default_factory=list)

    @property
    def gamma(self) -> int:
        return gamma(self.spec.grid)

    @property
    def ks_passed(self) -> bool:
        return self.ks_stat is not None and self.ks_stat < self.ks_critical

    def summary(self) -> dict:
        s = self.spec
        return {
            "schema_version": SCHEMA_VERSION,
            "grid": {"K": s.grid.K, "L": s.grid.L},
            "gamma": self.gamma,
            "start": s.start,
            "target": s.target,
            "inner_target": s.inner_target,
            "seed": s.seed,
            "samples_per_beta": s.samples_per_beta,
            "per_beta": [asdict(b) for b in self.summaries],
            "slope": self.slope,
            "slope_se": self.slope_se,
            "slope_reliable": self.slope_reliable,
            "intercept": self.intercept,
            "fit": "least squares of log(mean tau) against beta; slope estimates the barrier "
                   "up to a finite-beta intercept",
            "ks_stat": self.ks_stat,
            "ks_critical": self.ks_critical,
            "ratio": self.ratio,
            "ratios": [b.ratio for b in self.summaries],
            "notes": list(self.notes),
        }


def _moments(x: np.ndarray):
    if len(x) == 0:
        return None, None
    return float(x.mean()), (float(x.var(ddof=1)) if len(x) > 1 else 0.0)


def _ks_exponential(tau: np.ndarray):
    """KS distance of ``tau / mean(tau)`` from Exp(1) and the level-``KS_ALPHA`` critical value."""
    n = len(tau)
    if n < 2 or tau.mean() == 0:
        return None, None
    d = stats.kstest(tau / tau.mean(), "expon").statistic
    return float(d), float(stats.kstwo.ppf(1 - KS_ALPHA, n))


def run_campaign(spec: CampaignSpec, workers: int = 1) -> CampaignResult:
    """Run the sweep.  Beta ``k`` uses random stream ``k``, so results depend only on ``spec``."""
    grid = build_grid(spec.grid)
    stable = dict(zip("abc", stable_configs(grid)))
    start = stable[spec.start]
    outer = [stable[t] for t in spec.target]
    inner = [stable[spec.inner_target]]
    summaries, all_samples = [], []
    for k, beta in enumerate(spec.betas):
        params = DynamicsParams(beta, spec.seed)
        batch = run_nested_batch(start, outer, inner, params, spec.samples_per_beta,
                                 workers, spec.cap, stream=k)
        all_samples.append(batch)
        ok = [s for s in batch if not s.truncated]
        tau = np.array([s.outer_steps for s in ok], dtype=float)
        tau_in = np.array([s.inner_steps for s in ok], dtype=float)
        m, v = _moments(tau)
        mi, vi = _moments(tau_in)
        summaries.append(BetaSummary(beta, len(ok), len(batch) - len(ok), m, v, mi, vi))

    notes = []
    slope = se = icpt = None
    fit_pts = [(b.beta, math.log(b.mean)) for b in summaries if b.mean]
    if len(fit_pts) >= 2:
        x, y = zip(*fit_pts)
        if len(fit_pts) == 2:
            slope = (y[1] - y[0]) / (x[1] - x[0])
            icpt = y[0] - slope * x[0]
            se = float("nan")
        else:
            fit = stats.linregress(x, y)
            slope, se, icpt = float(fit.slope), float(fit.stderr), float(fit.intercept)
    total = sum(len(b) for b in all_samples)
    trunc = sum(b.truncations for b in summaries)
    reliable = slope is not None and trunc <= TRUNCATION_LIMIT * total
    if trunc > TRUNCATION_LIMIT * total:
        notes.append(f"{trunc}/{total} samples truncated; slope unreliable")

    last = [s for s in all_samples[-1] if not s.truncated]
    ks, crit = _ks_exponential(np.array([s.outer_steps for s in last], dtype=float))
    return CampaignResult(spec, summaries, all_samples, slope, se, reliable, ks, crit,
                          summaries[-1].ratio, icpt, notes)


# -- probability windows ---------------------------------------------------------------

@dataclass
class WindowReport:
    eps: float
    gamma: int
    betas: list
    fractions: list
    ordering_violations: int

    @property
    def increasing(self) -> bool:
        return all(f2 > f1 for f1, f2 in zip(self.fractions, self.fractions[1:]))

    @property
    def endpoint_increase(self) -> bool:
        return self.fractions[-1] > self.fractions[0]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["increasing"] = self.increasing
        d["endpoint_increase"] = self.endpoint_increase
        return d


def probability_window_check(spec_or_result, eps: float, workers: int = 1) -> WindowReport:
    """Fraction of trajectories whose two hitting times both lie in ``[e^{b(G-eps)}, e^{b(G+eps)}]``.

    Accepts a :class:`CampaignSpec` (which is then run) or a finished
    :class:`CampaignResult`.  Also counts violations of the pathwise
    ordering ``tau(inner) >= tau(outer)``, which must be zero.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    res = spec_or_result if isinstance(spec_or_result, CampaignResult) else run_campaign(spec_or_result, workers)
    G = res.gamma
    fracs, bad = [], 0
    for beta, batch in zip(res.spec.betas, res.samples):
        lo, hi = math.exp(beta * (G - eps)), math.exp(beta * (G + eps))
        inside = 0
        for s in batch:
            if s.truncated:
                continue
            bad += s.inner_steps < s.outer_steps
            inside += lo <= s.outer_steps and s.inner_steps <= hi
        fracs.append(inside / len(batch))
    return WindowReport(eps, G, list(res.spec.betas), fracs, bad)


# -- reports ----------------------------------------------------------------------------

RAW_HEADER = ("beta_index", "beta", "sample_id", "outer_steps", "outer_hit",
              "inner_steps", "inner_hit", "truncated")


def raw_csv(result: CampaignResult) -> str:
    """Raw per-sample table; a pure function of the campaign spec."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_HEADER)
    tgt = result.spec.target
    for k, (beta, batch) in enumerate(zip(result.spec.betas, result.samples)):
        for i, s in enumerate(batch):
            w.writerow((k, repr(beta), i, s.outer_steps,
                        tgt[s.outer_hit] if s.outer_hit >= 0 else "",
                        s.inner_steps,
                        result.spec.inner_target if s.inner_hit >= 0 else "",
                        int(s.truncated)))
    return buf.getvalue()


def metadata(result: CampaignResult) -> dict:
    import scipy

    return {
        "spec": result.spec.to_dict(),
        "rng": RNG_ID,
        "versions": {"hardhex": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "schema_version": SCHEMA_VERSION,
    }


def validate_summary(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not follow :data:`SCHEMA`."""
    import jsonschema

    jsonschema.validate(doc, SCHEMA)


def _fmt(x, spec=".4g"):
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, spec)


def markdown_table(result: CampaignResult) -> str:
    s = result.summary()
    lines = [
        f"Grid {2 * result.spec.grid.K}x{3 * result.spec.grid.L} (K={result.spec.grid.K}, "
        f"L={result.spec.grid.L}), Gamma = {s['gamma']}, seed = {s['seed']}",
        "",
        "| quantity | value |",
        "|---|---|",
        f"| Gamma | {s['gamma']} |",
        f"| slope ± SE | {_fmt(s['slope'])} ± {_fmt(s['slope_se'])} |",
        f"| slope reliable | {s['slope_reliable']} |",
        f"| KS (max beta) | {_fmt(s['ks_stat'])} (critical {_fmt(s['ks_critical'])}) |",
        f"| ratio E tau_{s['inner_target']} / E tau_{s['target']} | {_fmt(s['ratio'])} |",
        "",
        f"Fit: {s['fit']}.",
        "",
        "| beta | count | truncated | mean | variance | inner mean | ratio |",
        "|---|---|---|---|---|---|---|",
    ]
    for b, r in zip(s["per_beta"], s["ratios"]):
        lines.append(f"| {b['beta']:g} | {b['count']} | {b['truncations']} | {_fmt(b['mean'])} | "
                     f"{_fmt(b['variance'])} | {_fmt(b['inner_mean'])} | {_fmt(r)} |")
    return "\n".join(lines) + "\n"


def summary_csv(result: CampaignResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("beta", "count", "truncations", "mean", "variance", "inner_mean",
                "inner_variance", "ratio"))
    for b in result.summaries:
        w.writerow((repr(b.beta), b.count, b.truncations, b.mean, b.variance,
                    b.inner_mean, b.inner_variance, b.ratio))
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def emit_report(result: CampaignResult, fmt: str = "json", outdir: str = ".") -> list:
    """Write ``samples.csv``, ``metadata.json`` and a summary in ``fmt``; return the paths.

    ``fmt`` is one of ``"json"``, ``"csv"``, ``"markdown"`` (alias
    ``"markdown-table"``).  The JSON summary is validated against
    :data:`SCHEMA` before writing.
    """
    fmt = {"markdown-table": "markdown", "md": "markdown"}.get(fmt, fmt)
    if fmt not in ("json", "csv", "markdown"):
        raise ValueError(f"unknown report format {fmt!r}")
    os.makedirs(outdir, exist_ok=True)
    paths = []
    p = os.path.join(outdir, "samples.csv")
    _write(p, raw_csv(result))
    paths.append(p)
    p = os.path.join(outdir, "metadata.json")
    _write(p, json.dumps(metadata(result), indent=2, sort_keys=True) + "\n")
    paths.append(p)
    if fmt == "json":
        doc = result.summary()
        doc["metadata"] = metadata(result)
        validate_summary(doc)
        p = os.path.join(outdir, "summary.json")
        _write(p, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        p = os.path.join(outdir, "summary.csv")
        _write(p, summary_csv(result))
    else:
        p = os.path.join(outdir, "summary.md")
        _write(p, markdown_table(result))
    paths.append(p)
    return paths


