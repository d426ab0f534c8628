"""
Evaluation Service.

Distance-error statistics: sample moments, maximum-likelihood fits of the
Rayleigh, gamma and lognormal families, Kolmogorov-Smirnov goodness of fit
(asymptotic p-value, or a parametric bootstrap on request), histograms and
the plain-text/CSV report.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy import special, stats

from src.models.common import RTIError
from src.models.evaluation import Distribution, ErrorStats, FitResult, HistogramBin, ReferenceResult
from src.services.reconstruction import OperationCounter

logger = logging.getLogger(__name__)

DEFAULT_SIGNIFICANCE = 0.05
GAMMA_TOLERANCE = 1e-10
GAMMA_MAX_ITERATIONS = 100


class EvaluationError(RTIError, ValueError):
    """Error data cannot support the requested statistic."""


class FitConvergenceError(RTIError, ArithmeticError):
    """An iterative maximum-likelihood fit did not converge."""


# Distance-error statistics of the original measurement campaign
REFERENCE_STATS: dict[str, ErrorStats] = {
    "I": ErrorStats(mean=0.3085, variance=0.0388, skewness=2.6967, count=1),
    "II": ErrorStats(mean=0.2368, variance=0.0291, skewness=2.1630, count=1),
    "III": ErrorStats(mean=0.3096, variance=0.0980, skewness=2.5707, count=1),
    "IV": ErrorStats(mean=0.4146, variance=0.0874, skewness=3.1743, count=1),
}

REFERENCE_FITS: dict[str, FitResult] = {
    "I": FitResult(family=Distribution.RAYLEIGH, params={}, p_value=0.3845, h_value=0),
    "II": FitResult(family=Distribution.GAMMA, params={}, p_value=0.4697, h_value=0),
    "III": FitResult(family=Distribution.LOGNORMAL, params={}, p_value=0.3237, h_value=0),
}

# Mean errors reported for other imaging methods on the same data sets
REFERENCE_COMPARISONS: list[ReferenceResult] = [
    ReferenceResult(experiment="I", method="Network-shadowing RTI", mean_error=0.2909),
    ReferenceResult(experiment="II", method="Fade-level RTI", mean_error=0.17),
    ReferenceResult(experiment="II", method="Channel-diversity RTI", mean_error=0.25),
    ReferenceResult(experiment="III", method="Fade-level RTI", mean_error=0.23),
    ReferenceResult(experiment="III", method="Channel-diversity RTI", mean_error=0.24),
    ReferenceResult(experiment="IV", method="Fade-level RTI", mean_error=0.30),
    ReferenceResult(experiment="IV", method="Channel-diversity RTI", mean_error=0.72),
]


def _as_errors(errors: Sequence[float] | np.ndarray) -> np.ndarray:
    x = np.asarray(errors, dtype=float)
    if x.size == 0:
        raise EvaluationError("no distance errors")
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise EvaluationError("distance errors must be finite and non-negative")
    return x


# =============================================================================
# Moments
# =============================================================================


def error_stats(errors: Sequence[float] | np.ndarray, require_skewness: bool = True) -> ErrorStats:
    """
    Sample mean, unbiased variance and biased skewness g1 = m3 / m2^(3/2).

    With zero spread the skewness is undefined: an error, or None when
    `require_skewness` is off.
    """
    x = _as_errors(errors)
    # equal values can leave a rounding residue in var()
    constant = bool(np.all(x == x[0]))
    variance = 0.0 if constant else float(x.var(ddof=1))
    if constant:
        if require_skewness:
            raise EvaluationError("skewness is undefined for errors with zero variance")
        skewness = None
    else:
        skewness = float(stats.skew(x, bias=True))
    return ErrorStats(mean=float(x.mean()), variance=variance, skewness=skewness, count=int(x.size))


# =============================================================================
# Fitting
# =============================================================================


def _gamma_shape(x: np.ndarray) -> float:
    """Newton solution of ln k - digamma(k) = ln(mean) - mean(ln x)."""
    s = math.log(x.mean()) - float(np.log(x).mean())
    if s <= 0:
        raise FitConvergenceError("gamma fit needs data with spread")
    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for iteration in range(GAMMA_MAX_ITERATIONS):
        f = math.log(k) - special.digamma(k) - s
        slope = 1.0 / k - special.polygamma(1, k)
        step = f / slope
        k_next = k - step if k - step > 0 else k / 2.0
        if abs(k_next - k) <= GAMMA_TOLERANCE * max(1.0, k):
            if iteration > 20:
                logger.warning(f"Gamma shape converged slowly ({iteration + 1} iterations)")
            return float(k_next)
        k = k_next
    raise FitConvergenceError(
        f"gamma shape did not converge in {GAMMA_MAX_ITERATIONS} iterations", detail=f"last k={k}"
    )


def fit_distribution(errors: Sequence[float] | np.ndarray, family: Distribution) -> FitResult:
    """Maximum-likelihood parameters of one family."""
    x = _as_errors(errors)
    family = Distribution(family)
    if family == Distribution.RAYLEIGH:
        params = {"sigma": math.sqrt(float(np.sum(x * x)) / (2.0 * x.size))}
    else:
        if np.any(x <= 0):
            raise EvaluationError(f"{family.value} fit needs strictly positive errors")
        if family == Distribution.LOGNORMAL:
            logs = np.log(x)
            params = {"mu": float(logs.mean()), "sigma": float(logs.std())}
        else:
            shape = _gamma_shape(x)
            params = {"shape": shape, "scale": float(x.mean()) / shape}
    return FitResult(family=family, params=params)


def frozen_distribution(fit: FitResult):
    """scipy.stats frozen distribution of a fit."""
    p = fit.params
    if fit.family == Distribution.RAYLEIGH:
        return stats.rayleigh(scale=p["sigma"])
    if fit.family == Distribution.GAMMA:
        return stats.gamma(a=p["shape"], scale=p["scale"])
    return stats.lognorm(s=p["sigma"], scale=math.exp(p["mu"]))


def ks_statistic(errors: Sequence[float] | np.ndarray, fit: FitResult) -> float:
    """sup |F_n - F| from the one-sided distances at the sorted sample points."""
    x = np.sort(_as_errors(errors))
    n = x.size
    cdf = frozen_distribution(fit).cdf(x)
    d_plus = np.max(np.arange(1, n + 1) / n - cdf)
    d_minus = np.max(cdf - np.arange(n) / n)
    return float(max(d_plus, d_minus))


def ks_test(
    errors: Sequence[float] | np.ndarray,
    fit: FitResult,
    significance: float = DEFAULT_SIGNIFICANCE,
) -> FitResult:
    """KS statistic with the asymptotic Kolmogorov p-value; h = 1 iff p < significance."""
    d = ks_statistic(errors, fit)
    n = np.asarray(errors).size
    p_value = float(np.clip(stats.kstwobign.sf(math.sqrt(n) * d), 0.0, 1.0))
    return fit.model_copy(
        update={
            "statistic": d,
            "p_value": p_value,
            "h_value": int(p_value < significance),
            "significance": significance,
        }
    )


def lilliefors_pvalue(
    errors: Sequence[float] | np.ndarray,
    family: Distribution,
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    Parametric-bootstrap p-value of the KS statistic with fitted parameters.

    Each replicate draws from the fitted law, refits and recomputes the statistic.
    """
    x = _as_errors(errors)
    rng = rng if rng is not None else np.random.default_rng(0)
    fit = fit_distribution(x, family)
    observed = ks_statistic(x, fit)
    law = frozen_distribution(fit)
    exceed = 0
    for _ in range(samples):
        replicate = law.rvs(size=x.size, random_state=rng)
        if ks_statistic(replicate, fit_distribution(replicate, family)) >= observed:
            exceed += 1
    return (exceed + 1) / (samples + 1)


def fit_and_test(
    errors: Sequence[float] | np.ndarray,
    significance: float = DEFAULT_SIGNIFICANCE,
    bootstrap: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> list[FitResult]:
    """Fit and KS-test every family; `bootstrap` > 0 replaces p with the bootstrap estimate."""
    results = []
    for family in Distribution:
        try:
            fit = ks_test(errors, fit_distribution(errors, family), significance)
        except EvaluationError as e:
            logger.warning(f"Skipping {family.value} fit: {e.message}")
            continue
        if bootstrap:
            p = lilliefors_pvalue(errors, family, bootstrap, rng)
            fit = fit.model_copy(update={"p_value": p, "h_value": int(p < significance), "bootstrap": True})
        results.append(fit)
    return results


def histogram(errors: Sequence[float] | np.ndarray, fit: Optional[FitResult] = None) -> list[HistogramBin]:
    """Freedman-Diaconis histogram with the fitted density at each bin center."""
    x = _as_errors(errors)
    counts, edges = np.histogram(x, bins="fd")
    density = None
    if fit is not None:
        density = frozen_distribution(fit).pdf((edges[:-1] + edges[1:]) / 2.0)
    return [
        HistogramBin(
            left=float(edges[i]),
            right=float(edges[i + 1]),
            count=int(counts[i]),
            fitted_density=None if density is None else float(density[i]),
        )
        for i in range(counts.size)
    ]


# =============================================================================
# Report
# =============================================================================


class EvaluationSummary(BaseModel):
    """Statistics, fits and histogram of one run's distance errors."""

    stats: Optional[ErrorStats] = None
    fits: list[FitResult] = []
    bins: list[HistogramBin] = []


def summarize(
    errors: Sequence[float] | np.ndarray,
    significance: float = DEFAULT_SIGNIFICANCE,
    bootstrap: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> EvaluationSummary:
    """Everything the report needs; empty or degenerate error sets yield a partial summary."""
    x = np.asarray(errors, dtype=float)
    if x.size == 0:
        return EvaluationSummary()
    summary_stats = error_stats(x, require_skewness=False)
    if x.size < 2 or summary_stats.skewness is None:
        return EvaluationSummary(stats=summary_stats)
    fits = fit_and_test(x, significance, bootstrap, rng)
    best = max(fits, key=lambda f: f.p_value or 0.0) if fits else None
    return EvaluationSummary(stats=summary_stats, fits=fits, bins=histogram(x, best))


def _params_text(params: dict[str, float]) -> str:
    return ", ".join(f"{k}={v:.4f}" for k, v in params.items())


def emit_report(
    summary: EvaluationSummary,
    comparisons: Sequence[ReferenceResult] = (),
    counter: Optional[OperationCounter] = None,
    parameters: Optional[dict[str, object]] = None,
    title: str = "Distance error report",
) -> str:
    """Deterministic plain-text report."""
    lines = [title, "=" * len(title), ""]
    if parameters:
        lines.append("Parameters")
        width = max(len(k) for k in parameters)
        lines.extend(f"  {k:<{width}} = {v}" for k, v in parameters.items())
        lines.append("")

    lines.append("Distance error statistics")
    if summary.stats is None:
        lines.append("  no localized frames")
    else:
        s = summary.stats
        lines.append(f"  frames            {s.count}")
        lines.append(f"  mean (m)          {s.mean:.4f}")
        lines.append(f"  variance (m^2)    {s.variance:.4f}")
        lines.append(f"  skewness          {'n/a' if s.skewness is None else f'{s.skewness:.4f}'}")
    lines.append("")

    if summary.fits:
        alpha = summary.fits[0].significance
        method = "parametric bootstrap" if summary.fits[0].bootstrap else "asymptotic"
        lines.append(f"Kolmogorov-Smirnov goodness of fit (alpha={alpha}, {method} p-value)")
        lines.append(f"  {'distribution':<12} {'h-value':>7} {'p-value':>8} {'D':>8}  parameters")
        for fit in summary.fits:
            lines.append(
                f"  {fit.family.value:<12} {fit.h_value:>7d} {fit.p_value:>8.4f} "
                f"{fit.statistic:>8.4f}  {_params_text(fit.params)}"
            )
        lines.append("")

    if counter is not None:
        lines.append("Reconstruction operations")
        lines.append(f"  frames            {counter.frames}")
        lines.append(f"  additions         {counter.additions}")
        lines.append(f"  multiplications   {counter.multiplications}")
        lines.append(f"  comparisons       {counter.comparisons}")
        lines.append("")

    if comparisons:
        lines.append("Reference mean errors")
        lines.append(f"  {'experiment':<10} {'method':<24} {'mean (m)':>8}")
        for ref in comparisons:
            lines.append(f"  {ref.experiment:<10} {ref.method:<24} {ref.mean_error:>8.4f}")
        lines.append("")
    return "\n".join(lines)


def write_report_tables(
    summary: EvaluationSummary,
    out_dir: Path | str,
    comparisons: Sequence[ReferenceResult] = (),
) -> None:
    """error_stats.csv, fits.csv, histogram.csv and, when given, comparison.csv."""
    out = Path(out_dir)
    with open(out / "error_stats.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["count", "mean_m", "variance_m2", "skewness"])
        if summary.stats is not None:
            s = summary.stats
            skewness = "" if s.skewness is None else repr(s.skewness)
            writer.writerow([s.count, repr(s.mean), repr(s.variance), skewness])
    with open(out / "fits.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["family", "parameters", "statistic", "p_value", "h_value", "bootstrap"])
        for fit in summary.fits:
            params = ";".join(f"{k}={v!r}" for k, v in fit.params.items())
            writer.writerow(
                [
                    fit.family.value,
                    params,
                    repr(fit.statistic),
                    repr(fit.p_value),
                    fit.h_value,
                    int(fit.bootstrap),
                ]
            )
    with open(out / "histogram.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "count", "fitted_density"])
        for b in summary.bins:
            density = "" if b.fitted_density is None else repr(b.fitted_density)
            writer.writerow([repr(b.left), repr(b.right), b.count, density])
    if comparisons:
        with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["experiment", "method", "mean_error_m"])
            for ref in comparisons:
                writer.writerow([ref.experiment, ref.method, repr(ref.mean_error)])
