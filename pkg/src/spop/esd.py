"""Empirical spectral density and heavy-tail diagnostics.

The ESD of a weight matrix W is the eigenvalue set of the correlation
matrix W^T W (computed on the smaller Gram side).  Heavy-tailedness is
quantified by a continuous maximum-likelihood power-law fit to the ESD
tail; the threshold is chosen to minimize the Kolmogorov-Smirnov distance
between the tail and the fitted law.  Smaller exponents mean heavier
tails.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from .matcore import as_matrix, eig_sym

MIN_SPECTRUM = 50
MIN_TAIL = 10
# above this many eigenvalues the threshold scan is two-stage
# (quantile-spaced coarse pass plus exact local refinement)
FULL_SCAN_LIMIT = 5000


@dataclass(frozen=True)
class PowerLawFit:
    """Tail fit p(x) ~ x^(-alpha) for x >= xmin."""

    alpha: float
    xmin: float
    ks_stat: float
    n_tail: int


@dataclass(frozen=True)
class SpectralReport:
    """Per-layer spectral summary; ``alpha`` is None when the fit failed."""

    layer_name: str
    alpha: PowerLawFit | None
    spectral_norm: float
    frobenius_norm: float
    nuclear_norm: float
    esd: np.ndarray
    fit_error: str | None = None


def compute_esd(w) -> np.ndarray:
    """Eigenvalues of W^T W (smaller Gram side), sorted descending.

    Tiny negative eigenvalues from rounding are clamped to zero; length is
    min(rows, cols).
    """
    a = as_matrix(w, "esd input")
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    gram = (gram + gram.T) / 2.0
    return np.maximum(eig_sym(gram), 0.0)


def alpha_from_decay(s: float) -> float:
    """Tail exponent implied by a singular-value decay sigma_k ~ k^(-s).

    The eigenvalues then follow k^(-2s), whose density has exponent
    1 + 1/(2s); monotone decreasing in s.
    """
    if not s > 0.0:
        raise ValueError(f"decay exponent must be positive, got {s}")
    return 1.0 + 1.0 / (2.0 * s)


def _hill_ks(x, logs, suffix, i):
    """Hill exponent and KS distance for the tail starting at index i."""
    n = x.size
    k = n - i
    lnsum = suffix[i] - k * logs[i]
    if lnsum <= 0.0:
        return None  # all-equal tail: exponent degenerates
    alpha = 1.0 + k / lnsum
    tail_ratio = x[i:] / x[i]
    fit_cdf = 1.0 - tail_ratio ** (1.0 - alpha)
    steps = np.arange(k + 1, dtype=np.float64) / k
    d = max(
        float(np.max(np.abs(fit_cdf - steps[1:]))),
        float(np.max(np.abs(fit_cdf - steps[:-1]))),
    )
    return alpha, d


def fit_power_law(eigs) -> PowerLawFit:
    """Continuous MLE power-law fit with a KS-minimizing threshold.

    Scans every distinct observed value that leaves at least MIN_TAIL tail
    points (two-stage above FULL_SCAN_LIMIT), breaking ties toward the
    smallest threshold.  Needs at least MIN_SPECTRUM positive eigenvalues.
    """
    x = np.asarray(eigs, dtype=np.float64).ravel()
    x = x[np.isfinite(x) & (x > 0.0)]
    if x.size < MIN_SPECTRUM:
        raise ValueError(
            f"need at least {MIN_SPECTRUM} positive eigenvalues, got {x.size}"
        )
    x = np.sort(x)
    n = x.size
    if x[0] == x[-1]:
        raise ValueError("degenerate spectrum")
    logs = np.log(x)
    suffix = np.cumsum(logs[::-1])[::-1]
    upper = n - MIN_TAIL  # last start index leaving MIN_TAIL points
    distinct = np.empty(upper + 1, dtype=bool)
    distinct[0] = True
    distinct[1:] = x[1 : upper + 1] > x[:upper]
    cand = np.nonzero(distinct)[0]

    best = None  # (ks, xmin, alpha, n_tail)

    def consider(indices):
        nonlocal best
        for i in indices:
            res = _hill_ks(x, logs, suffix, int(i))
            if res is None:
                continue
            alpha, d = res
            if best is None or d < best[0]:
                best = (d, float(x[i]), float(alpha), int(n - i))

    if cand.size > FULL_SCAN_LIMIT:
        stride = math.ceil(cand.size / 2048)
        coarse_pos = np.arange(0, cand.size, stride)
        consider(cand[coarse_pos])
        if best is not None:
            ci = int(np.searchsorted(x, best[1]))
            pos = int(np.searchsorted(cand, ci))
            lo = max(0, pos - stride)
            hi = min(cand.size, pos + stride + 1)
            best = None
            consider(cand[lo:hi])
    else:
        consider(cand)

    if best is None:
        raise ValueError("degenerate spectrum")
    ks, xmin, alpha, n_tail = best
    return PowerLawFit(alpha=alpha, xmin=xmin, ks_stat=ks, n_tail=n_tail)


def spectral_report(layers):
    """Reports for (name, matrix) pairs plus the cross-layer mean exponent.

    Per-layer fit failures are recorded in the report instead of raised, so
    one tiny layer cannot sink a whole model summary.  Returns
    (reports, mean_alpha); mean_alpha is None when no layer fit succeeded.
    """
    reports = []
    alphas = []
    for name, mat in layers:
        esd = compute_esd(mat)
        fit = None
        err = None
        try:
            fit = fit_power_law(esd)
            alphas.append(fit.alpha)
        except ValueError as exc:
            err = str(exc)
        reports.append(
            SpectralReport(
                layer_name=str(name),
                alpha=fit,
                spectral_norm=float(np.sqrt(esd[0])),
                frobenius_norm=float(np.sqrt(esd.sum())),
                nuclear_norm=float(np.sum(np.sqrt(esd))),
                esd=esd,
                fit_error=err,
            )
        )
    mean_alpha = float(np.mean(alphas)) if alphas else None
    return reports, mean_alpha


def report_to_dict(report: SpectralReport, esd_top: int | None = None) -> dict:
    """JSON-ready dict; ``esd_top`` truncates the ESD to its largest values."""
    esd = report.esd
    if esd_top is not None:
        esd = esd[:esd_top]
    fit = report.alpha
    return {
        "layer_name": report.layer_name,
        "alpha": None
        if fit is None
        else {
            "alpha": fit.alpha,
            "xmin": fit.xmin,
            "ks_stat": fit.ks_stat,
            "n_tail": fit.n_tail,
        },
        "spectral_norm": report.spectral_norm,
        "frobenius_norm": report.frobenius_norm,
        "nuclear_norm": report.nuclear_norm,
        "esd": [float(v) for v in esd],
        "fit_error": report.fit_error,
    }


def reports_to_jsonl(reports, esd_top: int | None = None) -> str:
    """One SpectralReport per line."""
    lines = [json.dumps(report_to_dict(r, esd_top), sort_keys=True) for r in reports]
    return "\n".join(lines) + "\n" if lines else ""
