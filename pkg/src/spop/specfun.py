"""Spectral transforms.

newton_schulz5      quintic Newton-Schulz approximate orthogonalizer
ns_root             coupled Newton-Schulz fractional root of an SPD matrix
power_transform     exact SVD-based fractional power of the spectrum
schatten_steepest   closed-form steepest descent under a Schatten-q ball
verify_steepest     brute-force sampling check of the closed form
"""

from dataclasses import dataclass
import math

import numpy as np

from .matcore import as_matrix, eig_sym, schatten_norm, singular_values, svd


@dataclass(frozen=True)
class NsConfig:
    """Newton-Schulz iteration controls.

    ns_steps is the inner iteration count; eps regularizes the Frobenius
    pre-normalization (and the per-round shift in ns_root).  The quintic
    coefficients are the standard choice that maximizes the slope at zero.
    """

    ns_steps: int = 5
    eps: float = 1e-7
    coeff_a: float = 3.4445
    coeff_b: float = -4.7750
    coeff_c: float = 2.0315

    def __post_init__(self):
        if self.ns_steps < 1:
            raise ValueError("ns_steps must be >= 1")
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")


DEFAULT_NS = NsConfig()
# the fractional root needs more inner steps to resolve small eigenvalues
DEFAULT_ROOT_NS = NsConfig(ns_steps=15)


def newton_schulz5(m, cfg: NsConfig = DEFAULT_NS) -> np.ndarray:
    """Approximate orthogonal polar factor via the quintic iteration.

    Iterates on the wide orientation and normalizes by the Frobenius norm
    first, like the reference implementation.  The output spectrum hugs 1
    but keeps noticeable deviations; this is intentional, not a bug.
    """
    a = as_matrix(m, "newton_schulz5 input")
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        raise ValueError("zero momentum")
    transposed = a.shape[0] > a.shape[1]
    x = (a.T if transposed else a) / (norm + cfg.eps)
    for _ in range(cfg.ns_steps):
        g = x @ x.T
        x = cfg.coeff_a * x + (cfg.coeff_b * g + cfg.coeff_c * (g @ g)) @ x
    return x.T.copy() if transposed else x


def ns_root_rounds(p: float) -> int:
    """Number of successive square-root rounds for a target power p/2.

    ceil(log2(2/p)): exact when 2/p is a power of two (the p = 0.125
    default gives 4), conservative (a smaller power) otherwise.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"power p must lie in (0, 1], got {p}")
    return max(1, math.ceil(math.log2(2.0 / p) - 1e-12))


def ns_root(x, p: float, cfg: NsConfig = DEFAULT_ROOT_NS) -> np.ndarray:
    """Approximate x**(p/2) for symmetric PSD x.

    Runs ns_root_rounds(p) rounds; each round replaces x by its square root
    using the coupled Y/Z Newton-Schulz iteration, with Frobenius
    pre-normalization, sqrt-rescale, symmetrization and an eps shift.
    """
    rounds = ns_root_rounds(p)
    a = as_matrix(x, "ns_root input")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"ns_root needs a square matrix, got {a.shape}")
    eigs = eig_sym(a)  # also validates symmetry
    lam_peak = float(np.abs(eigs).max())
    if lam_peak > 0.0 and eigs[-1] < -1e-10 * lam_peak:
        raise ValueError("ns_root input is not positive semi-definite")
    n = a.shape[0]
    ident = np.eye(n)
    out = a.copy()
    for _ in range(rounds):
        alpha = float(np.linalg.norm(out))
        out = out / (alpha + cfg.eps)
        y = out
        z = ident.copy()
        for _ in range(cfg.ns_steps):
            q = 3.0 * ident - z @ y
            y = 0.5 * (y @ q)
            z = 0.5 * (q @ z)
        out = math.sqrt(alpha) * y
        out = (out + out.T) / 2.0 + cfg.eps * ident
    return out


def power_transform(m, p: float) -> np.ndarray:
    """Raise the singular values of m to the power p (exact SVD path).

    Convention 0**p = 0 for every p including p = 0, so rank-deficient
    inputs map to the projector onto their row/column space.  p = 0 yields
    the polar factor, p = 1 reproduces the input.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"power p must lie in [0, 1], got {p}")
    r = svd(as_matrix(m, "power_transform input"))
    powed = np.where(r.sigma > 0.0, r.sigma**p, 0.0)
    return (r.u * powed) @ r.v.T


@dataclass(frozen=True)
class SteepestSolution:
    """Maximizer of trace(G~^T dW) over the Schatten-q ball of radius delta."""

    delta_w: np.ndarray
    q: float
    delta: float
    objective: float


def conjugate_exponent(q: float) -> float:
    """p' with 1/p' + 1/q = 1; q = inf maps to 1."""
    q = float(q)
    if np.isinf(q):
        return 1.0
    return q / (q - 1.0)


def schatten_steepest(g_tilde, q, delta: float) -> SteepestSolution:
    """Closed-form steepest-descent step under a Schatten-q constraint.

    With G~ = U diag(sigma) V^T and p' conjugate to q, the optimal step has
    singular values delta * (sigma_i / ||G~||_p')**(p'-1) on the singular
    basis of G~; its objective equals delta * ||G~||_p'.  q = inf returns
    the polar factor scaled to delta.
    """
    q = float(q)
    if not q > 1.0:
        raise ValueError(f"q must exceed 1, got {q}")
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    a = as_matrix(g_tilde, "gradient")
    r = svd(a)
    if r.sigma[0] == 0.0:
        raise ValueError("zero gradient")
    pc = conjugate_exponent(q)
    norm_pc = schatten_norm(a, pc)
    lam = delta * np.where(r.sigma > 0.0, (r.sigma / norm_pc) ** (pc - 1.0), 0.0)
    delta_w = (r.u * lam) @ r.v.T
    objective = float(np.sum(a * delta_w))
    return SteepestSolution(delta_w=delta_w, q=q, delta=float(delta), objective=objective)


@dataclass(frozen=True)
class SteepestCheck:
    """Outcome of the sampling check: PASS iff no sample beats the closed form."""

    closed_form: float
    sampled_max: float
    passed: bool
    q: float
    delta: float
    n_samples: int
    seed: int


def verify_steepest(g_tilde, q, delta: float, n_samples: int, seed: int) -> SteepestCheck:
    """Brute-force check of schatten_steepest.

    Draws n_samples standard normal matrices, rescales each to Schatten-q
    norm exactly delta, and compares the best sampled objective against the
    closed form (1e-9 slack).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    sol = schatten_steepest(g_tilde, q, delta)
    a = as_matrix(g_tilde, "gradient")
    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(int(n_samples)):
        x = rng.standard_normal(a.shape)
        nrm = schatten_norm(x, q)
        if nrm == 0.0:
            continue
        best = max(best, float(np.sum(a * x)) * (delta / nrm))
    passed = sol.objective >= best - 1e-9
    return SteepestCheck(
        closed_form=sol.objective,
        sampled_max=best,
        passed=bool(passed),
        q=float(q),
        delta=float(delta),
        n_samples=int(n_samples),
        seed=int(seed),
    )
