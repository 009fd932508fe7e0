"""Desk-scale training problems and the experiment harness.

Three smooth problems with hand-derived analytic gradients (validated by
central differences), a deterministic minibatch training loop that drives
the optimizer steppers and records per-step diagnostics, and the leading
-term flop model for the spectral update paths.
"""

from dataclasses import dataclass, field, replace
import json
import math
from typing import Callable

import numpy as np

from .esd import spectral_report
from .matcore import singular_values
from .optim import (
    HEAVY_KINDS,
    OptimizerConfig,
    heavy_step_count,
    init_state,
    scheduled_step,
    step,
)
from .specfun import ns_root_rounds

DEFAULT_LR_GRID = (0.3, 0.1, 0.03, 0.01, 0.003)


@dataclass
class Problem:
    """A differentiable objective over a list of matrix parameters.

    ``loss`` and ``grad`` take (params, batch_indices); gradients average
    over the batch, so batch = all indices gives the deterministic full
    objective.
    """

    name: str
    shapes: list
    params0: list
    n_data: int
    loss: Callable
    grad: Callable
    lipschitz: float | None = None


def make_matrix_regression(
    rows=64, cols=64, out_rows=32, out_cols=32, n_samples=256, noise=1e-3, seed=0
) -> Problem:
    """Quadratic: 0.5 * mean_i ||A W B - C_i||_F^2 with noisy targets C_i.

    The Hessian is the fixed operator A^T A (.) B B^T, so the smoothness
    constant is lmax(A^T A) * lmax(B B^T), computed exactly.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((out_rows, rows)) / math.sqrt(rows)
    b = rng.standard_normal((cols, out_cols)) / math.sqrt(cols)
    w_star = rng.standard_normal((rows, cols))
    signal = a @ w_star @ b
    sig_rms = float(np.sqrt(np.mean(signal**2)))
    c = signal[None, :, :] + noise * sig_rms * rng.standard_normal(
        (n_samples, out_rows, out_cols)
    )
    w0 = rng.standard_normal((rows, cols)) * 0.5
    # mean ||P - C_i||^2 = ||P - mean(C)||^2 + mean||C_i||^2 - ||mean(C)||^2,
    # so per-sample square norms are enough after precomputing them once
    c_sq = np.einsum("ijk,ijk->i", c, c)
    c_mean_full = c.mean(axis=0)
    c_sq_mean_full = float(c_sq.mean())

    def _batch_stats(idx):
        if len(idx) == n_samples:
            return c_mean_full, c_sq_mean_full
        return c[idx].mean(axis=0), float(c_sq[idx].mean())

    def loss(params, idx):
        pred = a @ params[0] @ b
        cm, msq = _batch_stats(idx)
        resid = pred - cm
        return 0.5 * (float(np.sum(resid * resid)) + msq - float(np.sum(cm * cm)))

    def grad(params, idx):
        pred = a @ params[0] @ b
        cm, _ = _batch_stats(idx)
        return [a.T @ (pred - cm) @ b.T]

    from .matcore import eig_sym

    lips = float(eig_sym(a.T @ a)[0] * eig_sym(b @ b.T)[0])
    return Problem(
        name="matrix_regression",
        shapes=[(rows, cols)],
        params0=[w0],
        n_data=n_samples,
        loss=loss,
        grad=grad,
        lipschitz=lips,
    )


def make_logistic_regression(
    dim=100, classes=10, n_samples=5000, separation=3.0, seed=0
) -> Problem:
    """Multinomial cross-entropy on synthetic Gaussian clusters.

    One d x K weight matrix, no bias; cluster means sit on a sphere of
    radius ``separation``.
    """
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((classes, dim))
    means *= separation / np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.integers(0, classes, size=n_samples)
    x = means[labels] + rng.standard_normal((n_samples, dim))
    onehot = np.eye(classes)[labels]
    w0 = np.zeros((dim, classes))

    def _softmax(logits):
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True), z

    def loss(params, idx):
        logits = x[idx] @ params[0]
        z = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.sum(np.exp(z), axis=1))
        picked = np.take_along_axis(z, labels[idx][:, None], axis=1)[:, 0]
        return float(np.mean(lse - picked))

    def grad(params, idx):
        probs, _ = _softmax(x[idx] @ params[0])
        return [x[idx].T @ (probs - onehot[idx]) / len(idx)]

    return Problem(
        name="logistic_regression",
        shapes=[(dim, classes)],
        params0=[w0],
        n_data=n_samples,
        loss=loss,
        grad=grad,
    )


def make_mlp2(in_dim=64, hidden=64, n_samples=2000, seed=0, init="random") -> Problem:
    """Two-layer tanh network with squared loss on a frozen teacher.

    Gradients are hand-derived backprop.  init="teacher" starts the student
    at the teacher weights (zero initial loss).
    """
    if init not in ("random", "teacher"):
        raise ValueError(f"init must be 'random' or 'teacher', got {init!r}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_samples, in_dim))
    w1_t = rng.standard_normal((hidden, in_dim)) / math.sqrt(in_dim)
    w2_t = rng.standard_normal((1, hidden)) / math.sqrt(hidden)
    y = np.tanh(x @ w1_t.T) @ w2_t.T
    if init == "teacher":
        params0 = [w1_t.copy(), w2_t.copy()]
    else:
        params0 = [
            rng.standard_normal((hidden, in_dim)) / math.sqrt(in_dim),
            rng.standard_normal((1, hidden)) / math.sqrt(hidden),
        ]

    def loss(params, idx):
        h = np.tanh(x[idx] @ params[0].T)
        r = h @ params[1].T - y[idx]
        return 0.5 * float(np.mean(r * r))

    def grad(params, idx):
        xb = x[idx]
        h = np.tanh(xb @ params[0].T)
        r = (h @ params[1].T - y[idx]) / len(idx)
        dw2 = r.T @ h
        dz = (r @ params[1]) * (1.0 - h * h)
        dw1 = dz.T @ xb
        return [dw1, dw2]

    return Problem(
        name="mlp2",
        shapes=[(hidden, in_dim), (1, hidden)],
        params0=params0,
        n_data=n_samples,
        loss=loss,
        grad=grad,
    )


def finite_diff_check(problem: Problem, params, batch, h: float, n_coords=100, seed=0):
    """Max relative error of analytic vs central-difference gradients.

    Samples at least ``n_coords`` coordinates across all parameters;
    relative error uses |analytic - numeric| / (|numeric| + 1e-12).
    """
    if not h > 0.0:
        raise ValueError("h must be positive")
    rng = np.random.default_rng(seed)
    analytic = problem.grad(params, batch)
    sizes = [p.size for p in params]
    total = sum(sizes)
    picks = rng.choice(total, size=min(n_coords, total), replace=False)
    worst = 0.0
    for flat in picks:
        k = 0
        while flat >= sizes[k]:
            flat -= sizes[k]
            k += 1
        bumped = [p.copy() for p in params]
        bumped[k].flat[flat] += h
        up = problem.loss(bumped, batch)
        bumped[k].flat[flat] -= 2.0 * h
        down = problem.loss(bumped, batch)
        numeric = (up - down) / (2.0 * h)
        err = abs(analytic[k].flat[flat] - numeric) / (abs(numeric) + 1e-12)
        worst = max(worst, err)
    return worst


@dataclass
class CheckpointSpectra:
    step: int
    weight_reports: list
    weight_mean_alpha: float | None
    update_reports: list
    update_mean_alpha: float | None


@dataclass
class RunRecord:
    """Per-step series plus checkpoint spectra for one training run."""

    problem: str
    kind: str
    steps: int
    batch_size: int
    seed: int
    losses: list = field(default_factory=list)
    grad_frob: list = field(default_factory=list)
    grad_nuclear: list = field(default_factory=list)
    effective_lr: list = field(default_factory=list)
    heavy_steps: int = 0
    checkpoints: list = field(default_factory=list)
    final_params: list = field(default_factory=list)

    def final_loss(self) -> float:
        return self.losses[-1]


def run_training(
    problem: Problem,
    cfg: OptimizerConfig,
    steps: int,
    batch_size: int,
    seed: int,
    checkpoints=(),
) -> RunRecord:
    """Deterministic minibatch training loop.

    Records loss, gradient Frobenius and nuclear norms and the effective
    step size every step; at checkpoint steps it also records spectral
    reports of the weights and of the applied update directions.  Aborts
    with the step index on a non-finite loss.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    params = [p.copy() for p in problem.params0]
    states = [init_state(cfg, shape) for shape in problem.shapes]
    stepper = scheduled_step if cfg.kind in HEAVY_KINDS else step
    checkpoint_set = set(int(c) for c in checkpoints)
    record = RunRecord(
        problem=problem.name,
        kind=cfg.kind,
        steps=steps,
        batch_size=batch_size,
        seed=seed,
    )
    full_batch = np.arange(problem.n_data)
    for t in range(steps):
        if batch_size >= problem.n_data:
            idx = full_batch
        else:
            idx = np.sort(rng.choice(problem.n_data, size=batch_size, replace=False))
        loss = problem.loss(params, idx)
        if not np.isfinite(loss):
            raise RuntimeError(f"training aborted: non-finite loss at step {t}")
        grads = problem.grad(params, idx)
        record.losses.append(float(loss))
        record.grad_frob.append(
            float(math.sqrt(sum(float(np.sum(g * g)) for g in grads)))
        )
        record.grad_nuclear.append(
            float(sum(float(singular_values(g).sum()) for g in grads))
        )
        traces = []
        for k in range(len(params)):
            params[k], tr = stepper(cfg, states[k], params[k], grads[k])
            traces.append(tr)
        record.effective_lr.append(traces[0].effective_lr)
        if traces[0].kind_used == cfg.kind and cfg.kind in HEAVY_KINDS:
            record.heavy_steps += 1
        if t in checkpoint_set:
            w_reports, w_alpha = spectral_report(
                [(f"step{t:06d}/p{k}/weight", params[k]) for k in range(len(params))]
            )
            u_reports, u_alpha = spectral_report(
                [
                    (f"step{t:06d}/p{k}/update", traces[k].direction)
                    for k in range(len(params))
                ]
            )
            record.checkpoints.append(
                CheckpointSpectra(
                    step=t,
                    weight_reports=w_reports,
                    weight_mean_alpha=w_alpha,
                    update_reports=u_reports,
                    update_mean_alpha=u_alpha,
                )
            )
    record.final_params = params
    return record


def tune_lr(
    problem_factory: Callable[[], Problem],
    base_cfg: OptimizerConfig,
    steps: int,
    batch_size: int,
    seed: int,
    grid=DEFAULT_LR_GRID,
):
    """Pick the grid learning rate with the best final loss.

    Non-finite runs are discarded; ties keep the earlier grid entry.
    Returns (best_lr, {lr: final_loss}).
    """
    results = {}
    best_lr = None
    best_loss = math.inf
    for lr in grid:
        cfg = replace(base_cfg, lr=lr)
        try:
            rec = run_training(problem_factory(), cfg, steps, batch_size, seed)
        except RuntimeError:
            results[lr] = math.inf
            continue
        results[lr] = rec.final_loss()
        if rec.final_loss() < best_loss:
            best_loss = rec.final_loss()
            best_lr = lr
    if best_lr is None:
        raise RuntimeError("no learning rate in the grid produced a finite run")
    return best_lr, results


def flops_estimate(kind: str, m: int, n: int, p: float = 0.125, ns_steps: int = 15):
    """Leading-term flop counts for one update direction.

    muon: 20*m*n*r for the five quintic iterations (r = min(m, n));
    muon_pow_ns adds the Gram product (4*m*n^2) and the coupled root
    iterations (6*L*T*n^3) with L = ns_root_rounds(p).  Lower-order terms
    are dropped.
    """
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    r = min(m, n)
    base = 20.0 * m * n * r
    if kind == "muon":
        return base
    if kind == "muon_pow_ns":
        rounds = ns_root_rounds(p)
        return base + 4.0 * m * n**2 + 6.0 * rounds * ns_steps * n**3
    raise ValueError(f"unknown flops kind {kind!r}")


def run_record_jsonl(record: RunRecord) -> str:
    """One step per line: loss, gradient norms, effective step size."""
    lines = []
    for t in range(record.steps):
        lines.append(
            json.dumps(
                {
                    "step": t,
                    "loss": record.losses[t],
                    "grad_frob": record.grad_frob[t],
                    "grad_nuclear": record.grad_nuclear[t],
                    "effective_lr": record.effective_lr[t],
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def run_summary(record: RunRecord) -> dict:
    return {
        "problem": record.problem,
        "optimizer": record.kind,
        "steps": record.steps,
        "batch_size": record.batch_size,
        "seed": record.seed,
        "final_loss": record.losses[-1],
        "min_grad_nuclear": min(record.grad_nuclear),
        "heavy_steps": record.heavy_steps,
    }
