"""Optimizer steppers.

Matrix-family variants share the momentum recursion
M_t = beta * M_{t-1} + (1 - beta) * G_t and differ in how they map the
momentum to an update direction:

    muon_svd            exact polar factor (all singular values set to 1)
    muon_ns             quintic Newton-Schulz approximate polar factor
    muon_pow            spectral power transform U Sigma^p V^T (exact SVD)
    muon_pow_ns         NS5 polar factor times a Newton-Schulz fractional
                        root of the momentum Gram matrix
    muon_fixspec        singular values replaced by the fixed sequence
                        i^(-decay)
    normuon             NS5 followed by row-wise second-moment
                        normalization and an RMS-targeted rescale
    muon_pow_normuon    power transform fed through the normuon rescale

sgdm, adam and adamw are the usual elementwise reference steppers.

Interval scheduling applies the configured (expensive) variant every
``interval``-th step and the cheap counterpart otherwise, sharing all
state buffers.
"""

import base64
from dataclasses import dataclass
import json
import math

import numpy as np

from .matcore import as_matrix, mat1_decode, mat1_encode, singular_values, svd
from .specfun import DEFAULT_NS, DEFAULT_ROOT_NS, NsConfig, newton_schulz5, ns_root

KINDS = (
    "sgdm",
    "adam",
    "adamw",
    "muon_svd",
    "muon_ns",
    "muon_pow",
    "muon_pow_ns",
    "muon_fixspec",
    "normuon",
    "muon_pow_normuon",
)
ADAM_KINDS = frozenset({"adam", "adamw"})
MATRIX_KINDS = frozenset(
    {"muon_svd", "muon_ns", "muon_pow", "muon_pow_ns", "muon_fixspec",
     "normuon", "muon_pow_normuon"}
)
NORMALIZED_KINDS = frozenset({"normuon", "muon_pow_normuon"})
# variants eligible for interval scheduling (expensive every k-th step)
HEAVY_KINDS = frozenset({"muon_pow", "muon_pow_ns", "muon_fixspec", "muon_pow_normuon"})


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    lr: float = 0.01
    momentum: float | None = None  # resolved: 0.9 adam family, 0.95 otherwise
    weight_decay: float = 0.0
    power: float = 0.125
    fixspec_decay: float = 0.25
    beta2: float | None = None  # resolved: 0.999 adam family, 0.95 normuon family
    eps: float = 1e-8
    interval: int = 1
    ns: NsConfig = DEFAULT_NS
    root_ns: NsConfig = DEFAULT_ROOT_NS
    lipschitz: float | None = None  # enables the adaptive step size

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.lr > 0.0:
            raise ValueError("lr must be positive")
        if self.momentum is None:
            object.__setattr__(self, "momentum", 0.9 if self.kind in ADAM_KINDS else 0.95)
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be non-negative")
        if not 0.0 <= self.power <= 1.0:
            raise ValueError("power must lie in [0, 1]")
        if not self.fixspec_decay > 0.0:
            raise ValueError("fixspec_decay must be positive")
        if self.beta2 is None:
            object.__setattr__(
                self, "beta2", 0.999 if self.kind in ADAM_KINDS else 0.95
            )
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta2 must lie in [0, 1)")
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if self.interval < 1:
            raise ValueError("interval must be >= 1")
        if self.lipschitz is not None and not self.lipschitz > 0.0:
            raise ValueError("lipschitz must be positive")


@dataclass
class OptimizerState:
    """Mutable per-parameter state; owned by one training sequence."""

    t: int
    m: np.ndarray
    v: np.ndarray | None = None


@dataclass(frozen=True)
class UpdateTrace:
    """Record of one step: applied direction, scaling, diagnostics."""

    direction: np.ndarray
    scale: float
    effective_lr: float
    kind_used: str
    momentum_frob: float
    sigma: np.ndarray | None = None


def init_state(cfg: OptimizerConfig, shape) -> OptimizerState:
    rows, cols = shape
    m = np.zeros((rows, cols))
    v = None
    if cfg.kind in ADAM_KINDS:
        v = np.zeros((rows, cols))
    elif cfg.kind in NORMALIZED_KINDS:
        v = np.zeros((rows, 1))
    return OptimizerState(t=0, m=m, v=v)


def adaptive_lr(m, p: float, lipschitz: float) -> float:
    """Step size <M, rho(M)> / (L * ||rho(M)||_F^2), rho = power transform.

    On the singular values this is sum(sigma^(1+p)) / (L * sum(sigma^(2p))),
    strictly positive for a nonzero momentum.
    """
    if not lipschitz > 0.0:
        raise ValueError("lipschitz must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("power must lie in [0, 1]")
    sigma = singular_values(m)
    if sigma[0] == 0.0:
        raise ValueError("adaptive_lr needs a nonzero matrix")
    pos = sigma[sigma > 0.0]
    return float(np.sum(pos ** (1.0 + p)) / (lipschitz * np.sum(pos ** (2.0 * p))))


def _spectral_direction(kind: str, cfg: OptimizerConfig, m_new: np.ndarray):
    """Direction matrix and (when available en route) its singular values."""
    if not m_new.any():
        # zero momentum: direction defined as zero so training loops can
        # pass through warm-up edge cases
        r = min(m_new.shape)
        return np.zeros_like(m_new), np.zeros(r)
    if kind == "muon_ns" or kind == "normuon":
        return newton_schulz5(m_new, cfg.ns), None
    if kind == "muon_pow_ns":
        gram = m_new.T @ m_new
        gram = (gram + gram.T) / 2.0
        root = ns_root(gram, cfg.power, cfg.root_ns)
        return newton_schulz5(m_new, cfg.ns) @ root, None
    r = svd(m_new)
    if kind == "muon_svd":
        lam = np.where(r.sigma > 0.0, 1.0, 0.0)
    elif kind in ("muon_pow", "muon_pow_normuon"):
        lam = np.where(r.sigma > 0.0, r.sigma**cfg.power, 0.0)
    elif kind == "muon_fixspec":
        lam = np.arange(1.0, len(r.sigma) + 1.0) ** (-cfg.fixspec_decay)
    else:
        raise ValueError(f"unknown spectral kind {kind!r}")
    return (r.u * lam) @ r.v.T, lam


def _step_with_kind(cfg, state, w, g, kind):
    w = as_matrix(w, "weights")
    g = as_matrix(g, "gradient")
    if w.shape != g.shape:
        raise ValueError(f"weights {w.shape} and gradient {g.shape} differ in shape")
    if state.m.shape != w.shape:
        raise ValueError(f"state momentum {state.m.shape} does not match {w.shape}")
    rows, cols = w.shape
    beta = cfg.momentum
    lr = cfg.lr
    lam = cfg.weight_decay

    if kind == "adam" or kind == "adamw":
        g_eff = g + lam * w if kind == "adam" else g
        state.m = beta * state.m + (1.0 - beta) * g_eff
        state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g_eff * g_eff
        state.t += 1
        m_hat = state.m / (1.0 - beta**state.t)
        v_hat = state.v / (1.0 - cfg.beta2**state.t)
        direction = m_hat / (np.sqrt(v_hat) + cfg.eps)
        w_next = w if kind == "adam" else w - lr * lam * w
        w_next = w_next - lr * direction
        trace = UpdateTrace(
            direction=direction, scale=1.0, effective_lr=lr, kind_used=kind,
            momentum_frob=float(np.linalg.norm(state.m)),
        )
        return w_next, trace

    state.m = beta * state.m + (1.0 - beta) * g
    state.t += 1
    m_new = state.m

    if kind == "sgdm":
        w_next = w - lr * lam * w
        w_next = w_next - lr * m_new
        trace = UpdateTrace(
            direction=m_new.copy(), scale=1.0, effective_lr=lr, kind_used=kind,
            momentum_frob=float(np.linalg.norm(m_new)),
        )
        return w_next, trace

    direction, sigma = _spectral_direction(kind, cfg, m_new)

    if kind in NORMALIZED_KINDS:
        o_sq_row_mean = np.mean(direction * direction, axis=1, keepdims=True)
        state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * o_sq_row_mean
        o_hat = direction / (np.sqrt(state.v) + cfg.eps)
        o_norm = float(np.linalg.norm(o_hat))
        eta_hat = 0.2 * lr * math.sqrt(rows * cols) / o_norm if o_norm > 0.0 else 0.0
        w_next = w - lr * lam * w
        w_next = w_next - eta_hat * o_hat
        trace = UpdateTrace(
            direction=o_hat, scale=1.0, effective_lr=eta_hat, kind_used=kind,
            momentum_frob=float(np.linalg.norm(m_new)), sigma=None,
        )
        return w_next, trace

    if cfg.lipschitz is not None:
        # adaptive mode: step size from the momentum/direction alignment,
        # no shape scaling
        d_sq = float(np.sum(direction * direction))
        eta_t = float(np.sum(m_new * direction)) / (cfg.lipschitz * d_sq) if d_sq > 0.0 else 0.0
        w_next = w - eta_t * lam * w
        w_next = w_next - eta_t * direction
        trace = UpdateTrace(
            direction=direction, scale=1.0, effective_lr=eta_t, kind_used=kind,
            momentum_frob=float(np.linalg.norm(m_new)), sigma=sigma,
        )
        return w_next, trace

    scale = math.sqrt(max(1.0, rows / cols))
    w_next = w - lr * lam * w
    w_next = w_next - (lr * scale) * direction
    trace = UpdateTrace(
        direction=direction, scale=scale, effective_lr=lr * scale, kind_used=kind,
        momentum_frob=float(np.linalg.norm(m_new)), sigma=sigma,
    )
    return w_next, trace


def step(cfg: OptimizerConfig, state: OptimizerState, w, g):
    """Apply one optimizer step; returns (w_next, trace).

    Mutates ``state`` (momentum, second moment, step count); ``w`` and ``g``
    are left untouched.
    """
    return _step_with_kind(cfg, state, w, g, cfg.kind)


def light_kind(kind: str) -> str:
    """Cheap counterpart used between scheduled heavy steps."""
    return "normuon" if kind == "muon_pow_normuon" else "muon_ns"


def scheduled_step(cfg: OptimizerConfig, state: OptimizerState, w, g):
    """Interval-scheduled step.

    Steps with index t (counted from 0, so the first step is always heavy)
    apply the configured variant when t % interval == 0 and the cheap
    counterpart otherwise; all state buffers are shared across modes.
    """
    if cfg.kind not in HEAVY_KINDS:
        raise ValueError(f"scheduled_step needs a heavy-variant kind, got {cfg.kind!r}")
    heavy = state.t % cfg.interval == 0
    kind = cfg.kind if heavy else light_kind(cfg.kind)
    return _step_with_kind(cfg, state, w, g, kind)


def heavy_step_count(steps: int, interval: int) -> int:
    """Number of heavy steps in a scheduled run of ``steps`` steps."""
    return int(math.ceil(steps / interval))


def _b64(m: np.ndarray) -> str:
    return base64.b64encode(mat1_encode(m)).decode("ascii")


def _ns_dict(ns: NsConfig) -> dict:
    return {
        "ns_steps": ns.ns_steps,
        "eps": ns.eps,
        "coeff_a": ns.coeff_a,
        "coeff_b": ns.coeff_b,
        "coeff_c": ns.coeff_c,
    }


def state_to_json(cfg: OptimizerConfig, state: OptimizerState) -> str:
    """Snapshot for checkpoint/resume: JSON with MAT1-in-base64 buffers."""
    obj = {
        "kind": cfg.kind,
        "t": state.t,
        "hyperparameters": {
            "lr": cfg.lr,
            "momentum": cfg.momentum,
            "weight_decay": cfg.weight_decay,
            "power": cfg.power,
            "fixspec_decay": cfg.fixspec_decay,
            "beta2": cfg.beta2,
            "eps": cfg.eps,
            "interval": cfg.interval,
            "ns": _ns_dict(cfg.ns),
            "root_ns": _ns_dict(cfg.root_ns),
            "lipschitz": cfg.lipschitz,
        },
        "momentum": _b64(state.m),
        "second_moment": None if state.v is None else _b64(state.v),
    }
    return json.dumps(obj, sort_keys=True)


def state_from_json(text: str):
    """Inverse of :func:`state_to_json`; returns (config, state)."""
    obj = json.loads(text)
    hp = obj["hyperparameters"]
    cfg = OptimizerConfig(
        kind=obj["kind"],
        lr=hp["lr"],
        momentum=hp["momentum"],
        weight_decay=hp["weight_decay"],
        power=hp["power"],
        fixspec_decay=hp["fixspec_decay"],
        beta2=hp["beta2"],
        eps=hp["eps"],
        interval=hp["interval"],
        ns=NsConfig(**hp["ns"]),
        root_ns=NsConfig(**hp["root_ns"]),
        lipschitz=hp["lipschitz"],
    )
    m = mat1_decode(base64.b64decode(obj["momentum"]), origin="momentum")
    v = None
    if obj["second_moment"] is not None:
        v = mat1_decode(base64.b64decode(obj["second_moment"]), origin="second_moment")
    return cfg, OptimizerState(t=int(obj["t"]), m=m, v=v)
