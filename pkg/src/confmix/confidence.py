"""Confidence of a prediction: a dispersion measure composed with a gate.

Dispersion is distance from the uniform vector (variance, or negative
entropy shifted so the uniform scores zero). The gate maps dispersion
into [0, 1]. The fixed gate shapes are non-decreasing with g(0) = 0;
step and two_level are the discontinuous shapes used by the minimizer
analysis, capped_linear is the smooth default used in training. The
learnable gate is a small perceptron over [variance, neg_entropy] with
a softmax head; nothing anchors it to zero at zero dispersion and its
monotonicity is not enforced, so analytical guarantees only cover the
fixed shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, DomainError

DISPERSION_KINDS = ("variance", "neg_entropy")
SIMPLEX_TOL = 1e-9


def _require_simplex(p: np.ndarray):
    if p.ndim != 1:
        raise DomainError(f"expected a probability vector, got shape {p.shape}")
    if p.min() < -SIMPLEX_TOL or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise DomainError(f"input off the probability simplex: {p!r}")


def _dispersion_rows_np(rows: np.ndarray, kind: str) -> np.ndarray:
    n = rows.shape[-1]
    if kind == "variance":
        return ((rows - 1.0 / n) ** 2).sum(axis=-1)
    if kind == "neg_entropy":
        logs = np.log(np.clip(rows, T.LOG_FLOOR, 1.0))
        plogp = np.where(rows > 0.0, rows * logs, 0.0)
        value = np.log(n) + plogp.sum(axis=-1)
        # the shift makes the uniform vector score exactly zero in exact
        # arithmetic; float residue there is ~1e-16, far below the true
        # dispersion one grid step away, so snap it out
        return np.where(np.abs(value) < 1e-15, 0.0, value)
    raise ConfigError(f"dispersion kind must be one of {DISPERSION_KINDS}, got {kind!r}")


def dispersion(p, kind: str) -> float:
    """Zero exactly at the uniform vector, positive elsewhere."""
    p = np.asarray(p, dtype=np.float64)
    _require_simplex(p)
    return float(_dispersion_rows_np(p, kind))


def dispersion_rows(rows: T.Tensor, kind: str) -> T.Tensor:
    """Differentiable per-row dispersion of a probability matrix."""
    n = rows.shape[1]
    if kind == "variance":
        centered = rows + (-1.0 / n)
        return T.sum_rows(centered * centered)
    if kind == "neg_entropy":
        return T.sum_rows(rows * T.log(rows)) + float(np.log(n))
    raise ConfigError(f"dispersion kind must be one of {DISPERSION_KINDS}, got {kind!r}")


# ---- gate shapes ----

@dataclass(frozen=True)
class StepGate:
    """0 up to the threshold, 1 above it; tau=0 is the all-or-nothing gate."""
    tau: float = 0.0

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigError(f"step threshold must be >= 0, got {self.tau}")

    def __call__(self, x):
        return np.where(np.asarray(x, dtype=np.float64) > self.tau, 1.0, 0.0)


@dataclass(frozen=True)
class TwoLevelGate:
    """0 at or below zero, beta inside (0, d_max), 1 from d_max on."""
    d_max: float
    beta: float

    def __post_init__(self):
        if self.d_max <= 0:
            raise ConfigError(f"d_max must be > 0, got {self.d_max}")
        if not (0.0 < self.beta < 1.0):
            raise ConfigError(f"beta must be in (0, 1), got {self.beta}")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x <= 0.0, 0.0, np.where(x < self.d_max, self.beta, 1.0))


@dataclass(frozen=True)
class CappedLinearGate:
    """min(1, slope * x): the smooth shape used for trainable gating."""
    slope: float

    def __post_init__(self):
        if self.slope <= 0:
            raise ConfigError(f"slope must be > 0, got {self.slope}")

    def __call__(self, x):
        return np.minimum(1.0, self.slope * np.asarray(x, dtype=np.float64))


@dataclass
class LearnableGate:
    """Perceptron over the per-node [variance, neg_entropy] pair.

    Hidden relu layers, then a 2-unit softmax head whose first column is
    the confidence, which keeps the output in (0, 1) using only the
    engine's primitives.
    """
    weights: list = field(default_factory=list)   # list of (W Tensor, b Tensor)

    @classmethod
    def create(cls, seed: int, hidden: int = 8, hidden_layers: int = 1):
        rng = np.random.default_rng(seed)
        dims = [2] + [hidden] * hidden_layers + [2]
        weights = []
        for f_in, f_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(f_in)
            weights.append((
                T.Tensor(rng.uniform(-bound, bound, (f_in, f_out)), requires_grad=True),
                T.Tensor(np.zeros(f_out), requires_grad=True),
            ))
        return cls(weights)

    def parameters(self):
        for w, b in self.weights:
            yield w
            yield b

    def __call__(self, x):
        """Numpy forward on dispersion pairs of shape (..., 2)."""
        h = np.asarray(x, dtype=np.float64)
        for i, (w, b) in enumerate(self.weights):
            h = h @ w.values + b.values
            if i < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
        z = h - h.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return (e / e.sum(axis=-1, keepdims=True))[..., 0]


GATE_NAMES = {"step": StepGate, "two_level": TwoLevelGate,
              "capped_linear": CappedLinearGate, "learnable": LearnableGate}


@dataclass
class ConfidenceSpec:
    dispersion: str
    gate: object

    def __post_init__(self):
        if self.dispersion not in DISPERSION_KINDS:
            raise ConfigError(
                f"dispersion must be one of {DISPERSION_KINDS}, got {self.dispersion!r}")

    @property
    def is_fixed(self) -> bool:
        return not isinstance(self.gate, LearnableGate)

    def parameters(self):
        if isinstance(self.gate, LearnableGate):
            yield from self.gate.parameters()


def default_spec() -> ConfidenceSpec:
    """Variance with a capped-linear gate that saturates only at one-hot
    rows for binary problems, keeping the gate gradient alive."""
    return ConfidenceSpec("variance", CappedLinearGate(slope=2.0))


def confidence(p, spec: ConfidenceSpec) -> float:
    """C(p) = gate(dispersion(p)); in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    _require_simplex(p)
    return float(confidence_batch(p[None, :], spec)[0])


def confidence_batch(rows: np.ndarray, spec: ConfidenceSpec) -> np.ndarray:
    """Vectorized confidence over probability rows (no simplex check)."""
    rows = np.asarray(rows, dtype=np.float64)
    if isinstance(spec.gate, LearnableGate):
        pair = np.stack([_dispersion_rows_np(rows, "variance"),
                         _dispersion_rows_np(rows, "neg_entropy")], axis=-1)
        return np.asarray(spec.gate(pair), dtype=np.float64)
    return np.asarray(spec.gate(_dispersion_rows_np(rows, spec.dispersion)),
                      dtype=np.float64)


def confidence_rows(rows: T.Tensor, spec: ConfidenceSpec) -> T.Tensor:
    """Differentiable per-row confidence of a probability matrix.

    Step and two-level gates contribute zero gradient (piecewise
    constant); capped_linear and the learnable gate are differentiable
    almost everywhere.
    """
    gate = spec.gate
    if isinstance(gate, LearnableGate):
        pair = T.stack_columns([dispersion_rows(rows, "variance"),
                                dispersion_rows(rows, "neg_entropy")])
        h = pair
        for i, (w, b) in enumerate(gate.weights):
            h = T.matmul(h, w) + b
            if i < len(gate.weights) - 1:
                h = T.relu(h)
        probs = T.softmax_rows(h)
        return T.sum_rows(T.matmul(probs, np.array([[1.0], [0.0]])))
    d = dispersion_rows(rows, spec.dispersion)
    if isinstance(gate, CappedLinearGate):
        scaled = d * gate.slope
        return scaled - T.relu(scaled + (-1.0))
    return T.piecewise_constant(d, gate)


def quasiconvexity_witness_search(spec: ConfidenceSpec, trials: int, seed: int,
                                  n: int = 2) -> float:
    """Worst violation of C(mix) <= max(C(p), C(p')) over random triples.

    Returns max over trials of C(lam*p + (1-lam)*p') - max(C(p), C(p'));
    a quasiconvex confidence keeps this at or below zero (1e-12 noise).
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(n), size=trials)
    q = rng.dirichlet(np.ones(n), size=trials)
    lam = rng.uniform(0.0, 1.0, size=trials)
    mix = lam[:, None] * p + (1.0 - lam[:, None]) * q
    c_mix = confidence_batch(mix, spec)
    c_max = np.maximum(confidence_batch(p, spec), confidence_batch(q, spec))
    return float((c_mix - c_max).max())


# ---- serialization (embedded in run configurations) ----

def spec_to_document(spec: ConfidenceSpec) -> dict:
    gate = spec.gate
    if isinstance(gate, StepGate):
        g = {"kind": "step", "tau": gate.tau}
    elif isinstance(gate, TwoLevelGate):
        g = {"kind": "two_level", "d_max": gate.d_max, "beta": gate.beta}
    elif isinstance(gate, CappedLinearGate):
        g = {"kind": "capped_linear", "slope": gate.slope}
    else:
        g = {"kind": "learnable",
             "weights": [[w.values.tolist(), b.values.tolist()]
                         for w, b in gate.weights]}
    return {"dispersion": spec.dispersion, "gate": g}


def spec_from_document(doc: dict) -> ConfidenceSpec:
    g = doc["gate"]
    kind = g.get("kind")
    if kind == "step":
        gate = StepGate(float(g.get("tau", 0.0)))
    elif kind == "two_level":
        gate = TwoLevelGate(float(g["d_max"]), float(g["beta"]))
    elif kind == "capped_linear":
        gate = CappedLinearGate(float(g["slope"]))
    elif kind == "learnable":
        gate = LearnableGate([(T.Tensor(w, requires_grad=True),
                               T.Tensor(b, requires_grad=True))
                              for w, b in g["weights"]])
    else:
        raise ConfigError(f"gate kind must be one of {sorted(GATE_NAMES)}, got {kind!r}")
    return ConfidenceSpec(doc["dispersion"], gate)
