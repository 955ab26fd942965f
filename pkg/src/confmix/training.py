"""Training loops: alternating turns, joint updates, blend objective.

The in-turn loop alternates full-batch gradient-descent phases: the weak
expert (plus any learnable gate parameters) optimizes the mixture loss
against a frozen strong expert, then the strong expert optimizes against
the frozen weak side, for a fixed number of rounds. "Until convergence"
is operationalized as early stopping on validation loss with a patience
window, capped by max_epochs. Joint mode updates everything at once on
the mixture loss; blend mode does the same on the blend loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .confidence import (ConfidenceSpec, confidence_batch, confidence_rows,
                         default_spec)
from .errors import ConfigError, DomainError, TrainingDivergedError
from .experts import ExpertArch, ExpertModel, forward, init_expert
from .graphs import Graph, conv_coefficients
from .mixture import blend_loss, infer_expected, infer_stochastic, mixture_loss

MODES = ("in_turn", "joint", "blend")
PRETRAIN_CHOICES = ("none", "weak", "strong", "both")
HIST_BINS = 20


@dataclass
class TrainConfig:
    mode: str = "in_turn"
    rounds: int = 5
    max_epochs: int = 500
    lr: float = 0.5
    patience: int = 20
    seed: int = 0
    pretrain: str = "weak"
    pretrain_epochs: int = 100
    weak_arch: ExpertArch = field(default_factory=lambda: ExpertArch("weak", 1))
    strong_arch: ExpertArch = field(default_factory=lambda: ExpertArch("gcn", 2, 32))
    spec: ConfidenceSpec = field(default_factory=default_spec)
    gate_seed: int = 1   # evaluation gate draws, independent of model seed

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.pretrain not in PRETRAIN_CHOICES:
            raise ConfigError(
                f"pretrain must be one of {PRETRAIN_CHOICES}, got {self.pretrain!r}")
        if min(self.rounds, self.max_epochs, self.patience) < 1:
            raise ConfigError("rounds, max_epochs and patience must be positive")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.pretrain_epochs < 0:
            raise ConfigError("pretrain_epochs must be >= 0")
        if self.weak_arch.kind != "weak":
            raise ConfigError("weak expert must have kind 'weak'")
        if self.strong_arch.kind not in ("gcn", "gcn_skip"):
            raise ConfigError("strong expert must be a graph convolution")


@dataclass
class TrainReport:
    loss_rows: list = field(default_factory=list)      # (round, turn, epoch, train, val)
    hist_rows: list = field(default_factory=list)      # (round, bin_lo, bin_hi, count)
    accuracy_rows: list = field(default_factory=list)  # (round, split, accuracy)
    metric_rows: list = field(default_factory=list)    # (split, mode, accuracy)

    def write_csvs(self, outdir):
        def fmt(x):
            return f"{x:.12g}" if isinstance(x, float) else str(x)
        tables = {
            "loss.csv": (["round", "turn", "epoch", "train_loss", "val_loss"],
                         self.loss_rows),
            "confidence_hist.csv": (["round", "bin_lo", "bin_hi", "count"],
                                    self.hist_rows),
            "metrics.csv": (["split", "mode", "accuracy"], self.metric_rows),
        }
        for name, (header, rows) in tables.items():
            with open(f"{outdir}/{name}", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                for row in rows:
                    writer.writerow([fmt(x) for x in row])


@dataclass
class TrainResult:
    weak: ExpertModel
    strong: ExpertModel
    spec: ConfidenceSpec
    report: TrainReport


def _np_ce_rows(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    picked = probs[np.arange(labels.size), labels]
    return -np.log(np.clip(picked, T.LOG_FLOOR, 1.0))


def _snapshot(params):
    return [p.values.copy() for p in params]


def _restore(params, snap):
    for p, values in zip(params, snap):
        p.values = values.copy()


def _sgd_step(params, lr):
    for p in params:
        if p.grad is not None:
            p.values = p.values - lr * p.grad


class _Phase:
    """One early-stopped gradient-descent phase over a fixed loss builder."""

    def __init__(self, params, lr, max_epochs, patience):
        self.params = params
        self.lr = lr
        self.max_epochs = max_epochs
        self.patience = patience

    def run(self, losses_fn, record):
        best_val = np.inf
        best = _snapshot(self.params)
        wait = 0
        for epoch in range(self.max_epochs):
            try:
                train_loss, val_loss = losses_fn()
            except DomainError as e:
                raise TrainingDivergedError(f"non-finite values at epoch {epoch}") from e
            value = train_loss.item()
            if not np.isfinite(value) or not np.isfinite(val_loss):
                raise TrainingDivergedError(f"loss diverged at epoch {epoch}")
            record(epoch, value, val_loss)
            if val_loss < best_val - 1e-12:
                best_val, best, wait = val_loss, _snapshot(self.params), 0
            else:
                wait += 1
                if wait >= self.patience:
                    break
            T.backward(train_loss)
            _sgd_step(self.params, self.lr)
        _restore(self.params, best)


def train(config: TrainConfig, graph: Graph, weak: ExpertModel | None = None,
          strong: ExpertModel | None = None) -> TrainResult:
    """Run the configured training mode; deterministic under config.seed."""
    config.validate()
    train_ids = graph.splits["train"]
    if train_ids.size == 0:
        raise ConfigError("graph has an empty train split")
    val_ids = graph.splits["val"] if graph.splits["val"].size else train_ids
    f, n = graph.num_features, graph.num_classes
    spec = config.spec

    if weak is None:
        weak = init_expert(config.weak_arch, f, n, config.seed)
    if strong is None:
        strong = init_expert(config.strong_arch, f, n, config.seed + 1)
    if config.pretrain in ("weak", "both"):
        _plain_ce_phase(weak, graph, config.pretrain_epochs, config.lr)
    if config.pretrain in ("strong", "both"):
        _plain_ce_phase(strong, graph, config.pretrain_epochs, config.lr)

    coeff = conv_coefficients(graph)
    labels = graph.labels
    y_train, y_val = labels[train_ids], labels[val_ids]
    report = TrainReport()

    def conf_values(weak_probs: np.ndarray) -> np.ndarray:
        return confidence_batch(weak_probs, spec)

    def val_mixture(pw, ps) -> float:
        c = conf_values(pw[val_ids])
        ce_w = _np_ce_rows(pw[val_ids], y_val)
        ce_s = _np_ce_rows(ps[val_ids], y_val)
        return float((c * ce_w + (1.0 - c) * ce_s).mean())

    def val_blend(pw, ps) -> float:
        c = conf_values(pw[val_ids])
        q = c[:, None] * pw[val_ids] + (1.0 - c)[:, None] * ps[val_ids]
        return float(_np_ce_rows(q, y_val).mean())

    gate_params = list(spec.parameters())
    weak_params = list(weak.parameters()) + gate_params
    strong_params = list(strong.parameters())

    def weak_turn_losses(frozen_strong_rows):
        ps_train = frozen_strong_rows[train_ids]

        def losses():
            pw = forward(weak, graph)
            c = T.take_rows(confidence_rows(pw, spec), train_ids)
            loss = mixture_loss(T.take_rows(pw, train_ids), ps_train, c, y_train)
            return loss, val_mixture(pw.values, frozen_strong_rows)
        return losses

    def strong_turn_losses(frozen_weak_rows, frozen_conf):
        pw_train = frozen_weak_rows[train_ids]
        c_train = frozen_conf[train_ids]

        def losses():
            ps = forward(strong, graph, coefficients=coeff)
            loss = mixture_loss(pw_train, T.take_rows(ps, train_ids), c_train, y_train)
            return loss, val_mixture(frozen_weak_rows, ps.values)
        return losses

    def record_round(round_idx):
        pw = forward(weak, graph).values
        ps = forward(strong, graph, coefficients=coeff).values
        c_train = conf_values(pw[train_ids])
        counts, edges = np.histogram(c_train, bins=HIST_BINS, range=(0.0, 1.0))
        for b in range(HIST_BINS):
            report.hist_rows.append((round_idx, float(edges[b]), float(edges[b + 1]),
                                     int(counts[b])))
        c_all = conf_values(pw)
        _, pred = infer_expected(pw, ps, c_all)
        for split in ("train", "val", "test"):
            ids = graph.splits[split]
            if ids.size:
                acc = float((pred[ids] == labels[ids]).mean())
                report.accuracy_rows.append((round_idx, split, acc))

    if config.mode == "in_turn":
        for round_idx in range(1, config.rounds + 1):
            frozen_strong = forward(strong, graph, coefficients=coeff).values
            phase = _Phase(weak_params, config.lr, config.max_epochs, config.patience)
            phase.run(weak_turn_losses(frozen_strong),
                      lambda e, t, v, r=round_idx: report.loss_rows.append(
                          (r, "weak", e, t, v)))
            frozen_weak = forward(weak, graph).values
            frozen_conf = conf_values(frozen_weak)
            phase = _Phase(strong_params, config.lr, config.max_epochs, config.patience)
            phase.run(strong_turn_losses(frozen_weak, frozen_conf),
                      lambda e, t, v, r=round_idx: report.loss_rows.append(
                          (r, "strong", e, t, v)))
            record_round(round_idx)
    else:
        loss_fn = mixture_loss if config.mode == "joint" else blend_loss
        val_fn = val_mixture if config.mode == "joint" else val_blend

        def losses():
            pw = forward(weak, graph)
            ps = forward(strong, graph, coefficients=coeff)
            c = T.take_rows(confidence_rows(pw, spec), train_ids)
            loss = loss_fn(T.take_rows(pw, train_ids), T.take_rows(ps, train_ids),
                           c, y_train)
            return loss, val_fn(pw.values, ps.values)

        phase = _Phase(weak_params + strong_params, config.lr,
                       config.rounds * config.max_epochs, config.patience)
        phase.run(losses, lambda e, t, v: report.loss_rows.append(
            (1, config.mode, e, t, v)))
        record_round(1)

    for split in ("train", "val", "test"):
        if graph.splits[split].size:
            scores = evaluate(weak, strong, spec, graph, split, config.gate_seed)
            report.metric_rows.append((split, "expected", scores["expected"]))
            report.metric_rows.append((split, "stochastic", scores["stochastic"]))

    return TrainResult(weak, strong, spec, report)


def _plain_ce_phase(model: ExpertModel, graph: Graph, epochs: int, lr: float):
    train_ids = graph.splits["train"]
    labels = graph.labels[train_ids]
    coeff = conv_coefficients(graph) if model.kind != "weak" else None
    params = list(model.parameters())
    for _ in range(epochs):
        probs = forward(model, graph, coefficients=coeff)
        loss = T.mean_all(_ce_rows_tensor(T.take_rows(probs, train_ids), labels))
        T.backward(loss)
        _sgd_step(params, lr)


def _ce_rows_tensor(probs: T.Tensor, labels: np.ndarray) -> T.Tensor:
    hot = np.eye(probs.shape[1])[labels]
    return -T.sum_rows(hot * T.log(probs))


def pretrain_expert(arch: ExpertArch, graph: Graph, epochs: int, lr: float,
                    seed: int) -> ExpertModel:
    """Plain cross-entropy training of a single expert on the train split.

    Zero epochs returns the seeded initial weights unchanged.
    """
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    if lr <= 0:
        raise ConfigError(f"learning rate must be > 0, got {lr}")
    model = init_expert(arch, graph.num_features, graph.num_classes, seed)
    if graph.splits["train"].size == 0:
        raise ConfigError("graph has an empty train split")
    _plain_ce_phase(model, graph, epochs, lr)
    return model


def evaluate(weak: ExpertModel, strong: ExpertModel, spec: ConfidenceSpec,
             graph: Graph, split: str, gate_seed: int) -> dict:
    """Accuracy per inference mode plus the confidence histogram.

    Stochastic gating draws one variate per node in node-id order from
    gate_seed, independently of any training seed.
    """
    ids = graph.splits[split]
    if ids.size == 0:
        raise ConfigError(f"split {split!r} is empty")
    pw = forward(weak, graph).values
    ps = forward(strong, graph, coefficients=conv_coefficients(graph)).values
    c = confidence_batch(pw, spec)
    labels = graph.labels
    _, pred_expected = infer_expected(pw, ps, c)
    pred_stochastic, _ = infer_stochastic(pw, ps, c, gate_seed)
    counts, _ = np.histogram(c[ids], bins=HIST_BINS, range=(0.0, 1.0))
    return {
        "expected": float((pred_expected[ids] == labels[ids]).mean()),
        "stochastic": float((pred_stochastic[ids] == labels[ids]).mean()),
        "histogram": counts.tolist(),
    }


def single_expert_baseline(arch: ExpertArch, graph: Graph, seed: int,
                           lr: float = 0.5, max_epochs: int = 500,
                           patience: int = 20) -> ExpertModel:
    """Train one expert alone with validation early stopping.

    The comparison baseline for mixture runs: same optimizer and
    stopping rule as a turn, but plain cross-entropy all the way.
    """
    model = init_expert(arch, graph.num_features, graph.num_classes, seed)
    train_ids = graph.splits["train"]
    val_ids = graph.splits["val"] if graph.splits["val"].size else train_ids
    coeff = conv_coefficients(graph) if model.kind != "weak" else None
    y_train, y_val = graph.labels[train_ids], graph.labels[val_ids]

    def losses():
        probs = forward(model, graph, coefficients=coeff)
        loss = T.mean_all(_ce_rows_tensor(T.take_rows(probs, train_ids), y_train))
        val = float(_np_ce_rows(probs.values[val_ids], y_val).mean())
        return loss, val

    phase = _Phase(list(model.parameters()), lr, max_epochs, patience)
    phase.run(losses, lambda e, t, v: None)
    return model
