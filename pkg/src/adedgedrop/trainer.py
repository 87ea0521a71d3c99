"""Alternating training loop: inner ascent on the perturbation, outer
descent on the edge predictor and the downstream classifier.

Each epoch re-initializes the perturbation, runs ``eta`` inner iterations
(predict edges, corrupt the graph, ascend delta, accumulate predictor
gradients), then applies one averaged predictor step, one classifier step on
the final corrupted graph, and the edge-feature blend. Validation and test
accuracy are always measured on the complete graph.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .adversary import (EdgeMask, Perturbation, compute_mask,
                        corrupt_adjacency, init_edge_predictor,
                        init_perturbation, keep_probabilities,
                        line_graph_loss, pgd_step, predict_edges)
from .backbone import (GcnParams, accuracy, classification_loss, gcn_forward,
                       init_gcn_params)
from .errors import ContractError
from .graphs import Graph, LabelSplit, normalize_adjacency, save_edges
from .linegraph import LineGraphFeatures, build_line_graph, init_features, \
    update_features
from .sparse import CsrMatrix, csr_from_coo
from .supervision import EdgeSimilarity, PreDropMask, build_supervision, \
    gaussian_similarity, pre_drop

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    mu: float = 0.6
    alpha: float = 0.5
    gamma: float = 0.1
    eta: int = 5
    epsilon: float = 0.05
    lr: float = 0.01
    epochs: int = 1000
    hidden: int = 16
    seed: int = 0
    p_pre: float = 0.0
    sigma_override: float | None = None
    adversarial: bool = True
    random_drop_rate: float = 0.0
    patience: int = 200

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ContractError(f"mu must lie in [0, 1], got {self.mu}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.gamma <= 0.0:
            raise ContractError(f"gamma must be positive, got {self.gamma}")
        if self.eta < 1:
            raise ContractError(f"eta must be at least 1, got {self.eta}")
        if self.epsilon < 0.0:
            raise ContractError(
                f"epsilon must be non-negative, got {self.epsilon}")
        if self.lr <= 0.0:
            raise ContractError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ContractError(f"epochs must be at least 1, got {self.epochs}")
        if self.hidden < 1:
            raise ContractError(f"hidden must be at least 1, got {self.hidden}")
        if not 0.0 <= self.p_pre <= 1.0:
            raise ContractError(f"p_pre must lie in [0, 1], got {self.p_pre}")
        if not 0.0 <= self.random_drop_rate < 1.0:
            raise ContractError(
                f"random_drop_rate must lie in [0, 1), got "
                f"{self.random_drop_rate}")
        if self.patience < 1:
            raise ContractError(
                f"patience must be at least 1, got {self.patience}")
        if self.sigma_override is not None and self.sigma_override <= 0.0:
            raise ContractError(
                f"sigma_override must be positive, got {self.sigma_override}")


@dataclass
class MetricsRecord:
    epoch: int
    l_lg: float | None
    l_ce: float
    val_acc: float
    test_acc: float
    kept_edges: int
    wall_ms: float


@dataclass
class TrainState:
    theta: GcnParams
    omega: GcnParams
    delta: Perturbation | None
    x_lg: LineGraphFeatures
    train_graph: Graph
    pre_mask: PreDropMask | None
    sigma: float
    epoch: int = 0
    best_val_acc: float = float("-inf")
    best_epoch: int = 0
    best_mask: EdgeMask | None = None
    best_theta: tuple[np.ndarray, np.ndarray] | None = None
    best_omega: tuple[np.ndarray, np.ndarray] | None = None


def _params_from_snapshot(snapshot, hidden: int, prefix: str) -> GcnParams:
    w1, w2 = snapshot
    return GcnParams(w1=ad.Parameter(w1.copy(), f"{prefix}.w1"),
                     w2=ad.Parameter(w2.copy(), f"{prefix}.w2"),
                     hidden=hidden)


def _training_prop(corrupted: CsrMatrix, extra_edges: np.ndarray,
                   num_nodes: int) -> CsrMatrix:
    """Normalized propagation matrix for one epoch's training graph.

    ``extra_edges`` are the pre-dropped edges kept by this epoch's random
    draw; they are disjoint from the mask-governed survivors.
    """
    if extra_edges.shape[0] == 0:
        return normalize_adjacency(corrupted, num_nodes)
    counts = np.diff(corrupted.indptr)
    kept_rows = np.repeat(np.arange(num_nodes, dtype=np.int64), counts)
    rows = np.concatenate([kept_rows, extra_edges[:, 0], extra_edges[:, 1]])
    cols = np.concatenate([corrupted.indices, extra_edges[:, 1],
                           extra_edges[:, 0]])
    adj = csr_from_coo((num_nodes, num_nodes), rows, cols,
                       np.ones(rows.shape[0]))
    return normalize_adjacency(adj, num_nodes)


def train(g: Graph, x: np.ndarray, labels: LabelSplit,
          cfg: TrainConfig) -> tuple[TrainState, list[MetricsRecord]]:
    """Run the full alternating loop; returns final state and metric stream."""
    if x.shape[0] != g.num_nodes:
        raise ContractError("feature row count does not match node count")
    if labels.labels.shape[0] != g.num_nodes:
        raise ContractError("label count does not match node count")
    if g.num_edges == 0:
        raise ContractError("training needs at least one edge")
    num_classes = labels.num_classes

    rng = np.random.default_rng(cfg.seed)
    sim = gaussian_similarity(x, g.edges, cfg.sigma_override)
    if cfg.p_pre > 0.0:
        pre_mask, train_g = pre_drop(g, sim, cfg.p_pre)
        keep = pre_mask.values.astype(bool)
        sim = EdgeSimilarity(values=sim.values[keep], sigma=sim.sigma)
        dropped_edges = g.edges[~keep]
        if train_g.num_edges == 0:
            raise ContractError("pre-dropping removed every edge")
    else:
        pre_mask = None
        train_g = g
        dropped_edges = np.empty((0, 2), dtype=np.int64)

    supervision = build_supervision(sim, cfg.mu)
    if supervision.degenerate:
        log.warning("no positive supervision edges; predictor and "
                    "perturbation updates are skipped every epoch")

    lg = build_line_graph(train_g)
    x_lg = init_features(train_g, x, num_classes, cfg.seed)
    a_lg_prop = normalize_adjacency(lg.adjacency, lg.num_nodes)
    full_prop = normalize_adjacency(g.adjacency, g.num_nodes)

    theta = init_gcn_params(x.shape[1], cfg.hidden, num_classes, rng,
                            prefix="theta")
    omega = init_edge_predictor(num_classes, cfg.hidden, rng)

    eta_eff = cfg.eta if cfg.adversarial else 1
    eps_eff = cfg.epsilon if cfg.adversarial else 0.0

    state = TrainState(theta=theta, omega=omega, delta=None, x_lg=x_lg,
                       train_graph=train_g, pre_mask=pre_mask,
                       sigma=sim.sigma)
    records: list[MetricsRecord] = []
    since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        delta_seed = int(rng.integers(0, 2**31 - 1))
        delta = init_perturbation((lg.num_nodes, 2), eps_eff, delta_seed)
        if dropped_edges.shape[0] and cfg.random_drop_rate > 0.0:
            keep_extra = rng.random(dropped_edges.shape[0]) \
                >= cfg.random_drop_rate
            extra_edges = dropped_edges[keep_extra]
        else:
            extra_edges = dropped_edges

        omega_params = omega.parameters()
        grad_sums = [np.zeros_like(p.values) for p in omega_params]
        for step in range(eta_eff):
            tape = ad.Tape()
            z_lg = predict_edges(tape, omega, state.x_lg.values, a_lg_prop,
                                 delta)
            mask = compute_mask(keep_probabilities(z_lg.values), cfg.mu)
            corrupted = corrupt_adjacency(train_g, mask, epoch=epoch,
                                          step=step)
            prop = _training_prop(corrupted.adjacency, extra_edges,
                                  g.num_nodes)
            gcn_forward(None, theta, x, prop)  # embeddings drive no update
            if not supervision.degenerate:
                loss_lg = line_graph_loss(tape, z_lg, supervision.values,
                                          supervision.kappa)
                ad.backward(tape, loss_lg)
                for acc_grad, p in zip(grad_sums, omega_params):
                    acc_grad += p.grad
                ad.zero_grads(omega_params)
                if cfg.adversarial:
                    delta = pgd_step(delta, delta.tensor.grad, cfg.gamma)

        # final mask and corrupted graph, after the last delta update
        z_final = predict_edges(None, omega, state.x_lg.values, a_lg_prop,
                                delta)
        mask = compute_mask(keep_probabilities(z_final.values), cfg.mu)
        corrupted = corrupt_adjacency(train_g, mask, epoch=epoch,
                                      step=eta_eff)
        prop = _training_prop(corrupted.adjacency, extra_edges, g.num_nodes)
        l_lg_value = None
        if not supervision.degenerate:
            l_lg_value = line_graph_loss(None, z_final, supervision.values,
                                         supervision.kappa).item()
            for p, gsum in zip(omega_params, grad_sums):
                p.grad = gsum / eta_eff
            ad.adam_step(omega_params, cfg.lr)

        tape = ad.Tape()
        logits_train = gcn_forward(tape, theta, x, prop)
        loss_ce = classification_loss(tape, logits_train, labels)
        ad.backward(tape, loss_ce)
        node_emb = logits_train.values.copy()
        ad.adam_step(theta.parameters(), cfg.lr)

        state.x_lg = update_features(state.x_lg, node_emb, cfg.alpha,
                                     train_g.edges, epoch)
        state.delta = delta
        state.epoch = epoch

        eval_logits = gcn_forward(None, theta, x, full_prop).values
        val_acc = accuracy(eval_logits, labels, "val")
        test_acc = accuracy(eval_logits, labels, "test")
        kept = mask.keep_count + int(extra_edges.shape[0])

        if val_acc > state.best_val_acc:
            state.best_val_acc = val_acc
            state.best_epoch = epoch
            state.best_mask = mask
            state.best_theta = theta.copy_values()
            state.best_omega = omega.copy_values()
            since_best = 0
        else:
            since_best += 1

        records.append(MetricsRecord(
            epoch=epoch, l_lg=l_lg_value, l_ce=loss_ce.item(),
            val_acc=val_acc, test_acc=test_acc, kept_edges=kept,
            wall_ms=(time.perf_counter() - t0) * 1000.0))

        if since_best >= cfg.patience:
            log.info("no validation improvement in %d epochs; stopping at "
                     "epoch %d", cfg.patience, epoch)
            break

    return state, records


def evaluate(state: TrainState, g: Graph, x: np.ndarray,
             labels: LabelSplit) -> tuple[float, float]:
    """Accuracy of the best checkpoint on the complete graph."""
    theta = state.theta
    if state.best_theta is not None:
        theta = _params_from_snapshot(state.best_theta, theta.hidden, "theta")
    prop = normalize_adjacency(g.adjacency, g.num_nodes)
    logits = gcn_forward(None, theta, x, prop).values
    return accuracy(logits, labels, "val"), accuracy(logits, labels, "test")


def export_learned_graph(state: TrainState, g: Graph, out) -> dict:
    """Write the best checkpoint's surviving edges; report the drop rate.

    The deleted percentage is relative to the edge count of ``g``, so any
    pre-dropped edges count as deleted.
    """
    if state.best_mask is None:
        raise ContractError("no best-checkpoint mask to export")
    survivors = state.train_graph.edges[state.best_mask.values.astype(bool)]
    save_edges(survivors, out)
    total = g.num_edges
    kept = int(survivors.shape[0])
    return {
        "total_edges": total,
        "kept_edges": kept,
        "deleted_edges": total - kept,
        "deleted_pct": 100.0 * (total - kept) / total,
    }


def _sig6(value: float) -> float:
    return float(f"{value:.6g}")


def write_metrics(records: list[MetricsRecord], out_dir) -> None:
    """Persist the metric stream as JSON Lines.

    metrics.jsonl holds the deterministic fields; wall-clock timings go to a
    timings.jsonl sidecar so reruns with one seed stay bit-identical.
    """
    out_dir = Path(out_dir)
    with open(out_dir / "metrics.jsonl", "w", encoding="utf-8") as handle:
        for r in records:
            row = {
                "epoch": r.epoch,
                "l_lg": None if r.l_lg is None else _sig6(r.l_lg),
                "l_ce": _sig6(r.l_ce),
                "val_acc": _sig6(r.val_acc),
                "test_acc": _sig6(r.test_acc),
                "kept_edges": r.kept_edges,
            }
            handle.write(json.dumps(row) + "\n")
    with open(out_dir / "timings.jsonl", "w", encoding="utf-8") as handle:
        for r in records:
            handle.write(json.dumps(
                {"epoch": r.epoch, "wall_ms": _sig6(r.wall_ms)}) + "\n")
