"""Experiment harness: baselines, retrain-on-learned-graph comparisons,
attack evaluation, sweep execution, and report aggregation.

A "run directory" is a leaf folder holding config.echo, metrics.jsonl,
timings.jsonl, learned_edges.tsv, and summary.tsv. Sweeps and repeats nest
leaves one level deeper; ``report`` walks any such tree.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .backbone import accuracy, classification_loss, gcn_forward, \
    init_gcn_params
from .errors import ContractError
from .graphs import Graph, LabelSplit, graph_from_edges, load_graph, \
    normalize_adjacency
from .sparse import csr_from_coo
from .synthetic import attack_graph
from .trainer import MetricsRecord, TrainConfig, evaluate, \
    export_learned_graph, train, write_metrics

log = logging.getLogger(__name__)

DEFAULT_DROP_RATE = 0.5


def run_baseline(kind: str, g: Graph, x: np.ndarray, labels: LabelSplit,
                 cfg: TrainConfig,
                 drop_rate: float = DEFAULT_DROP_RATE) -> list[MetricsRecord]:
    """Plain GCN or per-epoch uniform edge dropping, evaluated on the full
    graph each epoch."""
    if kind == "plain":
        drop_rate = 0.0
    elif kind != "dropedge":
        raise ContractError(f"unknown baseline kind {kind!r}")
    if not 0.0 <= drop_rate < 1.0:
        raise ContractError(f"drop_rate must lie in [0, 1), got {drop_rate}")

    rng = np.random.default_rng(cfg.seed)
    theta = init_gcn_params(x.shape[1], cfg.hidden, labels.num_classes, rng,
                            prefix="theta")
    full_prop = normalize_adjacency(g.adjacency, g.num_nodes)

    records: list[MetricsRecord] = []
    best_val = float("-inf")
    since_best = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        if drop_rate > 0.0:
            kept = g.edges[rng.random(g.num_edges) >= drop_rate]
            rows = np.concatenate([kept[:, 0], kept[:, 1]])
            cols = np.concatenate([kept[:, 1], kept[:, 0]])
            adj = csr_from_coo((g.num_nodes, g.num_nodes), rows, cols,
                               np.ones(rows.shape[0]))
            prop = normalize_adjacency(adj, g.num_nodes)
            kept_count = int(kept.shape[0])
        else:
            prop, kept_count = full_prop, g.num_edges

        tape = ad.Tape()
        loss = classification_loss(tape, gcn_forward(tape, theta, x, prop),
                                   labels)
        ad.backward(tape, loss)
        ad.adam_step(theta.parameters(), cfg.lr)

        logits = gcn_forward(None, theta, x, full_prop).values
        val_acc = accuracy(logits, labels, "val")
        test_acc = accuracy(logits, labels, "test")
        records.append(MetricsRecord(
            epoch=epoch, l_lg=None, l_ce=loss.item(), val_acc=val_acc,
            test_acc=test_acc, kept_edges=kept_count,
            wall_ms=(time.perf_counter() - t0) * 1000.0))

        if val_acc > best_val:
            best_val, since_best = val_acc, 0
        else:
            since_best += 1
        if since_best >= cfg.patience:
            break
    return records


def best_epoch_stats(records: list[MetricsRecord]) -> MetricsRecord:
    """Record of the first epoch achieving the maximum validation accuracy."""
    if not records:
        raise ContractError("empty metrics stream")
    best = int(np.argmax([r.val_acc for r in records]))
    return records[best]


@dataclass(frozen=True)
class RetrainComparison:
    total_edges: int
    kept_edges: int
    deleted_pct: float
    learned_val_acc: float
    learned_test_acc: float
    random_val_acc: float | None
    random_test_acc: float | None


def retrain_on_learned_graph(learned_edges, g: Graph, x: np.ndarray,
                             labels: LabelSplit, cfg: TrainConfig,
                             random_matched: bool = True) -> RetrainComparison:
    """Train a fresh plain GCN on the exported graph, and optionally on a
    random graph with the identical surviving-edge count."""
    g_learned = load_graph(learned_edges, g.num_nodes)
    if g_learned.num_edges > g.num_edges:
        raise ContractError("learned graph has more edges than the original")
    stats_ad = best_epoch_stats(run_baseline("plain", g_learned, x, labels,
                                             cfg))

    rnd_val = rnd_test = None
    if random_matched:
        rng = np.random.default_rng(cfg.seed)
        pick = rng.choice(g.num_edges, size=g_learned.num_edges,
                          replace=False)
        g_random = graph_from_edges(g.num_nodes, g.edges[pick])
        if g_random.num_edges != g_learned.num_edges:
            raise ContractError("matched random graph edge count mismatch")
        stats_rd = best_epoch_stats(run_baseline("plain", g_random, x, labels,
                                                 cfg))
        rnd_val, rnd_test = stats_rd.val_acc, stats_rd.test_acc

    total, kept = g.num_edges, g_learned.num_edges
    return RetrainComparison(
        total_edges=total, kept_edges=kept,
        deleted_pct=100.0 * (total - kept) / total,
        learned_val_acc=stats_ad.val_acc, learned_test_acc=stats_ad.test_acc,
        random_val_acc=rnd_val, random_test_acc=rnd_test)


@dataclass(frozen=True)
class AttackComparison:
    kind: str
    rate: float
    method_clean: float
    method_attacked: float
    plain_clean: float
    plain_attacked: float


def attack_eval(g: Graph, x: np.ndarray, labels: LabelSplit,
                cfg: TrainConfig, kind: str, rate: float, out_dir=None,
                extras: dict | None = None) -> AttackComparison:
    """Test accuracy (at the best validation epoch) of the adversarial
    method and the plain baseline, on the clean and the attacked graph.

    With an ``out_dir`` the four arms are persisted as leaf run directories.
    """
    attacked = attack_graph(g, kind, rate, cfg.seed)
    if out_dir is None:
        state_clean, _ = train(g, x, labels, cfg)
        state_att, _ = train(attacked, x, labels, cfg)
        _, method_clean = evaluate(state_clean, g, x, labels)
        _, method_att = evaluate(state_att, attacked, x, labels)
        plain_clean = best_epoch_stats(
            run_baseline("plain", g, x, labels, cfg)).test_acc
        plain_att = best_epoch_stats(
            run_baseline("plain", attacked, x, labels, cfg)).test_acc
    else:
        out_dir = Path(out_dir)
        method_clean = execute_run(
            g, x, labels, cfg, out_dir / "method_clean", extras)["test_acc"]
        method_att = execute_run(
            attacked, x, labels, cfg, out_dir / "method_attacked",
            extras)["test_acc"]
        plain_clean = execute_baseline_run(
            "plain", g, x, labels, cfg, 0.0, out_dir / "plain_clean",
            extras)["test_acc"]
        plain_att = execute_baseline_run(
            "plain", attacked, x, labels, cfg, 0.0,
            out_dir / "plain_attacked", extras)["test_acc"]
    return AttackComparison(kind=kind, rate=rate, method_clean=method_clean,
                            method_attacked=method_att,
                            plain_clean=plain_clean,
                            plain_attacked=plain_att)


def _fmt_config_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_config_echo(cfg: TrainConfig, out_dir, extras: dict | None = None)\
        -> None:
    lines = [f"{f.name} = {_fmt_config_value(getattr(cfg, f.name))}"
             for f in dataclasses.fields(TrainConfig)]
    lines += [f"{k} = {_fmt_config_value(v)}" for k, v in
              (extras or {}).items()]
    (Path(out_dir) / "config.echo").write_text("\n".join(lines) + "\n",
                                               encoding="utf-8")


def _sig6(value: float) -> str:
    return f"{value:.6g}"


def _write_leaf_summary(summary: dict, out_dir: Path) -> None:
    with open(out_dir / "summary.tsv", "w", encoding="utf-8") as handle:
        for key, value in summary.items():
            text = _sig6(value) if isinstance(value, float) else str(value)
            handle.write(f"{key}\t{text}\n")


def execute_run(g: Graph, x: np.ndarray, labels: LabelSplit,
                cfg: TrainConfig, out_dir,
                extras: dict | None = None) -> dict:
    """One full training run persisted to a leaf run directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_echo(cfg, out_dir, extras)

    state, records = train(g, x, labels, cfg)
    write_metrics(records, out_dir)
    export = export_learned_graph(state, g, out_dir / "learned_edges.tsv")
    val_acc, test_acc = evaluate(state, g, x, labels)

    summary = {
        "best_epoch": state.best_epoch,
        "epochs_run": state.epoch,
        "best_val_acc": val_acc,
        "test_acc": test_acc,
        "kept_edges": export["kept_edges"],
        "total_edges": export["total_edges"],
        "deleted_pct": export["deleted_pct"],
        "sigma": state.sigma,
    }
    _write_leaf_summary(summary, out_dir)
    return summary


def execute_baseline_run(kind: str, g: Graph, x: np.ndarray,
                         labels: LabelSplit, cfg: TrainConfig,
                         drop_rate: float, out_dir,
                         extras: dict | None = None) -> dict:
    """One baseline run persisted to a leaf run directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo_extras = {"baseline_kind": kind, "baseline_drop_rate": drop_rate}
    echo_extras.update(extras or {})
    write_config_echo(cfg, out_dir, echo_extras)

    records = run_baseline(kind, g, x, labels, cfg, drop_rate)
    write_metrics(records, out_dir)
    best = best_epoch_stats(records)
    summary = {
        "best_epoch": best.epoch,
        "epochs_run": records[-1].epoch,
        "best_val_acc": best.val_acc,
        "test_acc": best.test_acc,
        "kept_edges": best.kept_edges,
        "total_edges": g.num_edges,
    }
    _write_leaf_summary(summary, out_dir)
    return summary


def sweep_mu(g: Graph, x: np.ndarray, labels: LabelSplit,
             base_cfg: TrainConfig, mu_values, repeats: int,
             out_dir) -> tuple[Path, Path]:
    """Grid over the keep threshold; one leaf per (mu, repeat)."""
    if repeats < 1:
        raise ContractError(f"repeats must be at least 1, got {repeats}")
    out_dir = Path(out_dir)
    for mu in mu_values:
        for r in range(repeats):
            cfg = dataclasses.replace(base_cfg, mu=float(mu),
                                      seed=base_cfg.seed + r)
            leaf = out_dir / f"mu_{mu:g}" / f"seed_{cfg.seed}"
            execute_run(g, x, labels, cfg, leaf)
    return report(out_dir)


def _read_config_value(path: Path, key: str):
    if not path.is_file():
        return None
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" not in line:
            continue
        k, _, v = line.partition("=")
        if k.strip() == key:
            v = v.strip()
            try:
                return float(v)
            except ValueError:
                return v
    return None


def _load_metric_rows(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def report(run_dir) -> tuple[Path, Path]:
    """Aggregate every metrics stream under a directory tree.

    Writes summary.tsv (per-group mean and std at the best validation epoch,
    keyed by sweep value when config.echo provides one) and curves.tsv
    (plot-ready epoch rows, one line per run and epoch).
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ContractError(f"{run_dir} is not a directory")
    metric_files = sorted(run_dir.rglob("metrics.jsonl"))
    if not metric_files:
        raise ContractError(f"no metrics.jsonl found under {run_dir}")

    groups: dict[str, list[Path]] = {}
    for mf in metric_files:
        leaf = mf.parent
        group = "." if leaf == run_dir \
            else str(leaf.parent.relative_to(run_dir)) or "."
        groups.setdefault(group, []).append(leaf)

    curve_path = run_dir / "curves.tsv"
    summary_path = run_dir / "summary.tsv"
    with open(curve_path, "w", encoding="utf-8") as curves, \
            open(summary_path, "w", encoding="utf-8") as summary:
        curves.write("group\trun\tepoch\tl_lg\tl_ce\tval_acc\ttest_acc"
                     "\tkept_edges\n")
        summary.write("group\trepeats\tsingle_repeat\tmu\tval_acc_mean"
                      "\tval_acc_std\ttest_acc_mean\ttest_acc_std"
                      "\tkept_edges_mean\n")
        for group in sorted(groups):
            leaves = sorted(groups[group])
            vals, tests, kepts = [], [], []
            mu_value = None
            for leaf in leaves:
                rows = _load_metric_rows(leaf / "metrics.jsonl")
                if not rows:
                    raise ContractError(f"empty metrics stream in {leaf}")
                best = int(np.argmax([r["val_acc"] for r in rows]))
                vals.append(rows[best]["val_acc"])
                tests.append(rows[best]["test_acc"])
                kepts.append(rows[best]["kept_edges"])
                if mu_value is None:
                    mu_value = _read_config_value(leaf / "config.echo", "mu")
                run_name = "." if leaf == run_dir \
                    else str(leaf.relative_to(run_dir))
                for r in rows:
                    l_lg = "" if r["l_lg"] is None else _sig6(r["l_lg"])
                    curves.write(
                        f"{group}\t{run_name}\t{r['epoch']}\t{l_lg}"
                        f"\t{_sig6(r['l_ce'])}\t{_sig6(r['val_acc'])}"
                        f"\t{_sig6(r['test_acc'])}\t{r['kept_edges']}\n")
            single = "yes" if len(leaves) == 1 else "no"
            mu_text = "" if mu_value is None else _sig6(float(mu_value))
            summary.write(
                f"{group}\t{len(leaves)}\t{single}\t{mu_text}"
                f"\t{_sig6(float(np.mean(vals)))}"
                f"\t{_sig6(float(np.std(vals)))}"
                f"\t{_sig6(float(np.mean(tests)))}"
                f"\t{_sig6(float(np.std(tests)))}"
                f"\t{_sig6(float(np.mean(kepts)))}\n")
    return summary_path, curve_path
