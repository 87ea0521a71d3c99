"""Command-line harness.

Commands: train, baseline, attack-eval, retrain, gen-sbm, report, sweep.
Configuration comes from an optional "key = value" file plus flags; flags
win. Exit codes: 0 success, 2 config or parse problem, 3 runtime contract
violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .experiments import attack_eval, execute_baseline_run, execute_run, \
    report, retrain_on_learned_graph, sweep_mu
from .graphs import load_features, load_graph, load_labels, load_splits, \
    save_edges
from .synthetic import SbmSpec, gen_sbm
from .trainer import TrainConfig

log = logging.getLogger(__name__)

ATTACK_RATE_LIMIT = 0.4


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _opt_float(text: str) -> float | None:
    if text.strip().lower() in ("none", "null", ""):
        return None
    return float(text)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


_TRAIN_COERCERS = {
    "mu": float, "alpha": float, "gamma": float, "eta": int,
    "epsilon": float, "lr": float, "epochs": int, "hidden": int,
    "seed": int, "p_pre": float, "sigma_override": _opt_float,
    "adversarial": _parse_bool, "random_drop_rate": float, "patience": int,
}

_SBM_COERCERS = {
    "block_sizes": _int_list, "intra_p": float, "inter_p": float,
    "noise_edges": int, "feature_dim": int, "mean_separation": float,
    "feature_std": float, "sbm_seed": int,
}


def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}", path=str(path)) \
            from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", path=str(path),
                             line=lineno)
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


_MISSING = object()


def _resolve(args, file_values: dict[str, str], key: str, coerce,
             default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_values:
        try:
            return coerce(file_values[key])
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ParseError(
                f"invalid value for {key}: {file_values[key]!r}") from exc
    return default


def build_train_config(args, file_values: dict[str, str]) -> TrainConfig:
    kwargs = {}
    for key, coerce in _TRAIN_COERCERS.items():
        value = _resolve(args, file_values, key, coerce, default=_MISSING)
        if value is not _MISSING:
            kwargs[key] = value
    try:
        return TrainConfig(**kwargs)
    except ContractError as exc:
        raise ParseError(f"invalid configuration: {exc}") from exc


def load_dataset(args, file_values):
    """File-backed dataset when --edges is given, synthetic otherwise."""
    edges = _resolve(args, file_values, "edges", str)
    if edges is not None:
        missing = [key for key in ("features", "labels", "splits",
                                   "num_nodes")
                   if _resolve(args, file_values, key,
                               int if key == "num_nodes" else str) is None]
        if missing:
            raise ParseError(
                "file-backed dataset needs " + ", ".join(missing))
        n = _resolve(args, file_values, "num_nodes", int)
        g = load_graph(edges, n)
        x = load_features(_resolve(args, file_values, "features", str), n)
        y = load_labels(_resolve(args, file_values, "labels", str), n)
        split = load_splits(_resolve(args, file_values, "splits", str), n, y)
        return g, x, split, f"files:{edges}"

    kwargs = {}
    for key, coerce in _SBM_COERCERS.items():
        value = _resolve(args, file_values, key, coerce)
        if value is not None:
            kwargs["seed" if key == "sbm_seed" else key] = value
    try:
        spec = SbmSpec(**kwargs)
    except ContractError as exc:
        raise ParseError(f"invalid synthetic spec: {exc}") from exc
    g, x, split, _ = gen_sbm(spec)
    blocks = "+".join(str(b) for b in spec.block_sizes)
    return g, x, split, (f"sbm:blocks={blocks},intra={spec.intra_p:g},"
                         f"inter={spec.inter_p:g},noise={spec.noise_edges},"
                         f"seed={spec.seed}")


def _require_out(args, file_values) -> Path:
    out = _resolve(args, file_values, "out", str)
    if out is None:
        raise ParseError("an output directory is required (--out)")
    return Path(out)


def _resolve_repeats(args, file_values, default: int = 1) -> int:
    repeats = _resolve(args, file_values, "repeats", int, default)
    if repeats < 1:
        raise ParseError(f"repeats must be at least 1, got {repeats}")
    return repeats


def _sig6(value: float) -> str:
    return f"{value:.6g}"


def cmd_train(args) -> int:
    fv = read_config_file(args.config) if args.config else {}
    cfg = build_train_config(args, fv)
    g, x, labels, dataset = load_dataset(args, fv)
    out = _require_out(args, fv)
    repeats = _resolve_repeats(args, fv)
    extras = {"command": "train", "dataset": dataset}
    if repeats == 1:
        summary = execute_run(g, x, labels, cfg, out, extras)
        print(f"best_val_acc={_sig6(summary['best_val_acc'])} "
              f"test_acc={_sig6(summary['test_acc'])} "
              f"kept_edges={summary['kept_edges']}/{summary['total_edges']}")
    else:
        for r in range(repeats):
            cfg_r = dataclasses.replace(cfg, seed=cfg.seed + r)
            execute_run(g, x, labels, cfg_r, out / f"seed_{cfg_r.seed}",
                        extras)
        summary_path, _ = report(out)
        print(f"wrote {summary_path}")
    return 0


def cmd_baseline(args) -> int:
    fv = read_config_file(args.config) if args.config else {}
    cfg = build_train_config(args, fv)
    kind = _resolve(args, fv, "kind", str)
    if kind not in ("plain", "dropedge"):
        raise ParseError(f"baseline kind must be plain or dropedge, "
                         f"got {kind!r}")
    drop_rate = _resolve(args, fv, "drop_rate", float, 0.5)
    g, x, labels, dataset = load_dataset(args, fv)
    out = _require_out(args, fv)
    repeats = _resolve_repeats(args, fv)
    extras = {"command": "baseline", "dataset": dataset}
    if repeats == 1:
        summary = execute_baseline_run(kind, g, x, labels, cfg, drop_rate,
                                       out, extras)
        print(f"best_val_acc={_sig6(summary['best_val_acc'])} "
              f"test_acc={_sig6(summary['test_acc'])}")
    else:
        for r in range(repeats):
            cfg_r = dataclasses.replace(cfg, seed=cfg.seed + r)
            execute_baseline_run(kind, g, x, labels, cfg_r, drop_rate,
                                 out / f"seed_{cfg_r.seed}", extras)
        summary_path, _ = report(out)
        print(f"wrote {summary_path}")
    return 0


def cmd_attack_eval(args) -> int:
    fv = read_config_file(args.config) if args.config else {}
    cfg = build_train_config(args, fv)
    kind = _resolve(args, fv, "attack", str)
    if kind not in ("add", "remove"):
        raise ParseError(f"attack must be add or remove, got {kind!r}")
    rate = _resolve(args, fv, "rate", float)
    if rate is None or not 0.0 <= rate <= ATTACK_RATE_LIMIT:
        raise ParseError(
            f"attack rate must lie in [0, {ATTACK_RATE_LIMIT}], got {rate}")
    g, x, labels, dataset = load_dataset(args, fv)
    out = _require_out(args, fv)
    repeats = _resolve_repeats(args, fv, default=5)
    extras = {"command": "attack-eval", "dataset": dataset,
              "attack": kind, "rate": rate}

    rows = []
    for r in range(repeats):
        cfg_r = dataclasses.replace(cfg, seed=cfg.seed + r)
        comp = attack_eval(g, x, labels, cfg_r, kind, rate,
                           out_dir=out / f"seed_{cfg_r.seed}", extras=extras)
        rows.append((cfg_r.seed, comp))

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.tsv", "w", encoding="utf-8") as handle:
        handle.write("seed\tmethod_clean\tmethod_attacked\tmethod_drop"
                     "\tplain_clean\tplain_attacked\tplain_drop\n")
        for seed, c in rows:
            handle.write(
                f"{seed}\t{_sig6(c.method_clean)}\t{_sig6(c.method_attacked)}"
                f"\t{_sig6(c.method_clean - c.method_attacked)}"
                f"\t{_sig6(c.plain_clean)}\t{_sig6(c.plain_attacked)}"
                f"\t{_sig6(c.plain_clean - c.plain_attacked)}\n")
        m_drop = float(np.mean([c.method_clean - c.method_attacked
                                for _, c in rows]))
        p_drop = float(np.mean([c.plain_clean - c.plain_attacked
                                for _, c in rows]))
        handle.write(f"mean\t\t\t{_sig6(m_drop)}\t\t\t{_sig6(p_drop)}\n")
    print(f"mean_drop method={_sig6(m_drop)} plain={_sig6(p_drop)}")
    return 0


def cmd_retrain(args) -> int:
    fv = read_config_file(args.config) if args.config else {}
    cfg = build_train_config(args, fv)
    learned = _resolve(args, fv, "learned_edges", str)
    if learned is None:
        raise ParseError("--learned-edges is required")
    matched = _resolve(args, fv, "matched", _parse_bool, True)
    g, x, labels, dataset = load_dataset(args, fv)
    out = _require_out(args, fv)
    out.mkdir(parents=True, exist_ok=True)

    comp = retrain_on_learned_graph(learned, g, x, labels, cfg,
                                    random_matched=matched)
    with open(out / "summary.tsv", "w", encoding="utf-8") as handle:
        handle.write(f"total_edges\t{comp.total_edges}\n")
        handle.write(f"kept_edges\t{comp.kept_edges}\n")
        handle.write(f"deleted_pct\t{_sig6(comp.deleted_pct)}\n")
        handle.write(f"learned_val_acc\t{_sig6(comp.learned_val_acc)}\n")
        handle.write(f"learned_test_acc\t{_sig6(comp.learned_test_acc)}\n")
        if comp.random_test_acc is not None:
            handle.write(f"random_val_acc\t{_sig6(comp.random_val_acc)}\n")
            handle.write(f"random_test_acc\t{_sig6(comp.random_test_acc)}\n")
    random_text = "" if comp.random_test_acc is None else \
        f" random_test_acc={_sig6(comp.random_test_acc)}"
    print(f"learned_test_acc={_sig6(comp.learned_test_acc)}{random_text}")
    return 0


def cmd_gen_sbm(args) -> int:
    fv = read_config_file(args.config) if args.config else {}
    kwargs = {}
    for key, coerce in _SBM_COERCERS.items():
        value = _resolve(args, fv, key, coerce)
        if value is not None:
            kwargs["seed" if key == "sbm_seed" else key] = value
    try:
        spec = SbmSpec(**kwargs)
    except ContractError as exc:
        raise ParseError(f"invalid synthetic spec: {exc}") from exc
    out = _require_out(args, fv)
    out.mkdir(parents=True, exist_ok=True)

    g, x, split, noise = gen_sbm(spec)
    save_edges(g.edges, out / "edges.tsv")
    save_edges(noise, out / "noise_edges.tsv")
    with open(out / "features.tsv", "w", encoding="utf-8") as handle:
        for i in range(g.num_nodes):
            row = "\t".join(f"{v:.17g}" for v in x[i])
            handle.write(f"{i}\t{row}\n")
    with open(out / "labels.tsv", "w", encoding="utf-8") as handle:
        for i in range(g.num_nodes):
            handle.write(f"{i}\t{split.labels[i]}\n")
    with open(out / "splits.tsv", "w", encoding="utf-8") as handle:
        for name in ("train", "val", "test"):
            for i in np.nonzero(split.mask(name))[0]:
                handle.write(f"{i}\t{name}\n")
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges "
          f"({noise.shape[0]} noise) to {out}")
    return 0


def cmd_report(args) -> int:
    summary_path, curve_path = report(args.run_dir)
    print(f"wrote {summary_path} and {curve_path}")
    return 0


def cmd_sweep(args) -> int:
    fv = read_config_file(args.config) if args.config else {}
    cfg = build_train_config(args, fv)
    mu_values = _resolve(args, fv, "mu_values", _float_list,
                         (0.5, 0.6, 0.7, 0.8, 0.9, 1.0))
    g, x, labels, _ = load_dataset(args, fv)
    out = _require_out(args, fv)
    repeats = _resolve_repeats(args, fv)
    summary_path, _ = sweep_mu(g, x, labels, cfg, mu_values, repeats, out)
    print(f"wrote {summary_path}")
    return 0


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training configuration")
    group.add_argument("--config", help="key = value configuration file")
    group.add_argument("--mu", type=float)
    group.add_argument("--alpha", type=float)
    group.add_argument("--gamma", type=float)
    group.add_argument("--eta", type=int)
    group.add_argument("--epsilon", type=float)
    group.add_argument("--lr", type=float)
    group.add_argument("--epochs", type=int)
    group.add_argument("--hidden", type=int)
    group.add_argument("--seed", type=int)
    group.add_argument("--p-pre", type=float)
    group.add_argument("--sigma-override", type=_opt_float)
    group.add_argument("--adversarial", type=_parse_bool,
                       metavar="{true,false}")
    group.add_argument("--random-drop-rate", type=float)
    group.add_argument("--patience", type=int)


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("dataset (files or synthetic)")
    group.add_argument("--edges", help="edges.tsv path; enables file mode")
    group.add_argument("--features")
    group.add_argument("--labels")
    group.add_argument("--splits")
    group.add_argument("--num-nodes", type=int)
    group.add_argument("--block-sizes", type=_int_list,
                       metavar="N1,N2,...")
    group.add_argument("--intra-p", type=float)
    group.add_argument("--inter-p", type=float)
    group.add_argument("--noise-edges", type=int)
    group.add_argument("--feature-dim", type=int)
    group.add_argument("--mean-separation", type=float)
    group.add_argument("--feature-std", type=float)
    group.add_argument("--sbm-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adedgedrop",
        description="Adversarial edge dropping for graph neural networks")
    parser.add_argument("--verbose", action="store_true",
                        help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the adversarial training loop")
    _add_train_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--out")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("baseline", help="plain GCN or uniform edge dropping")
    _add_train_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--kind", choices=("plain", "dropedge"))
    p.add_argument("--drop-rate", type=float)
    p.add_argument("--out")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("attack-eval",
                       help="accuracy drop under random structural attacks")
    _add_train_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--attack", choices=("add", "remove"))
    p.add_argument("--rate", type=float)
    p.add_argument("--out")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_attack_eval)

    p = sub.add_parser("retrain",
                       help="fresh GCN on an exported learned graph")
    _add_train_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--learned-edges")
    p.add_argument("--matched", type=_parse_bool, metavar="{true,false}")
    p.add_argument("--out")
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("gen-sbm", help="generate a synthetic dataset")
    p.add_argument("--config", help="key = value configuration file")
    _add_dataset_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("report", help="aggregate runs into summary tables")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="grid over the keep threshold")
    _add_train_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--mu-values", type=_float_list, metavar="V1,V2,...")
    p.add_argument("--out")
    p.add_argument("--repeats", type=int)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
