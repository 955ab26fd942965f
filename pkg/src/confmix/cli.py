"""Command-line entry point for reproducible runs.

Commands: gen, train, infer, verify, cost. Every command takes
--config PATH (a JSON object of defaults), with explicit flags winning
over config values. Exit codes: 0 success, 1 verification failure,
2 usage or config error, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .confidence import (CappedLinearGate, ConfidenceSpec, LearnableGate,
                         StepGate, TwoLevelGate, confidence_batch, default_spec,
                         quasiconvexity_witness_search, spec_from_document,
                         spec_to_document)
from .errors import (ConfigError, DomainError, GraphFormatError,
                     GraphValidationError, ShapeError, TrainingDivergedError)
from .experts import ExpertArch, load_expert, save_expert, forward
from .graphs import (build_blindspot_graph, cost_estimate,
                     generate_specialization_graph, graph_from_document,
                     graph_to_document, khop_sizes, load_graph, save_graph,
                     BlindspotInstance, validate_blindspot, conv_coefficients)
from .mixture import infer_expected, infer_stochastic, write_predictions_csv
from .theory import (ClauseResult, SimplexGrid, SuiteReport, delta,
                     run_theorem_suite, sample_tightness_problems,
                     verify_binary_corollary, verify_blindspot,
                     verify_step_tightness, verify_tightness)
from .training import TrainConfig, train

SUITES = ("all", "theorem", "tightness", "binary", "quasiconvexity",
          "blindspot", "planted_fault")


def _merge(args: argparse.Namespace, config: dict, key: str, default=None):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _load_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def _require_seed(parser, args, config) -> int:
    seed = _merge(args, config, "seed")
    if seed is None:
        parser.error("--seed is required (flag or config)")
    return int(seed)


def _outdir(args, config) -> str:
    out = _merge(args, config, "out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen(parser, args):
    config = _load_config(args.config)
    seed = _require_seed(parser, args, config)
    out = _outdir(args, config)
    kind = _merge(args, config, "kind", "specialization")
    path = os.path.join(out, _merge(args, config, "name", f"{kind}.json"))
    if kind == "specialization":
        graph = generate_specialization_graph(
            int(_merge(args, config, "n-per-group", 100)),
            int(_merge(args, config, "features", 8)),
            float(_merge(args, config, "noise", 0.1)),
            seed)
        save_graph(graph, path)
    elif kind == "blindspot":
        instance = build_blindspot_graph(
            int(_merge(args, config, "k", 1)),
            int(_merge(args, config, "features", 6)),
            seed)
        doc = {"u": instance.u, "v": instance.v, "k": instance.k,
               "node_map": {str(a): b for a, b in instance.node_map.items()},
               "graph": graph_to_document(instance.graph)}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
            fh.write("\n")
    else:
        parser.error(f"unknown generator kind {kind!r}")
    print(path)
    return 0


def load_blindspot(path) -> BlindspotInstance:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    instance = BlindspotInstance(
        graph_from_document(doc["graph"]), int(doc["u"]), int(doc["v"]),
        int(doc["k"]), {int(a): int(b) for a, b in doc["node_map"].items()})
    validate_blindspot(instance)
    return instance


def _train_config_from(args, config, seed) -> TrainConfig:
    spec_doc = _merge(args, config, "confidence")
    spec = spec_from_document(spec_doc) if spec_doc else default_spec()
    weak_doc = config.get("weak_arch", {})
    strong_doc = config.get("strong_arch", {})
    return TrainConfig(
        mode=_merge(args, config, "mode", "in_turn"),
        rounds=int(_merge(args, config, "rounds", 5)),
        max_epochs=int(_merge(args, config, "max-epochs", 500)),
        lr=float(_merge(args, config, "lr", 0.5)),
        patience=int(_merge(args, config, "patience", 20)),
        seed=seed,
        pretrain=_merge(args, config, "pretrain", "weak"),
        pretrain_epochs=int(_merge(args, config, "pretrain-epochs", 100)),
        weak_arch=ExpertArch("weak", int(weak_doc.get("layers", 1)),
                             int(weak_doc.get("hidden", 32))),
        strong_arch=ExpertArch(strong_doc.get("kind", "gcn"),
                               int(strong_doc.get("layers", 2)),
                               int(strong_doc.get("hidden", 32))),
        spec=spec,
        gate_seed=int(_merge(args, config, "gate-seed", 1)),
    )


def cmd_train(parser, args):
    config = _load_config(args.config)
    seed = _require_seed(parser, args, config)
    out = _outdir(args, config)
    data = _merge(args, config, "data")
    if data is None:
        parser.error("--data is required (flag or config)")
    graph = load_graph(data)
    train_config = _train_config_from(args, config, seed)
    result = train(train_config, graph)
    save_expert(result.weak, os.path.join(out, "weak.json"))
    save_expert(result.strong, os.path.join(out, "strong.json"))
    with open(os.path.join(out, "confidence.json"), "w", encoding="utf-8") as fh:
        json.dump(spec_to_document(result.spec), fh, separators=(",", ":"))
        fh.write("\n")
    result.report.write_csvs(out)
    return 0


def cmd_infer(parser, args):
    config = _load_config(args.config)
    seed = _require_seed(parser, args, config)
    out = _outdir(args, config)
    data = _merge(args, config, "data")
    weak_path = _merge(args, config, "weak")
    strong_path = _merge(args, config, "strong")
    if data is None or weak_path is None or strong_path is None:
        parser.error("--data, --weak and --strong are required")
    graph = load_graph(data)
    weak = load_expert(weak_path)
    strong = load_expert(strong_path)
    spec_path = _merge(args, config, "spec")
    if spec_path:
        with open(spec_path, encoding="utf-8") as fh:
            spec = spec_from_document(json.load(fh))
    else:
        spec = default_spec()
    pw = forward(weak, graph).values
    ps = forward(strong, graph, coefficients=conv_coefficients(graph)).values
    conf = confidence_batch(pw, spec)
    pred_sto, weak_fired = infer_stochastic(pw, ps, conf, seed)
    _, pred_exp = infer_expected(pw, ps, conf)
    nodes = np.arange(graph.num_nodes)
    experts = ["weak" if w else "strong" for w in weak_fired]
    path = os.path.join(out, "predictions.csv")
    write_predictions_csv(
        path,
        np.concatenate([nodes, nodes]),
        experts + ["expected"] * graph.num_nodes,
        np.concatenate([conf, conf]),
        np.concatenate([pred_sto, pred_exp]),
        np.concatenate([graph.labels, graph.labels]),
    )
    print(path)
    return 0


def _quasiconvexity_rows(seed: int, trials: int, corrupt: bool) -> SuiteReport:
    suite = SuiteReport()
    specs = [
        ("variance+step0", ConfidenceSpec("variance", StepGate(0.0))),
        ("neg_entropy+step0", ConfidenceSpec("neg_entropy", StepGate(0.0))),
        ("variance+two_level", ConfidenceSpec("variance", TwoLevelGate(0.1, 0.4))),
        ("neg_entropy+two_level", ConfidenceSpec("neg_entropy", TwoLevelGate(0.2, 0.3))),
        ("variance+capped", ConfidenceSpec("variance", CappedLinearGate(2.0))),
        ("neg_entropy+capped", ConfidenceSpec("neg_entropy", CappedLinearGate(1.0))),
    ]
    if corrupt:
        gate = LearnableGate.create(seed=seed, hidden=4)
        # planted bump: confidence rises with dispersion then falls,
        # a deliberate quasiconvexity violation
        gate.weights[0][0].values = np.array([[1.0, 1.0, 0.0, 0.0],
                                              [0.0, 0.0, 0.0, 0.0]])
        gate.weights[0][1].values = np.array([-0.05, -0.15, 0.0, 0.0])
        gate.weights[1][0].values = np.array([[20.0, 0.0], [-40.0, 0.0],
                                              [0.0, 0.0], [0.0, 0.0]])
        gate.weights[1][1].values = np.zeros(2)
        specs = [("corrupted+learnable", ConfidenceSpec("variance", gate))]
    for n in (2, 3):
        for label, spec in specs:
            margin = quasiconvexity_witness_search(spec, trials, seed, n=n)
            suite.add_clause(label, ClauseResult(
                f"quasiconvex_margin_n{n}", margin, 1e-12, margin <= 1e-12))
    return suite


def _tightness_rows(seed: int) -> SuiteReport:
    suite = SuiteReport()
    rng = np.random.default_rng(seed)
    grid = SimplexGrid.build(2, 2000)
    for i in range(50):
        a1 = float(rng.uniform(0.55, 0.95))
        alpha = np.array([a1, 1.0 - a1])
        mu = delta(alpha) + float(rng.uniform(0.08, 1.0))
        kind = ("variance", "neg_entropy")[i % 2]
        suite.add_clause(f"step_tightness[{i}]",
                         verify_step_tightness(alpha, mu, grid, kind))
    grid5 = SimplexGrid.build(2, 5000)
    eta = 0.05
    problems = sample_tightness_problems(20, seed + 1, m=5000, eta=eta)
    for i, (alpha, mu, kind) in enumerate(problems):
        beta = 0.5 * eta / (mu - delta(alpha))
        report = verify_tightness(alpha, mu, eta, beta, grid5, kind)
        lo_slack = (report.mu - report.eta) - report.minimizer_loss
        suite.add_clause(f"window_tightness[{i}]", ClauseResult(
            "minimizer_in_loss_window", max(lo_slack, 0.0),
            report.window_tolerance, report.in_window))
    return suite


def _binary_rows(seed: int) -> SuiteReport:
    suite = SuiteReport()
    rng = np.random.default_rng(seed)
    grid = SimplexGrid.build(2, 2000)
    for i in range(50):
        k = int(round(rng.uniform(0.55, 0.95) * grid.m))
        a1 = k / grid.m
        mu = delta(np.array([a1, 1.0 - a1])) + float(rng.uniform(0.08, 1.0))
        kind = ("variance", "neg_entropy")[i % 2]
        spec = ConfidenceSpec(kind, CappedLinearGate(1.5 if kind == "variance" else 1.0))
        for clause in verify_binary_corollary(a1, mu, grid, spec):
            suite.add_clause(f"binary_corollary[{i}]", clause)
    return suite


def _blindspot_rows(seed: int) -> SuiteReport:
    suite = SuiteReport()
    for k in (1, 2):
        instance = build_blindspot_graph(k, 6, seed + k)
        report = verify_blindspot(instance, 50, seed + 10 + k)
        suite.add_clause(f"blindspot_k{k}", ClauseResult(
            "conv_output_gap", report.max_output_gap, 1e-9,
            report.max_output_gap < 1e-9))
        suite.add_clause(f"blindspot_k{k}", ClauseResult(
            "mixture_distinguishes_roots", float(not report.distinguishes_roots),
            0.0, report.distinguishes_roots))
        suite.add_clause(f"blindspot_k{k}", ClauseResult(
            "mixture_matches_strong_elsewhere",
            float(not report.matches_strong_elsewhere), 0.0,
            report.matches_strong_elsewhere))
    return suite


def cmd_verify(parser, args):
    config = _load_config(args.config)
    seed = _require_seed(parser, args, config)
    out = _outdir(args, config)
    suite_name = _merge(args, config, "suite", "all")
    if suite_name not in SUITES:
        parser.error(f"--suite must be one of {SUITES}")
    suite = SuiteReport()
    if suite_name in ("all", "theorem"):
        part = run_theorem_suite(
            int(_merge(args, config, "binary-count", 200)),
            int(_merge(args, config, "ternary-count", 20)),
            seed)
        suite.rows += part.rows
    if suite_name in ("all", "tightness"):
        suite.rows += _tightness_rows(seed + 101).rows
    if suite_name in ("all", "binary"):
        suite.rows += _binary_rows(seed + 202).rows
    if suite_name in ("all", "quasiconvexity"):
        suite.rows += _quasiconvexity_rows(seed + 303, 10_000, corrupt=False).rows
    if suite_name == "planted_fault":
        suite.rows += _quasiconvexity_rows(seed + 303, 10_000, corrupt=True).rows
    if suite_name in ("all", "blindspot"):
        suite.rows += _blindspot_rows(seed + 404).rows
    path = os.path.join(out, "theorem_report.csv")
    suite.write_csv(path)
    failed = [row for row in suite.rows if not row[-1]]
    print(f"{path}: {len(suite.rows)} clauses, {len(failed)} failed")
    return 1 if failed else 0


def cmd_cost(parser, args):
    config = _load_config(args.config)
    data = _merge(args, config, "data")
    if data is None:
        parser.error("--data is required (flag or config)")
    graph = load_graph(data)
    f = int(_merge(args, config, "features", graph.num_features))
    layers = int(_merge(args, config, "layers", 2))
    sizes = khop_sizes(graph, layers)
    header = ["architecture", "macs"] + [f"b_{i}" for i in range(layers)]
    print(",".join(header))
    for arch in ("weak", "gcn", "gcn_skip"):
        macs = cost_estimate(graph, f, layers, arch)
        row = [arch, f"{macs:.12g}"] + [f"{b:.12g}" for b in sizes]
        print(",".join(row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confmix",
        description="confidence-gated weak/strong expert mixtures on graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config with per-command defaults")
        p.add_argument("--seed", type=int, help="run seed (required)")
        p.add_argument("--out", help="output directory (default .)")

    p = sub.add_parser("gen", help="generate a synthetic graph document")
    common(p)
    p.add_argument("--kind", choices=("specialization", "blindspot"))
    p.add_argument("--name", help="output file name")
    p.add_argument("--n-per-group", type=int)
    p.add_argument("--features", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--k", type=int, help="blindspot hop radius")

    p = sub.add_parser("train", help="train a mixture on a graph document")
    common(p)
    p.add_argument("--data", help="graph document path")
    p.add_argument("--mode", choices=("in_turn", "joint", "blend"))
    p.add_argument("--rounds", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--pretrain", choices=("none", "weak", "strong", "both"))
    p.add_argument("--pretrain-epochs", type=int)
    p.add_argument("--gate-seed", type=int)

    p = sub.add_parser("infer", help="run both inference modes from checkpoints")
    common(p)
    p.add_argument("--data")
    p.add_argument("--weak", help="weak expert checkpoint")
    p.add_argument("--strong", help="strong expert checkpoint")
    p.add_argument("--spec", help="confidence spec JSON")

    p = sub.add_parser("verify", help="run the theory verification suites")
    common(p)
    p.add_argument("--suite", choices=SUITES)
    p.add_argument("--binary-count", type=int)
    p.add_argument("--ternary-count", type=int)

    p = sub.add_parser("cost", help="inference cost table for a graph")
    common(p)
    p.add_argument("--data")
    p.add_argument("--features", type=int)
    p.add_argument("--layers", type=int)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"gen": cmd_gen, "train": cmd_train, "infer": cmd_infer,
                "verify": cmd_verify, "cost": cmd_cost}
    try:
        return handlers[args.command](parser, args)
    except TrainingDivergedError as e:
        print(f"training failed: {e}", file=sys.stderr)
        return 3
    except (ConfigError, DomainError, ShapeError, GraphFormatError,
            GraphValidationError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
