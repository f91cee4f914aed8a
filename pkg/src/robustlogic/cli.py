"""Command-line entry point: train, verify, attack, eval, inspect, synth.

Every report is printed as one JSON object per line.
Exit codes: 0 ok/verified, 1 usage error, 2 refuted, 3 unknown, 4 training failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .booster import BoostConfig
from .cln import SmoothConfig
from .data import DataError, feature_std, load_csv, metrics, split, write_csv
from .fixer import FixerConfig, TrainingFailure, train_full
from .model import ModelError, load_model, load_schema, save_model
from .properties import PropertyError, SmallNeighborhood, bind_sigma, load_properties
from .synthetic import cryptojacking_like, monotone_2d
from .verifier import AttackSpec, collect_predicates, find_evasion, verify

EXIT_OK, EXIT_USAGE, EXIT_REFUTED, EXIT_UNKNOWN, EXIT_FAILURE = 0, 1, 2, 3, 4
TIMEOUT_ENV = "ROBUSTLOGIC_TIMEOUT"


class UsageError(Exception):
    pass


def _emit(rec: dict, stream=None) -> None:
    print(json.dumps(rec, sort_keys=False), file=stream or sys.stdout, flush=True)


def _default_timeout() -> float:
    raw = os.environ.get(TIMEOUT_ENV)
    if raw is None:
        return 30.0
    try:
        v = float(raw)
    except ValueError:
        raise UsageError(f"{TIMEOUT_ENV} must be a number, got {raw!r}") from None
    if v <= 0:
        raise UsageError(f"{TIMEOUT_ENV} must be > 0")
    return v


def _fractions(text: str):
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("split needs three comma-separated fractions")
    return parts


def _need_sigma(props, data_path, schema):
    if not any(isinstance(p, SmallNeighborhood) and p.sigma is None for p in props):
        return props
    if data_path is None:
        raise UsageError("small_neighborhood without sigma needs --data to compute feature scales")
    return bind_sigma(props, feature_std(load_csv(data_path, schema)))


# --------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    if args.rounds < 1:
        raise UsageError("--rounds must be >= 1")
    if args.max_depth < 0:
        raise UsageError("--max-depth must be >= 0")
    schema = load_schema(args.schema)
    data = load_csv(args.data, schema)
    if len(data) < 2:
        raise UsageError("training data needs at least two rows")
    train, test, val = split(data, args.split, args.seed)
    props = load_properties(args.properties, schema) if args.properties else []
    props = bind_sigma(props, feature_std(train))
    boost = BoostConfig(rounds=args.rounds, max_depth=args.max_depth, reg_lambda=args.reg_lambda,
                        min_split_gain=args.min_split_gain, malicious_weight=args.malicious_weight)
    smooth = SmoothConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                          malicious_weight=args.malicious_weight, seed=args.seed)
    fixer = FixerConfig(timeout_base=args.timeout, max_cegis_iters=args.max_iters,
                        property_boosting=args.property_boosting, backend=args.backend, smooth=smooth)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        def log(rec):
            _emit(rec, log_fh) if log_fh else (_emit(rec) if args.verbose else None)

        try:
            res = train_full(train.X, train.y, schema, props, boost, fixer,
                             X_val=val.X if len(val) else None, y_val=val.y if len(val) else None, log=log)
        except TrainingFailure as e:
            _emit({"event": "failure", "message": str(e), "diagnostics": e.diagnostics})
            return EXIT_FAILURE
    finally:
        if log_fh:
            log_fh.close()
    save_model(res.model, args.out)
    chosen = res.checkpoints[[c.round for c in res.checkpoints].index(res.chosen_round)]
    for v in chosen.verdicts:
        _emit({"event": "verdict", **v.to_dict(schema)})
    evals = {"train": train}
    if len(test):
        evals["test"] = test
    for name, part in evals.items():
        _emit({"event": "metrics", "split": name, **metrics(part.y, res.model.score_batch(part.X)).to_dict()})
    _emit({"event": "done", "model": args.out, "round": res.chosen_round, "clauses": len(res.model),
           "ledger": len(res.ledger), "seconds": round(res.seconds, 3)})
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_model(args.model)
    schema = load_schema(args.schema) if args.schema else model.schema
    props = _need_sigma(load_properties(args.properties, schema), args.data, schema)
    code = EXIT_OK
    for p in props:
        v = verify(model, schema, p, timeout=args.timeout, backend=args.backend)
        _emit(v.to_dict(schema))
        if v.refuted:
            code = EXIT_REFUTED
        elif v.status == "unknown" and code == EXIT_OK:
            code = EXIT_UNKNOWN
    return code


def _load_attack(path, schema) -> AttackSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        box = {}
        for name, bounds in doc.get("box", {}).items():
            lo, hi = bounds
            box[schema.index(name)] = (None if lo is None else float(lo), None if hi is None else float(hi))
        fix = tuple((schema.index(f), float(eta), bool(truth)) for f, eta, truth in doc.get("fix", []))
        return AttackSpec(box, fix, bool(doc.get("require_misclassified", True)))
    except (json.JSONDecodeError, TypeError, ValueError, AttributeError) as e:
        raise UsageError(f"{path}: malformed attack constraints ({e})") from None


def cmd_attack(args) -> int:
    model = load_model(args.model)
    schema = model.schema
    spec = _load_attack(args.constraints, schema)
    res = find_evasion(model, schema, spec, timeout=args.timeout, backend=args.backend)
    if res.status == "found":
        _emit({"result": "instance", "x": dict(zip(schema.names, map(float, res.x))), "score": res.score})
        return EXIT_OK
    if res.status == "none":
        _emit({"result": "none"})
        return EXIT_OK
    _emit({"result": "unknown", "reason": "timeout"})
    return EXIT_UNKNOWN


def cmd_eval(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, model.schema)
    if len(data) == 0:
        raise UsageError(f"{args.data}: no rows")
    _emit({"rows": len(data), **metrics(data.y, model.score_batch(data.X)).to_dict()})
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    table = collect_predicates(model)
    _emit({
        "features": model.schema.names,
        "clauses": len(model),
        "rounds": model.n_rounds,
        "predicates": {model.schema.names[j]: s for j, s in enumerate(table.slots)},
        "activation_range": [float(model.activations.min()), float(model.activations.max())] if len(model) else None,
    })
    if args.clauses:
        names = model.schema.names
        for k, c in enumerate(model.clauses):
            body = " and ".join(f"{a.coeff:g}*{names[a.feature]} < {a.threshold:g}" for a in c.atoms) or "true"
            _emit({"clause": k, "round": model.round_of(k), "body": body, "activation": c.activation})
    return EXIT_OK


def cmd_synth(args) -> int:
    data = monotone_2d(args.rows, seed=args.seed) if args.kind == "monotone2d" else cryptojacking_like(args.rows, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "data.csv")
    schema_path = os.path.join(args.out_dir, "schema.json")
    props_path = os.path.join(args.out_dir, "properties.json")
    write_csv(csv_path, data)
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(data.schema.to_dict(), fh, indent=1)
    if args.kind == "monotone2d":
        props = [{"type": "monotonicity", "features": ["x0"], "direction": "increasing"}]
    else:
        names = data.schema.names
        props = [
            {"type": "monotonicity", "features": names, "direction": "increasing"},
            {"type": "stability", "features": names, "c": 0.1},
            {"type": "high_confidence", "delta": 0.98},
            {"type": "small_neighborhood", "epsilon": 0.2, "c": 0.5},
        ]
    with open(props_path, "w", encoding="utf-8") as fh:
        json.dump(props, fh, indent=1)
    _emit({"data": csv_path, "schema": schema_path, "properties": props_path, "rows": len(data)})
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustlogic", description="Train and verify robust logic ensembles.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp):
        sp.add_argument("--timeout", type=float, default=None,
                        help=f"per-problem solver timeout in seconds (default 30 or ${TIMEOUT_ENV})")
        sp.add_argument("--backend", choices=("highs", "native"), default=None)

    t = sub.add_parser("train", help="boost and fix a model until the properties verify")
    t.add_argument("--data", required=True)
    t.add_argument("--schema", required=True)
    t.add_argument("--properties")
    t.add_argument("--out", required=True)
    t.add_argument("--rounds", type=int, default=4)
    t.add_argument("--max-depth", type=int, default=4)
    t.add_argument("--reg-lambda", type=float, default=1.0)
    t.add_argument("--min-split-gain", type=float, default=1e-6)
    t.add_argument("--malicious-weight", type=float, default=1.0)
    t.add_argument("--learning-rate", type=float, default=0.001)
    t.add_argument("--batch-size", type=int, default=1024)
    t.add_argument("--max-iters", type=int, default=100)
    t.add_argument("--property-boosting", action="store_true")
    t.add_argument("--split", type=_fractions, default=(0.7, 0.15, 0.15), help="train,test,validation fractions")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log", help="write the training log (JSON lines) to this file")
    t.add_argument("--verbose", action="store_true", help="print the training log to stdout")
    solver_opts(t)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify", help="check properties of a saved model")
    v.add_argument("--model", required=True)
    v.add_argument("--properties", required=True)
    v.add_argument("--schema")
    v.add_argument("--data", help="CSV used to compute sigma for small_neighborhood")
    solver_opts(v)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("attack", help="search for an evading instance")
    a.add_argument("--model", required=True)
    a.add_argument("--constraints", required=True)
    solver_opts(a)
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("eval", help="classification metrics on a CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("inspect", help="summarise a saved model")
    i.add_argument("--model", required=True)
    i.add_argument("--clauses", action="store_true")
    i.set_defaults(func=cmd_inspect)

    s = sub.add_parser("synth", help="write a synthetic dataset, schema and property file")
    s.add_argument("--kind", choices=("monotone2d", "cryptojacking"), default="monotone2d")
    s.add_argument("--rows", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        if getattr(args, "timeout", "absent") is None:
            args.timeout = _default_timeout()
        return args.func(args)
    except (UsageError, ModelError, PropertyError, DataError, OSError) as e:
        print(f"robustlogic: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
