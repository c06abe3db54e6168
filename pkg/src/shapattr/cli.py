"""Command-line interface: ``shapattr {attribute,cohort,scenario,check,oracle}``.

Exit status is 0 on success, 1 when an expectation or axiom check fails and
2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .axioms import AXIOMS, METHODS, AxiomCheck, check_axiom
from .case_study import (
    COHORT_METHODS,
    DEFAULT_COHORT_SIZE,
    DEFAULT_SEED,
    FORMATS,
    RunConfig,
    attribute_cohort,
    emit_report,
    load_dataset,
    load_model,
    resolve_baseline,
)
from .core import Dataset, model_from_json
from .distributions import distribution_from_json, empirical
from .errors import AttributionError
from .methods import AttributionRequest
from .pms import Always, pms, predicate_from_json
from .scenarios import REGISTRY, load_golden, render_text, run_all, run_scenario

OUT_ENV = "SHAPATTR_OUT"
DEFAULT_OUT = "shapattr-report"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _vector(text: str, names: Sequence[str]) -> dict:
    """``"5,1"`` or a JSON object -> feature dict over ``names``."""
    text = text.strip()
    if text.startswith("{"):
        obj = json.loads(text)
        return {k: float(obj[k]) for k in names}
    vals = [float(v) for v in text.split(",")]
    if len(vals) != len(names):
        raise UsageError(f"expected {len(names)} values for {list(names)}, got {len(vals)}")
    return dict(zip(names, vals))


def _baseline(spec: str, names: Sequence[str], data: Dataset | None) -> dict:
    if spec == "zeros":
        return {k: 0.0 for k in names}
    if spec == "mean":
        if data is None:
            raise UsageError("--baseline mean needs --data")
        return {k: data.mean()[k] for k in names}
    return _vector(spec, names)


def _emit(obj, fmt: str, out: str | None) -> None:
    if fmt == "json":
        text = json.dumps(obj, indent=1) + "\n"
    else:
        text = obj if isinstance(obj, str) else _text(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _text(obj) -> str:
    scores = obj.get("scores", {})
    lines = [f"{k:20} {v: .12g}" for k, v in scores.items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_attribute(args) -> int:
    if not args.model:
        raise UsageError("attribute needs --model")
    model = load_model(args.model)
    data = load_dataset(args.data) if args.data else None
    names = list(data.features) if data is not None else list(model.features)
    if args.explicand is None:
        raise UsageError("attribute needs --explicand")
    x = _vector(args.explicand, names)
    baseline = _baseline(args.baseline, names, data) if args.baseline else None
    dist = distribution_from_json(_read_json(args.dist)) if args.dist else None
    if args.method == "pms":
        if baseline is None:
            raise UsageError("pms needs --baseline")
        poss = predicate_from_json(_read_json(args.possible)) if args.possible else Always()
        attr = pms(model, x, baseline, poss, n_perms=args.perms or 10_000, seed=args.seed)
    else:
        if args.method == "rbshap" and dist is None and data is not None:
            dist = empirical(data)
        try:
            req = AttributionRequest(
                model=model,
                explicand=x,
                method=args.method,
                baseline=baseline,
                distribution=dist,
                data=data,
                engine="sampled" if args.perms else "exact",
                n_perms=args.perms or 1000,
                seed=args.seed,
                steps=args.steps,
                gradient=args.gradient,
                smoothing=args.smoothing,
                m=args.m,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        attr = req.run()
    _emit(attr.to_json(), args.format, args.out)
    return EXIT_OK


def cmd_cohort(args) -> int:
    model = load_model(args.model)
    data = load_dataset(args.data)
    methods = [m.strip() for m in args.method.split(",") if m.strip()] if args.method else list(COHORT_METHODS[:4])
    explicands = [int(i) for i in args.explicands.split(",")] if args.explicands else None
    formats = [f.strip() for f in args.format.split(",")] if args.format else list(FORMATS)
    poss = predicate_from_json(_read_json(args.possible)) if args.possible else Always()
    try:
        config = RunConfig(
            model,
            data,
            methods=methods,
            explicands=explicands,
            count=args.count,
            seed=args.seed,
            baseline=resolve_baseline(args.baseline or "mean", data),
            steps=args.steps,
            noise=args.noise,
            possible=poss,
            formats=formats,
        )
        report = attribute_cohort(config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = args.out or os.environ.get(OUT_ENV, DEFAULT_OUT)
    try:
        paths = emit_report(report, out, formats)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for p in paths:
        print(p)
    for e in report.errors:
        print(f"error: {e['method']} on row {e['explicand']}: {e['error']}", file=sys.stderr)
    return EXIT_OK


def cmd_scenario(args) -> int:
    golden = load_golden(args.golden) if args.golden else load_golden()
    if args.name == "all":
        results = run_all(golden)
    else:
        results = [run_scenario(args.name, golden)]
    if args.format == "json":
        _emit([r.to_json() for r in results], "json", args.out)
    else:
        _emit(render_text(results) + "\n", "text", args.out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failing scenarios: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def load_instance(obj: dict, base: Path) -> dict:
    """Axiom-check instance from JSON: models, vectors and a reference."""
    inst = {k: v for k, v in obj.items() if k not in {"model", "models", "baseline", "distribution", "data"}}
    if "model" in obj:
        inst["model"] = model_from_json(obj["model"])
    if "models" in obj:
        inst["models"] = [model_from_json(m) for m in obj["models"]]
    refs = [k for k in ("baseline", "distribution", "data") if k in obj]
    if len(refs) != 1:
        raise UsageError("instance needs exactly one of baseline, distribution, data")
    if "baseline" in obj:
        inst["reference"] = {k: float(v) for k, v in obj["baseline"].items()}
    elif "distribution" in obj:
        inst["reference"] = distribution_from_json(obj["distribution"])
    else:
        path = Path(obj["data"])
        inst["reference"] = load_dataset(path if path.is_absolute() else base / path)
    if "possible" in inst.get("options", {}):
        inst["options"] = dict(inst["options"], possible=predicate_from_json(inst["options"]["possible"]))
    if "box" in inst:
        inst["box"] = tuple(inst["box"])
    return inst


def cmd_check(args) -> int:
    if not args.instance:
        raise UsageError("check needs --instance")
    inst = load_instance(_read_json(args.instance), Path(args.instance).parent)
    check = AxiomCheck(args.axiom, args.method, inst, args.tolerance)
    report = check_axiom(check)
    _emit(report.to_json(), "json", args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_oracle(args) -> int:
    from .oracle import regenerate, verify

    if not args.verify_only:
        regenerate(args.golden)
        print(f"regenerated derived entries in {args.golden or 'the bundled golden file'}")
    rows = verify()
    bad = [r for r in rows if not r[4]]
    for name, label, got, ref, _ in bad:
        print(f"mismatch {name}/{label}: engine {got!r}, brute force {ref!r}", file=sys.stderr)
    print(f"{len(rows) - len(bad)}/{len(rows)} derived values agree with the engine")
    return EXIT_FAIL if bad else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shapattr", description="Shapley-style feature attribution toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("attribute", help="attribute one explicand with one method")
    a.add_argument("--model", help="model JSON file")
    a.add_argument("--data", help="dataset CSV (ces_empirical, rbshap, --baseline mean)")
    a.add_argument("--dist", help="distribution JSON (ces, rbshap)")
    a.add_argument("--explicand", help="comma list in feature order, or a JSON object")
    a.add_argument("--baseline", help="zeros, mean, comma list or JSON object")
    a.add_argument("--method", required=True, choices=["bshap", "rbshap", "ces", "ces_empirical", "ig", "micro_shapley", "compositional_bshap", "pms"])
    a.add_argument("--smoothing", type=float, default=0.0, help="closeness as a fraction of each feature's std")
    a.add_argument("--steps", type=int, default=300, help="integrated-gradients midpoint steps")
    a.add_argument("--gradient", default="analytic", choices=["analytic", "central-difference"])
    a.add_argument("--m", type=int, default=1, help="micro-features per feature")
    a.add_argument("--perms", type=int, help="sample this many permutations instead of exact enumeration")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--possible", help="possibility predicate JSON (pms)")
    a.add_argument("--format", default="json", choices=["json", "text"])
    a.add_argument("--out", help="write to this file instead of stdout")
    a.set_defaults(run=cmd_attribute)

    c = sub.add_parser("cohort", help="attribute a cohort of explicands and write reports")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--method", help=f"comma list from {', '.join(COHORT_METHODS)} or ces_<tau>")
    c.add_argument("--explicands", help="comma list of row indices (default: a seeded sample)")
    c.add_argument("--count", type=int, default=DEFAULT_COHORT_SIZE)
    c.add_argument("--baseline", help="zeros, mean (default) or comma list")
    c.add_argument("--steps", type=int, default=300)
    c.add_argument("--noise", type=float, default=0.0, help="std of Gaussian noise added to explicands")
    c.add_argument("--seed", type=int, default=DEFAULT_SEED)
    c.add_argument("--possible", help="possibility predicate JSON (pms)")
    c.add_argument("--out", help=f"output directory (default ${OUT_ENV} or {DEFAULT_OUT})")
    c.add_argument("--format", help="comma list from csv,json,svg (default all)")
    c.set_defaults(run=cmd_cohort)

    s = sub.add_parser("scenario", help="run a registered scenario or all of them")
    s.add_argument("name", help=f"'all' or one of: {', '.join(REGISTRY)}")
    s.add_argument("--golden", help="golden file (default: bundled)")
    s.add_argument("--format", default="text", choices=["text", "json"])
    s.add_argument("--out")
    s.set_defaults(run=cmd_scenario)

    k = sub.add_parser("check", help="check one axiom for one method on a JSON instance")
    k.add_argument("axiom", choices=AXIOMS)
    k.add_argument("--method", required=True, choices=sorted(METHODS))
    k.add_argument("--instance", help="instance JSON file")
    k.add_argument("--tolerance", type=float)
    k.add_argument("--out")
    k.set_defaults(run=cmd_check)

    o = sub.add_parser("oracle", help="regenerate derived golden values by brute force")
    o.add_argument("--golden", help="golden file to rewrite (default: bundled)")
    o.add_argument("--verify-only", action="store_true", help="only compare the engine with the brute force")
    o.set_defaults(run=cmd_oracle)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.run(args)
    except UsageError as exc:
        print(f"shapattr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AttributionError, OSError, ValueError, KeyError) as exc:
        print(f"shapattr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
