"""Command-line front end.

Exit codes: 0 ok, 1 I/O failure (demo), 2 bad arguments, 3 data errors,
4 model errors, 5 explanation failures. Failures print one JSON object
``{"error": <code>, "message": <text>}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import comte, leftist, nuncf, tsr, viz
from .core import (
    Attribution,
    BadParams,
    DataError,
    LabeledDataset,
    ModelError,
    TsxError,
    load_dataset,
    make_synthetic,
    save_dataset,
    train_test_split,
    znormalize,
)
from .models import LinearSoftmaxModel, knn_fit, linear_fit, stdio_model

EXIT_IO, EXIT_ARGS, EXIT_DATA, EXIT_MODEL, EXIT_EXPLAIN = 1, 2, 3, 4, 5
STOCHASTIC = ("comte", "leftist")


class UsageError(TsxError):
    pass


class IndexOutOfRange(DataError):
    pass


def _fail(code: int, err: Exception) -> int:
    name = err.code if isinstance(err, TsxError) else type(err).__name__
    print(json.dumps({"error": name, "message": str(err)}), file=sys.stderr)
    return code


def _exit_code(err: TsxError) -> int:
    if isinstance(err, (UsageError, BadParams)):
        return EXIT_ARGS
    if isinstance(err, DataError):
        return EXIT_DATA
    if isinstance(err, ModelError):
        return EXIT_MODEL
    return EXIT_EXPLAIN


# --------------------------------------------------------------------------
# model specs


def parse_model_spec(spec: str) -> tuple:
    """``knn:k=1`` -> ``("knn", {"k": "1"})``.

    ``stdio`` takes a single ``cmd=`` option whose value is the rest of the
    spec (optionally quoted), so commands may contain commas.
    """
    kind, _, rest = spec.partition(":")
    if kind == "stdio":
        if not rest.startswith("cmd="):
            raise UsageError("stdio model spec must look like stdio:cmd=\"...\"")
        cmd = rest[4:].strip()
        if len(cmd) >= 2 and cmd[0] == cmd[-1] and cmd[0] in "\"'":
            cmd = cmd[1:-1]
        if not cmd:
            raise UsageError("empty stdio command")
        return kind, {"cmd": cmd}
    if kind not in ("knn", "linear"):
        raise UsageError(f"unknown model kind {kind!r}; expected knn, linear or stdio")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise UsageError(f"bad model option {item!r}")
        opts[key.strip()] = value.strip()
    allowed = {"knn": {"k"}, "linear": {"path", "epochs", "lr"}}[kind]
    unknown = set(opts) - allowed
    if unknown:
        raise UsageError(f"unknown {kind} option(s): {sorted(unknown)}")
    return kind, opts


def build_model(spec: str, ds: LabeledDataset):
    kind, opts = parse_model_spec(spec)
    try:
        if kind == "knn":
            return knn_fit(ds, int(opts.get("k", 1)))
        if kind == "linear":
            if "path" in opts:
                return LinearSoftmaxModel.load(opts["path"])
            return linear_fit(ds, int(opts.get("epochs", 300)), float(opts.get("lr", 0.5)))
    except ValueError as exc:
        if isinstance(exc, TsxError):
            raise
        raise UsageError(f"bad model option value: {exc}") from None
    return stdio_model(opts["cmd"], ds.n_classes)


def _close(model):
    close = getattr(model, "close", None)
    if close is not None:
        close()


def _load(args) -> LabeledDataset:
    ds = load_dataset(args.data, args.format)
    if args.normalize:
        ds = LabeledDataset(np.stack([znormalize(x) for x in ds.X]), ds.y, ds.n_classes)
    return ds


def _query(ds, index):
    if not 0 <= index < len(ds):
        raise IndexOutOfRange(f"index {index} out of range for {len(ds)} instances")
    return ds.X[index]


# --------------------------------------------------------------------------
# explanation JSON


def explanation_record(method: str, exp, params: dict, seed: int) -> dict:
    if isinstance(exp, Attribution):
        return {
            "method": method, "kind": "attribution", "range": exp.range_kind,
            "scores": exp.scores.tolist(), "cf": None, "label": None, "changed_channels": None,
            "params": params, "seed": seed,
        }
    return {
        "method": method, "kind": "counterfactual", "range": None, "scores": None,
        "cf": exp.cf.tolist(), "label": int(exp.label),
        "changed_channels": [bool(v) for v in exp.changed_channels],
        "params": params, "seed": seed,
    }


def write_outputs(record: dict, x, exp, original_label, out, svg=None):
    Path(out).write_text(json.dumps(record) + "\n", encoding="utf-8")
    if svg is not None:
        style = viz.PlotStyle(title=record["method"])
        if record["kind"] == "attribution":
            doc = viz.render_attribution(x, exp, style)
        else:
            doc = viz.render_counterfactual(x, exp, style, original_label=original_label)
        Path(svg).write_text(doc, encoding="utf-8")


def make_explainer(args, model, ds):
    m = args.method
    if m == "nun-cf":
        return nuncf.NativeGuide(model, ds, variant=args.variant, max_steps=args.max_steps,
                                 saliency_method=args.saliency_base)
    if m == "comte":
        return comte.CoMTE(model, ds, n_distractors=args.distractors, restarts=args.restarts,
                           max_iters=args.max_iters, seed=args.seed)
    if m == "leftist":
        return leftist.Leftist(model, ds, n_segments=args.segments, n_samples=args.samples,
                               transform=args.transform, kernel_width=args.kernel_width,
                               ridge_lambda=args.ridge, seed=args.seed)
    return tsr.TSR(model, base_method=args.base, alpha=args.alpha, baseline=args.baseline,
                   seed=args.seed or 0)


def run_explainer(explainer, x, args):
    m = explainer.method
    if m == "comte":
        return explainer.explain(x, target=args.target)
    if m in ("leftist", "tsr"):
        return explainer.explain(x, args.class_of_interest)
    return explainer.explain(x)


# --------------------------------------------------------------------------
# commands


def cmd_predict(args) -> int:
    ds = _load(args)
    x = _query(ds, args.index)
    model = build_model(args.model, ds)
    try:
        probs = model.predict_batch(x)[0]
    finally:
        _close(model)
    print(json.dumps([float(p) for p in probs]))
    return 0


def cmd_explain(args) -> int:
    if args.method in STOCHASTIC and args.seed is None:
        raise UsageError(f"--seed is required for {args.method}")
    ds = _load(args)
    x = _query(ds, args.index)
    model = build_model(args.model, ds)
    try:
        explainer = make_explainer(args, model, ds)
        exp = run_explainer(explainer, x, args)
        original_label = model.predict_one(x)
    finally:
        _close(model)
    params = {"model": args.model, "index": args.index, "normalize": args.normalize,
              **explainer.get_params()}
    if args.method == "comte":
        params["target"] = args.target
    if args.method in ("leftist", "tsr"):
        params["class"] = args.class_of_interest
    record = explanation_record(args.method, exp, params, args.seed if args.seed is not None else 0)
    write_outputs(record, x, exp, original_label, args.out, args.svg)
    return 0


def cmd_fit(args) -> int:
    ds = _load(args)
    model = linear_fit(ds, args.epochs, args.lr, args.seed)
    model.save(args.out)
    return 0


def cmd_synth(args) -> int:
    ds = make_synthetic(args.kind, args.n, args.d, args.t, args.seed)
    save_dataset(ds, args.out)
    return 0


DEMO_FILES = [f"{m}.{ext}" for m in ("nun-cf", "comte", "leftist", "tsr") for ext in ("json", "svg")]


def run_demo(outdir, seed: int = 0) -> list:
    """Run all four explainers on synthetic data and write JSON + SVG per method."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    uni_train, uni_test = train_test_split(make_synthetic("bump_uni", 200, 1, 50, seed), 50)
    multi_train, multi_test = train_test_split(make_synthetic("channel_multi", 200, 3, 50, seed), 50)
    knn_uni = knn_fit(uni_train, 1)
    knn_multi = knn_fit(multi_train, 1)
    lin_multi = linear_fit(multi_train)

    jobs = [
        ("nun-cf", nuncf.NativeGuide(knn_uni, uni_train, variant="barycenter"), uni_test.X[0], "knn:k=1"),
        ("comte", comte.CoMTE(knn_multi, multi_train, seed=seed), multi_test.X[0], "knn:k=1"),
        ("leftist", leftist.Leftist(knn_uni, uni_train, seed=seed), uni_test.X[0], "knn:k=1"),
        ("tsr", tsr.TSR(lin_multi, seed=seed), multi_test.X[0], "linear"),
    ]
    written = []
    for name, explainer, x, spec in jobs:
        exp = explainer.explain(x)
        record = explanation_record(name, exp, {"model": spec, "index": 0, **explainer.get_params()}, seed)
        out, svg = outdir / f"{name}.json", outdir / f"{name}.svg"
        write_outputs(record, x, exp, explainer.model.predict_one(x), out, svg)
        written += [out, svg]
    return written


def cmd_demo(args) -> int:
    try:
        run_demo(args.outdir, args.seed)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _data_args(p):
    p.add_argument("--data", required=True, help="CSV (univariate) or JSONL (multivariate) dataset")
    p.add_argument("--format", choices=("csv_uni", "jsonl_multi"), help="default: from file extension")
    p.add_argument("--normalize", action="store_true", help="z-normalise every channel of every instance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsxplain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="print class probabilities of one instance")
    _data_args(p)
    p.add_argument("--model", required=True, help="knn:k=K | linear[:path=W.json|epochs=E,lr=L] | stdio:cmd=\"...\"")
    p.add_argument("--index", type=int, required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="explain one instance")
    _data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--method", required=True, choices=("nun-cf", "comte", "leftist", "tsr"))
    p.add_argument("--out", required=True, help="explanation JSON path")
    p.add_argument("--svg", help="also render the explanation to this SVG path")
    p.add_argument("--seed", type=int)
    g = p.add_argument_group("nun-cf")
    g.add_argument("--variant", choices=nuncf.VARIANTS, default="plain")
    g.add_argument("--max-steps", type=int, default=100)
    g.add_argument("--saliency-base", choices=tsr.BASE_METHODS, default="occlusion")
    g = p.add_argument_group("comte")
    g.add_argument("--target", type=int)
    g.add_argument("--distractors", type=int, default=3)
    g.add_argument("--restarts", type=int, default=5)
    g.add_argument("--max-iters", type=int, default=100)
    g = p.add_argument_group("leftist")
    g.add_argument("--segments", type=int, default=10)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--transform", choices=leftist.TRANSFORMS, default="uniform")
    g.add_argument("--kernel-width", type=float, default=0.25)
    g.add_argument("--ridge", type=float, default=1e-3)
    g = p.add_argument_group("tsr")
    g.add_argument("--base", choices=tsr.BASE_METHODS, default="occlusion")
    g.add_argument("--alpha", type=float, default=0.0)
    g.add_argument("--baseline", choices=tsr.BASELINES, default="zero")
    p.add_argument("--class", dest="class_of_interest", type=int,
                   help="class to attribute (leftist, tsr); default: predicted class")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("fit", help="train the linear softmax model and save its weights")
    _data_args(p)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", choices=("bump_uni", "channel_multi"), required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--t", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("demo", help="run every explainer on synthetic data")
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TsxError as err:
        return _fail(_exit_code(err), err)
    except OSError as err:
        code = EXIT_IO if args.command == "demo" else EXIT_DATA
        return _fail(code, err)


if __name__ == "__main__":
    sys.exit(main())
