"""Command-line front door.

Subcommands: build-dataset, train, build-space, query, generate, evaluate,
serve. Each prints a one-line machine-parsable `key=value` summary to
stdout; diagnostics go to stderr. Exit codes: 0 ok, 1 usage, 2 I/O,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import core, features, ldl, manifold, procgen, semspace
from .core import DatasetError, InvalidInputError, TextureSample
from .optim import NumericError
from .procgen import GenerationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _summary(**kv):
    print(" ".join(f"{k}={v}" for k, v in kv.items()))


def _load_dataset_with_features(dataset_dir, need_features=False):
    samples = core.load_dataset(dataset_dir)
    cache = Path(dataset_dir) / "features.csv"
    if cache.is_file():
        samples = features.attach_features(samples, features.load_features_csv(cache))
    elif need_features:
        samples = _compute_feature_cache(dataset_dir, samples)
    return samples


def _compute_feature_cache(dataset_dir, samples):
    bank = features.build_bank()
    images = [core.load_sample_image(dataset_dir, s) for s in samples]
    fvs = features.extract_many(images, bank)
    matrix = np.asarray([fv.values for fv in fvs])
    features.save_features_csv(Path(dataset_dir) / "features.csv",
                               [s.id for s in samples], matrix)
    return features.attach_features(
        samples, [(s.id, matrix[i]) for i, s in enumerate(samples)]
    )


def cmd_build_dataset(args) -> int:
    out_dir = Path(args.out)
    registry = (procgen.load_registry(args.models) if args.models
                else procgen.default_registry())
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    created = not out_dir.exists()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        images_dir = out_dir / core.IMAGES_DIRNAME
        images_dir.mkdir(exist_ok=True)
        samples = []
        sid = 0
        for model in registry.list_models():
            for tag in procgen.sample_parameter_grid(model, args.n_per_param, seeds):
                img = procgen.generate(tag, args.size, registry=registry)
                rel = f"{core.IMAGES_DIRNAME}/{sid:05d}.png"
                core.write_png(img, out_dir / rel)
                samples.append(
                    TextureSample(sid, rel, tag, procgen.oracle_semantics(tag, registry))
                )
                sid += 1
        core.save_dataset(samples, out_dir)
    except Exception:
        # Partial-write cleanup: never leave a half-built dataset behind.
        if created:
            shutil.rmtree(out_dir, ignore_errors=True)
        else:
            (out_dir / core.MANIFEST_NAME).unlink(missing_ok=True)
        raise
    _summary(samples=len(samples), size=args.size, dir=out_dir)
    return EXIT_OK


def cmd_train(args) -> int:
    samples = _load_dataset_with_features(args.dataset, need_features=True)
    usable = [s for s in samples if s.semantics is not None and s.features is not None]
    if len(usable) < 2:
        raise DatasetError("dataset has fewer than 2 labeled samples with features")
    X = np.asarray([s.features for s in usable])
    targets = tuple(core.to_distribution(s.semantics, args.epsilon) for s in usable)
    ts = ldl.TrainingSet(X, targets)
    model = ldl.train(ts, c_penalty=args.c, tol=args.tol, max_iter=args.max_iter)
    ldl.save_model(model, args.out)
    _summary(
        n=len(usable),
        q=X.shape[1],
        c_penalty=args.c,
        mean_kl=f"{ldl.mean_training_kl(model, ts):.6f}",
        model=args.out,
    )
    return EXIT_OK


def cmd_build_space(args) -> int:
    predictor = ldl.load_model(args.model) if args.model else None
    samples = _load_dataset_with_features(args.dataset,
                                          need_features=predictor is not None)
    space, residuals = semspace.build_space(
        samples, predictor=predictor, k=args.knn, d_max=args.dmax
    )
    out_dir = Path(args.out)
    semspace.save_space(space, out_dir, residuals=residuals)
    _summary(
        n=len(space.samples),
        d=space.embedding.d,
        k=space.embedding.knn_k,
        residual=f"{residuals[space.embedding.d - 1]:.6f}",
        space=out_dir,
    )
    return EXIT_OK


def _load_space(args):
    predictor = ldl.load_model(args.model) if getattr(args, "model", None) else None
    samples = _load_dataset_with_features(args.dataset)
    return semspace.load_space(args.space, samples, predictor=predictor)


def cmd_query(args) -> int:
    space = _load_space(args)
    query = semspace.load_query(args.query)
    neighbors = semspace.top_neighbors(space, query, args.top_k)
    for rank, (sample, dist) in enumerate(neighbors, start=1):
        print(
            f"rank={rank} id={sample.id} model_id={sample.tag.model_id} "
            f"distance={dist:.6g}"
        )
    best, dist = neighbors[0]
    _summary(neighbor_id=best.id, model_id=best.tag.model_id,
             distance=f"{dist:.6g}")
    return EXIT_OK


def cmd_generate(args) -> int:
    space = _load_space(args)
    query = semspace.load_query(args.query)
    result = semspace.generate_from_description(
        space, query, args.size, reuse_seed=args.reuse_seed
    )
    if args.seed is not None:
        tag = core.GenerationTag(result.tag.model_id, result.tag.params, args.seed)
        result = semspace.GenerationResult(
            image=procgen.generate(tag, args.size),
            tag=tag,
            neighbor_id=result.neighbor_id,
            neighbor_distance=result.neighbor_distance,
            query_point=result.query_point,
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_path = out_dir / "generated.png"
    core.write_png(result.image, image_path)
    mse = None
    if args.mse:
        if not args.model:
            raise InvalidInputError("--mse needs --model to score the closed loop")
        predictor = ldl.load_model(args.model)
        mse = semspace.closed_loop_mse(query, result, predictor, features.build_bank())
    semspace.write_provenance(result, query, out_dir / "provenance.json", mse=mse)
    kv = dict(
        image=image_path,
        model_id=result.tag.model_id,
        neighbor_id=result.neighbor_id,
        distance=f"{result.neighbor_distance:.6g}",
        seed=result.tag.seed,
    )
    if mse is not None:
        kv["closed_loop_mse"] = f"{mse:.6f}"
    _summary(**kv)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    samples = _load_dataset_with_features(args.dataset, need_features=True)
    usable = [s for s in samples if s.semantics is not None and s.features is not None]
    model = ldl.load_model(args.model)
    preds = [
        ldl.predict(model, np.asarray(s.features, dtype=float)) for s in usable
    ]
    truth = [core.to_distribution(s.semantics, args.epsilon) for s in usable]
    report = ldl.evaluate(preds, truth)
    if args.out:
        ldl.write_report_csv(report, args.out)
    _summary(
        n=len(usable),
        kl=f"{report.kl:.6f}",
        euclidean=f"{report.euclidean:.6f}",
        sorensen=f"{report.sorensen:.6f}",
        chi_squared=f"{report.chi_squared:.6f}",
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import build_state, create_app

    for path, flag in [
        (Path(args.dataset) / core.MANIFEST_NAME, "--dataset"),
        (Path(args.space) / semspace.EMBEDDING_NAME, "--space"),
        (Path(args.model), "--model"),
    ]:
        if not Path(path).is_file():
            raise DatasetError(f"{flag}: required file missing: {path}")

    samples = _load_dataset_with_features(args.dataset)
    predictor = ldl.load_model(args.model)
    space = semspace.load_space(args.space, samples, predictor=predictor)
    state = build_state(
        space=space,
        predictor=predictor,
        image_dir=Path(args.out) if args.out else Path(args.space) / "generated",
        default_size=args.size,
    )
    app = create_app(state, ui_dir=args.ui_dir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:  # uvicorn exits 1 when the port is taken
        if exc.code:
            raise DatasetError(f"server failed to start on port {args.port}") from exc
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="texsem", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="render a parameter-grid dataset")
    p.add_argument("--models", default=None, help="registry config (default: builtin)")
    p.add_argument("--n-per-param", type=int, default=3)
    p.add_argument("--seeds", default="0", help="comma-separated seed list")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="fit the maxent distribution predictor")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model.json destination")
    p.add_argument("--c", type=float, default=ldl.DEFAULT_PENALTY_C,
                   help="penalty divisor C (bigger = weaker)")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--epsilon", type=float, default=core.DEFAULT_EPSILON)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("build-space", help="embed dataset descriptions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="space directory")
    p.add_argument("--model", default=None,
                   help="predictor for samples lacking semantics")
    p.add_argument("--knn", type=int, default=manifold.DEFAULT_KNN)
    p.add_argument("--dmax", type=int, default=manifold.DEFAULT_DMAX)
    p.set_defaults(func=cmd_build_space)

    p = sub.add_parser("query", help="nearest neighbors for a query.json")
    p.add_argument("--dataset", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--top-k", type=int, default=3)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("generate", help="generate a texture from a query.json")
    p.add_argument("--dataset", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--model", default=None, help="predictor (needed for --mse)")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reuse-seed", action="store_true",
                   help="reuse the neighbor's seed for exact reproduction")
    p.add_argument("--seed", type=int, default=None,
                   help="render with this seed instead of a derived one")
    p.add_argument("--mse", action="store_true",
                   help="score the closed loop against the query")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="distribution metrics on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="report CSV destination")
    p.add_argument("--epsilon", type=float, default=core.DEFAULT_EPSILON)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="HTTP API over built artifacts")
    p.add_argument("--dataset", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--out", default=None, help="generated-image store")
    p.add_argument("--ui-dir", default=None, help="static UI directory to mount")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (InvalidInputError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
