"""Command-line front door.

Exit codes: 0 success, 1 I/O failure, 2 invalid parameters/config,
3 no feasible labeling.  Every command is deterministic given identical
inputs, flags, and seed (seeds default to 0).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import errors
from .core import (load_dataset_index, load_image, load_labelmap,
                   load_scribbles, save_image, save_labelmap, save_scribbles)
from .evaluation import SynthSpec, generate_synthetic, miou, shorten_scribbles
from .features import PairwiseParams
from .predictor import PredictorConfig, load_logprob_file, load_model
from .superpixel import boundary_overlay, save_id_map, segment_fh
from .trainer import SuperpixelParams, TrainConfig, alternate_train, infer, propagate_image

IO_ERRORS = (errors.MissingFile, errors.IoFailure, errors.CorruptData,
             errors.UnsupportedFormat)
CONFIG_ERRORS = (errors.InvalidParameter, errors.InvalidSpec, errors.SchemaViolation,
                 errors.OutOfBoundsCoordinate, errors.EmptyPolyline,
                 errors.ValueOutOfRange, errors.NotNormalized, errors.DimensionMismatch,
                 errors.UniverseMismatch, errors.NoScribbles, errors.EmptyDataset,
                 errors.LengthMismatch, errors.ShapeMismatch, errors.InconsistentSizes)


def _load_config_file(path):
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise errors.MissingFile(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            cfg = json.load(f)
        except json.JSONDecodeError as e:
            raise errors.SchemaViolation(f"{path}: invalid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise errors.SchemaViolation(f"{path}: config must be a JSON object")
    return cfg


def _pick(flag_value, file_section, key, default):
    """Precedence: CLI flag > config file > built-in default."""
    if flag_value is not None:
        return flag_value
    if key in file_section:
        return file_section[key]
    return default


def build_train_config(args):
    cfg = _load_config_file(getattr(args, "config", None))
    sp = cfg.get("superpixel", {})
    pw = cfg.get("pairwise", {})
    pr = cfg.get("predictor", {})
    use_pairwise = not args.no_pairwise if getattr(args, "no_pairwise", False) \
        else cfg.get("use_pairwise", True)
    config = TrainConfig(
        outer_iterations=int(_pick(getattr(args, "iters", None), cfg, "outer_iterations", 3)),
        use_pairwise=bool(use_pairwise),
        pairwise=PairwiseParams(
            delta_c=float(_pick(getattr(args, "delta_c", None), pw, "delta_c", 5.0)),
            delta_t=float(_pick(getattr(args, "delta_t", None), pw, "delta_t", 10.0)),
            lambda_=float(_pick(getattr(args, "lam", None), pw, "lambda", 1.0)),
        ),
        superpixel=SuperpixelParams(
            k=float(_pick(getattr(args, "k", None), sp, "k", 100.0)),
            sigma=float(_pick(getattr(args, "sigma", None), sp, "sigma", 0.5)),
            min_size=int(_pick(getattr(args, "min_size", None), sp, "min_size", 50)),
        ),
        predictor=PredictorConfig(
            learning_rate=float(pr.get("learning_rate", PredictorConfig.learning_rate)),
            epochs=int(pr.get("epochs", PredictorConfig.epochs)),
            l2=float(pr.get("l2", PredictorConfig.l2)),
        ),
        hist_norm=str(cfg.get("hist_norm", "l1")),
        net_size_normalize=bool(cfg.get("net_size_normalize", False)),
        seed=int(_pick(getattr(args, "seed", None), cfg, "seed", 0)),
    )
    config.validate()
    return config


def _add_common_flags(p, train=False):
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--k", type=float, help="superpixel threshold scale (default 100)")
    p.add_argument("--sigma", type=float, help="superpixel smoothing std (default 0.5)")
    p.add_argument("--min-size", type=int, dest="min_size",
                   help="minimum superpixel size (default 50)")
    p.add_argument("--delta-c", type=float, dest="delta_c",
                   help="color similarity bandwidth (default 5)")
    p.add_argument("--delta-t", type=float, dest="delta_t",
                   help="texture similarity bandwidth (default 10)")
    p.add_argument("--lambda", type=float, dest="lam",
                   help="pairwise scale (default 1)")
    p.add_argument("--no-pairwise", action="store_true",
                   help="drop all pairwise terms")
    p.add_argument("--seed", type=int, help="rng seed (default 0)")
    if train:
        p.add_argument("--iters", type=int, help="outer iterations (default 3)")


# ---------------------------------------------------------------------------
# subcommands

def cmd_superpixels(args):
    config = build_train_config(args)
    image = load_image(args.image)
    sp = config.superpixel
    spmap = segment_fh(image, k=sp.k, sigma=sp.sigma, min_size=sp.min_size)
    os.makedirs(args.out, exist_ok=True)
    save_id_map(spmap, os.path.join(args.out, "ids.png"))
    save_image(boundary_overlay(image, spmap), os.path.join(args.out, "boundaries.png"))
    print(f"count: {spmap.count}")
    return 0


def _resolve_predictor(spec_str):
    if spec_str in (None, "none"):
        return None
    if spec_str.startswith("model:"):
        return load_model(spec_str[len("model:"):])
    if spec_str.startswith("logprob:"):
        return load_logprob_file(spec_str[len("logprob:"):])
    raise errors.InvalidParameter(
        f"--predictor must be none, model:<path>, or logprob:<path>; got {spec_str!r}")


def cmd_propagate(args):
    config = build_train_config(args)
    image = load_image(args.image)
    scribbles = load_scribbles(args.scribbles)
    predictor = _resolve_predictor(args.predictor)
    labelmap, energy = propagate_image(image, scribbles, predictor, config)
    os.makedirs(args.out, exist_ok=True)
    save_labelmap(labelmap, os.path.join(args.out, "labels.png"))
    stats = {
        "energy": energy,
        "use_pairwise": config.use_pairwise,
        "predictor": args.predictor or "none",
        "seed": config.seed,
    }
    with open(os.path.join(args.out, "stats.json"), "w", encoding="utf-8") as f:
        json.dump(stats, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"energy: {energy}")
    return 0


def cmd_train(args):
    from .report import write_train_report

    config = build_train_config(args)
    dataset = load_dataset_index(args.index)
    state = alternate_train(dataset, config, out_dir=args.out)
    write_train_report(state.stats, args.out)
    print(f"iterations: {len(state.stats)}  "
          f"final mean energy: {state.stats[-1].mean_energy:.4f}")
    return 0


def cmd_infer(args):
    config = build_train_config(args)
    model = load_model(args.model)
    image = load_image(args.image)
    labelmap = infer(model, image, config)
    save_labelmap(labelmap, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args):
    from .report import write_eval_report

    pred = load_labelmap(args.pred)
    gt = load_labelmap(args.gt)
    if args.classes is not None:
        num_classes = args.classes
    else:
        labels = np.concatenate([np.unique(pred.labels), np.unique(gt.labels)])
        labels = labels[labels != 255]
        num_classes = int(labels.max()) + 1 if labels.size else 1
    report = miou(pred, gt, num_classes)
    write_eval_report(report, args.out)
    print(f"miou: {report.mean}")
    return 0


def cmd_synth(args):
    sset = load_scribbles(args.scribbles)
    short = shorten_scribbles(sset, args.ratio, seed=args.seed if args.seed is not None else 0)
    save_scribbles(short, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_gen(args):
    from .core import scribbleset_to_json

    spec = SynthSpec(
        width=args.size, height=args.size,
        min_regions=args.min_regions, max_regions=args.max_regions,
        noise_std=args.noise, scribble_fraction=args.fraction,
    )
    spec.validate()
    out = args.out
    for sub in ("images", "masks", "scribbles"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    base_seed = args.seed if args.seed is not None else 0
    index = []
    for i in range(args.count):
        spec.seed = base_seed + i
        image, gt, scribbles = generate_synthetic(spec)
        name = f"synth_{i:04d}"
        scribbles.image_ref = name
        save_image(image, os.path.join(out, "images", f"{name}.png"))
        save_labelmap(gt, os.path.join(out, "masks", f"{name}.png"))
        with open(os.path.join(out, "scribbles", f"{name}.json"), "w", encoding="utf-8") as f:
            f.write(scribbleset_to_json(scribbles))
        # scribbles are the supervision; the masks stay out of the index so
        # training does not silently take the mask-bypass path (they are
        # ground truth for `eval`)
        index.append({
            "image": f"images/{name}.png",
            "scribbles": f"scribbles/{name}.json",
            "mask": None,
        })
    with open(os.path.join(out, "index.json"), "w", encoding="utf-8") as f:
        json.dump(index, f, indent=2)
        f.write("\n")
    manifest = {
        "count": args.count, "size": args.size, "noise_std": args.noise,
        "scribble_fraction": args.fraction, "seed": base_seed,
        "min_regions": args.min_regions, "max_regions": args.max_regions,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {args.count} images under {out}")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(model_path=args.model, ttl=args.ttl,
                     cors_origin=args.cors_origin, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="scribbleprop",
        description="Propagate scribble annotations to full label maps over a "
                    "superpixel graph, train a predictor on the result, and serve "
                    "an interactive annotation session API.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("superpixels", help="segment an image and export id map + overlay")
    p.add_argument("image")
    p.add_argument("--out", required=True, help="output directory")
    _add_common_flags(p)
    p.set_defaults(func=cmd_superpixels)

    p = sub.add_parser("propagate", help="propagate scribbles on one image")
    p.add_argument("image")
    p.add_argument("scribbles")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--predictor", default="none",
                   help="none | model:<path> | logprob:<path>")
    _add_common_flags(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("train", help="alternating propagation + predictor training")
    p.add_argument("index", help="dataset index JSON")
    p.add_argument("--out", required=True, help="checkpoint directory")
    _add_common_flags(p, train=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="label an image with a trained model only")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output label PNG")
    _add_common_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a prediction against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--classes", type=int, help="number of classes (default: derived)")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="shorten scribbles by a length ratio")
    p.add_argument("scribbles")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output scribble JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen", help="generate a synthetic scribble dataset")
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--fraction", type=float, default=0.7)
    p.add_argument("--min-regions", type=int, default=3, dest="min_regions")
    p.add_argument("--max-regions", type=int, default=5, dest="max_regions")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("serve", help="run the annotation session service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", help="predictor model JSON served in 'model' mode")
    p.add_argument("--ttl", type=int, default=1800, help="idle session TTL, seconds")
    p.add_argument("--cors-origin", default="*", dest="cors_origin")
    p.add_argument("--static", help="directory of UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IO_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except errors.NoFeasibleLabeling as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
