"""Command-line driver: noise synthesis, prior training, denoising, metrics.

Exit codes: 0 success, 2 bad arguments or values, 3 file I/O failure,
4 malformed file contents, 5 dimension or model mismatch.
"""

import argparse
import json
import math
import os
import sys
import time
import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DimensionMismatchError,
    FormatError,
    InvalidInputError,
    PglrError,
)
from .gmm import load_model, save_model, train_em
from .imgio import read_image, write_image, write_pfmg
from .metrics import evaluate
from .noise import add_noise
from .pipeline import PipelineConfig, run
from .preprocess import load_preprocessed, local_denoise

IMAGE_EXTENSIONS = (".pgm", ".pfmg", ".png")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pglr",
        description="Grayscale image denoising with a GMM-clustered "
                    "low-rank patch model.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("add-noise", help="add seeded white Gaussian noise")
    p.add_argument("--in", dest="input", required=True, help="input image")
    p.add_argument("--out", dest="output", required=True, help="output image")
    p.add_argument("--sigma", type=float, required=True, help="noise std dev")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--float", dest="as_float", action="store_true",
                   help="write the unclamped float raster instead of 8-bit PGM")

    p = sub.add_parser("train-gmm", help="train a patch prior from clean images")
    p.add_argument("--dir", dest="image_dir", required=True,
                   help="directory of clean grayscale images")
    p.add_argument("--out", dest="output", required=True, help="model file")
    p.add_argument("--k", type=int, default=250, help="mixture components")
    p.add_argument("--patch-size", type=int, default=8, help="patch side length")
    p.add_argument("--max-patches", type=int, default=200000,
                   help="cap on uniformly sampled training patches")
    p.add_argument("--seed", type=int, default=0, help="sampling and init seed")

    p = sub.add_parser("denoise", help="denoise a noisy image")
    p.add_argument("--in", dest="input", required=True, help="noisy image")
    p.add_argument("--out", dest="output", required=True, help="denoised image")
    p.add_argument("--sigma", type=float, required=True, help="noise std dev")
    p.add_argument("--model", required=True, help="trained prior model file")
    p.add_argument("--preprocessed", default=None,
                   help="externally preprocessed guide image")
    p.add_argument("--reference", default=None,
                   help="clean image for per-iteration quality reporting")
    p.add_argument("--alpha", type=float, default=0.10,
                   help="iterative regularization weight")
    p.add_argument("--beta", type=float, default=0.62,
                   help="noise re-estimation scale")
    p.add_argument("--max-iter", type=int, default=5, help="iterations")
    p.add_argument("--stride", type=int, default=2, help="patch grid stride")
    p.add_argument("--seed", type=int, default=0, help="class balancing seed")
    p.add_argument("--no-xpr-update", action="store_true",
                   help="keep the guide image fixed across iterations")
    p.add_argument("--report-dir", default=None,
                   help="write trace.csv and diagnostic figures here")
    p.add_argument("--json", dest="as_json", action="store_true",
                   help="print the run manifest as JSON")

    p = sub.add_parser("eval", help="compare two images")
    p.add_argument("--a", required=True, help="reference image")
    p.add_argument("--b", required=True, help="test image")
    p.add_argument("--json", dest="as_json", action="store_true",
                   help="print the report as JSON")

    return parser


def _cmd_add_noise(args) -> int:
    image = read_image(args.input)
    noisy = add_noise(image, args.sigma, args.seed)
    if args.as_float:
        write_pfmg(args.output, noisy)
    else:
        write_image(args.output, noisy)
    return 0


def _list_images(image_dir):
    try:
        names = sorted(os.listdir(image_dir))
    except FileNotFoundError:
        raise InvalidInputError(f"{image_dir}: no such directory") from None
    paths = [os.path.join(image_dir, n) for n in names
             if n.lower().endswith(IMAGE_EXTENSIONS)]
    if not paths:
        raise InvalidInputError(
            f"{image_dir}: no images with extensions {IMAGE_EXTENSIONS}"
        )
    return paths


def _sample_patches(paths, s, max_patches, seed):
    """Uniformly sample patch positions across all images, then gather."""
    images = []
    counts = []
    for path in paths:
        img = read_image(path)
        h, w = img.shape
        if h < s or w < s:
            warnings.warn(f"{path}: smaller than {s}x{s}, skipped")
            continue
        images.append(img)
        counts.append((h - s + 1) * (w - s + 1))
    if not images:
        raise InvalidInputError(f"no images of size >= {s}x{s} to train on")
    offsets = np.concatenate(([0], np.cumsum(counts)))
    total = int(offsets[-1])
    if total > max_patches:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(total, size=max_patches, replace=False))
    else:
        chosen = np.arange(total)
    out = np.empty((chosen.size, s * s), dtype=np.float64)
    pos = 0
    for i, img in enumerate(images):
        local = chosen[(chosen >= offsets[i]) & (chosen < offsets[i + 1])]
        if local.size == 0:
            continue
        local = local - offsets[i]
        cols = img.shape[1] - s + 1
        r, c = np.divmod(local, cols)
        view = sliding_window_view(img, (s, s))
        out[pos:pos + local.size] = view[r, c].reshape(local.size, s * s)
        pos += local.size
    return out


def _cmd_train_gmm(args) -> int:
    if args.k < 1:
        raise InvalidInputError(f"k must be >= 1, got {args.k}")
    if args.patch_size < 1:
        raise InvalidInputError(f"patch-size must be >= 1, got {args.patch_size}")
    if args.max_patches < 1:
        raise InvalidInputError(f"max-patches must be >= 1, got {args.max_patches}")
    paths = _list_images(args.image_dir)
    patches = _sample_patches(paths, args.patch_size, args.max_patches, args.seed)
    print(f"training on {patches.shape[0]} patches from {len(paths)} images")
    model = train_em(patches, args.k, seed=args.seed)
    save_model(model, args.output)
    print(f"final log-likelihood: {model.log_likelihoods[-1]:.6f}")
    print(f"wrote {args.output}")
    return 0


def _trace_entries(trace):
    entries = []
    for rec in trace:
        sizes = rec.class_sizes
        entry = {
            "iteration": rec.iteration,
            "sigma": rec.sigma,
            "classes": len(sizes),
            "mean_rank": float(np.mean(rec.ranks)) if len(rec.ranks) else 0.0,
        }
        if rec.psnr is not None:
            entry["psnr"] = rec.psnr
            entry["ssim"] = rec.ssim
        entries.append(entry)
    return entries


def _cmd_denoise(args) -> int:
    t_start = time.perf_counter()
    stages = {}

    t0 = time.perf_counter()
    noisy = read_image(args.input)
    model = load_model(args.model)
    s = math.isqrt(model.d)
    if s * s != model.d:
        raise DimensionMismatchError(
            f"model dimension {model.d} is not a square patch size"
        )
    reference = None
    if args.reference is not None:
        reference = read_image(args.reference)
    stages["load"] = time.perf_counter() - t0

    cfg = PipelineConfig(
        alpha=args.alpha,
        beta=args.beta,
        max_iter=args.max_iter,
        k_components=model.k,
        patch_size=s,
        stride=args.stride,
        seed=args.seed,
    )

    t0 = time.perf_counter()
    if args.preprocessed is not None:
        guide = load_preprocessed(args.preprocessed, noisy.shape)
    else:
        guide = local_denoise(noisy, args.sigma)
    stages["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    estimate, trace = run(
        noisy,
        args.sigma,
        model,
        cfg,
        preprocessed=guide,
        reference=reference,
        update_guide=not args.no_xpr_update,
    )
    stages["pipeline"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    write_image(args.output, estimate)
    report_files = []
    if args.report_dir is not None:
        from .report import write_report
        report_files = write_report(args.report_dir, noisy, estimate, trace,
                                    reference=reference)
    stages["write"] = time.perf_counter() - t0
    stages["total"] = time.perf_counter() - t_start

    quality = None
    if reference is not None:
        rep = evaluate(reference, estimate)
        quality = {"mse": rep.mse, "psnr": rep.psnr, "ssim": rep.ssim}

    manifest = {
        "subcommand": "denoise",
        "parameters": {
            "sigma": args.sigma,
            "alpha": cfg.alpha,
            "beta": cfg.beta,
            "max_iter": cfg.max_iter,
            "stride": cfg.stride,
            "seed": cfg.seed,
            "patch_size": cfg.patch_size,
            "k_components": cfg.k_components,
            "q_min": cfg.q_min,
            "q_max": cfg.q_max,
            "update_guide": not args.no_xpr_update,
        },
        "inputs": {
            "noisy": args.input,
            "model": args.model,
            "preprocessed": args.preprocessed,
            "reference": args.reference,
        },
        "outputs": {
            "image": args.output,
            "manifest": args.output + ".manifest.json",
            "report_files": report_files,
        },
        "stages_seconds": stages,
        "iterations": _trace_entries(trace),
        "quality": quality,
    }
    with open(manifest["outputs"]["manifest"], "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    if args.as_json:
        print(json.dumps(manifest, indent=2))
    else:
        if reference is not None:
            for entry in _trace_entries(trace):
                print(f"iter {entry['iteration']}  "
                      f"sigma {entry['sigma']:8.4f}  "
                      f"classes {entry['classes']:4d}  "
                      f"mean rank {entry['mean_rank']:6.2f}  "
                      f"PSNR {entry['psnr']:.4f}  SSIM {entry['ssim']:.4f}")
        print(f"wrote {args.output}")
    return 0


def _cmd_eval(args) -> int:
    a = read_image(args.a)
    b = read_image(args.b)
    rep = evaluate(a, b)
    if args.as_json:
        print(json.dumps({
            "subcommand": "eval",
            "inputs": {"a": args.a, "b": args.b},
            "quality": {"mse": rep.mse, "psnr": rep.psnr, "ssim": rep.ssim},
        }, indent=2))
    else:
        print(f"MSE:  {rep.mse:.4f}")
        print(f"PSNR: {rep.psnr:.4f}")
        print(f"SSIM: {rep.ssim:.4f}")
    return 0


_COMMANDS = {
    "add-noise": _cmd_add_noise,
    "train-gmm": _cmd_train_gmm,
    "denoise": _cmd_denoise,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PglrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
