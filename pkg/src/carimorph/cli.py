"""Command-line entry points for every pipeline stage.

Thin wiring over the library: each subcommand parses flags, calls the same
operations the HTTP service uses, and reports through exit codes (0 success,
1 domain error, 2 usage error).  Diagnostics go to stderr; data and
summaries go to stdout or the requested output files.  Set CARIMORPH_LOG to
a level name (debug, info, ...) for verbose logging.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import CarimorphError
from .exaggerate import MeanHead, feature_vector, user_control
from .losses import LossWeights
from .mesh import HeadMesh, load_mesh, save_mesh
from .nicp import NicpConfig, load_landmark_pairs, nicp_register
from .pca import PcaCoeffs, decode, fit_pca, load_model, save_model
from .scoring import score_vote_csv
from .texture import (
    add_matched_noise,
    complete_vertex_colors,
    compute_uv,
    estimate_projection,
    load_colored_ply,
    save_colored_ply,
)
from .toygan import TrainConfig, generated_statistics, synthetic_training_setup, train_toy_gan

logger = logging.getLogger("carimorph")


def _configure_logging() -> None:
    level_name = os.environ.get("CARIMORPH_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carimorph",
        description="3D caricature shape-space tools: build, exaggerate, register, texture, score, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pca = sub.add_parser("pca", help="shape model operations")
    pca_sub = pca.add_subparsers(dest="pca_command", required=True)
    build = pca_sub.add_parser("build", help="fit a PCA shape model on an OBJ corpus")
    build.add_argument("--in", dest="corpus", required=True, help="directory of same-connectivity OBJ meshes")
    build.add_argument("--d", type=int, default=200, help="number of components (default 200)")
    build.add_argument("--out", required=True, help="output model file (.cpca)")
    build.add_argument("--mean-out", help="also write the mean mesh as OBJ")
    build.set_defaults(func=_cmd_pca_build)

    exg = sub.add_parser("exaggerate", help="two-parameter exaggeration of a head")
    exg.add_argument("--model", help="PCA model file (required with --cari-coeffs)")
    exg.add_argument("--mean", required=True, help="mean head OBJ")
    exg.add_argument("--head", required=True, help="reconstructed normal head OBJ (the dP side)")
    exg.add_argument("--cari", help="generated caricature OBJ (the dG side); defaults to --head")
    exg.add_argument("--cari-coeffs", help="JSON file {\"coeffs\": [...]} decoded through --model")
    exg.add_argument("--u1", type=float, required=True)
    exg.add_argument("--u2", type=float, required=True)
    exg.add_argument("--out", required=True, help="output OBJ")
    exg.set_defaults(func=_cmd_exaggerate)

    reg = sub.add_parser("register", help="non-rigid registration of a template onto a target")
    reg.add_argument("--template", required=True)
    reg.add_argument("--target", required=True)
    reg.add_argument("--landmarks", help="pairs file: template_index tx ty tz per line")
    reg.add_argument("--outer-steps", type=int, default=8)
    reg.add_argument("--stiffness-start", type=float, default=50.0)
    reg.add_argument("--stiffness-end", type=float, default=0.2)
    reg.add_argument("--landmark-weight-start", type=float, default=5.0)
    reg.add_argument("--inner-cap", type=int, default=10)
    reg.add_argument("--tol", type=float, default=1e-6)
    reg.add_argument("--out", required=True, help="deformed template OBJ")
    reg.add_argument("--trace", help="write per-outer-step RMSE as CSV")
    reg.set_defaults(func=_cmd_register)

    tex = sub.add_parser("texture", help="texture mapping and vertex-color completion")
    tex_sub = tex.add_subparsers(dest="texture_command", required=True)
    complete = tex_sub.add_parser("complete", help="fill unknown vertex colors harmonically")
    complete.add_argument("--mesh", required=True, help="mesh OBJ providing connectivity")
    complete.add_argument("--colors", required=True, help="partial colors PLY (known flag per vertex)")
    complete.add_argument("--seed", type=int, default=0, help="noise seed")
    complete.add_argument("--no-noise", action="store_true", help="skip variance-matched noise")
    complete.add_argument("--out", required=True, help="output PLY")
    complete.set_defaults(func=_cmd_texture_complete)
    project = tex_sub.add_parser("project", help="fit an affine camera and compute texture coordinates")
    project.add_argument("--mesh", required=True)
    project.add_argument("--landmarks", required=True, help="file of 0-based vertex indices")
    project.add_argument("--pixels", required=True, help="file of matching 'u v' pixel rows")
    project.add_argument("--image-size", required=True, help="WxH, e.g. 1024x1024")
    project.add_argument("--out", required=True, help="output OBJ with vt lines")
    project.set_defaults(func=_cmd_texture_project)

    score = sub.add_parser("score", help="aggregate pairwise votes into quality scores")
    score.add_argument("--votes", required=True, help="CSV: photo_id,candidate_id,votes")
    score.add_argument("--s-max", type=int, default=40)
    score.add_argument("--out", required=True, help="output CSV: candidate_id,score")
    score.set_defaults(func=_cmd_score)

    train = sub.add_parser("train-toy", help="desk-scale adversarial training demo of the losses")
    train.add_argument("--steps", type=int, default=500)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--lambda-cha", type=float, default=2.0)
    train.add_argument("--lambda-cari", type=float, default=20.0)
    train.add_argument("--identities", type=int, default=200)
    train.add_argument("--hidden", type=int, default=0, help="discriminator hidden units (0 = affine)")
    train.add_argument("--config", help="key=value file overriding the flags above")
    train.add_argument("--trace", help="write per-step losses as CSV")
    train.set_defaults(func=_cmd_train_toy)

    srv = sub.add_parser("serve", help="HTTP service for interactive exaggeration")
    srv.add_argument("--model", required=True)
    srv.add_argument("--mean", required=True)
    srv.add_argument(
        "--head",
        nargs=3,
        action="append",
        metavar=("NAME", "CARI", "NORMAL"),
        default=[],
        help="head slot: name, caricature mesh/coeffs file, normal head OBJ (repeatable)",
    )
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=_cmd_serve)

    return parser


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_pca_build(args) -> int:
    corpus_dir = Path(args.corpus)
    paths = sorted(corpus_dir.glob("*.obj"))
    if len(paths) < 2:
        raise CarimorphError(f"{corpus_dir}: need at least 2 OBJ meshes, found {len(paths)}")
    meshes = [load_mesh(p) for p in paths]
    d = min(args.d, 3 * meshes[0].n_v, len(meshes) - 1)
    if d != args.d:
        logger.warning("reducing d from %d to %d for %d meshes", args.d, d, len(meshes))
    model = fit_pca(meshes, d=d)
    save_model(model, args.out, provenance=f"fit on {len(meshes)} meshes from {corpus_dir}")
    if args.mean_out:
        save_mesh(model.mean_mesh(), args.mean_out)
    explained = float(model.variance_ratios.sum())
    print(f"model: n_v={model.n_v} d={model.d} explained_variance={explained:.6f}")
    for i, ratio in enumerate(model.variance_ratios[:10]):
        print(f"  component {i}: {float(ratio):.6f}")
    return 0


def _cmd_exaggerate(args) -> int:
    mean = MeanHead(load_mesh(args.mean))
    head = load_mesh(args.head)
    if args.cari_coeffs:
        if not args.model:
            raise CarimorphError("--cari-coeffs requires --model")
        model = load_model(args.model)
        coeffs = json.loads(Path(args.cari_coeffs).read_text(encoding="utf-8"))["coeffs"]
        cari = decode(model, PcaCoeffs(np.asarray(coeffs)))
    elif args.cari:
        cari = load_mesh(args.cari)
    else:
        cari = head
    d_g = feature_vector(cari, mean, source="dG")
    d_p = feature_vector(head, mean, source="dP")
    result = user_control(mean, d_g, d_p, args.u1, args.u2, faces=head.faces)
    save_mesh(result, args.out)
    return 0


def _cmd_register(args) -> int:
    template = load_mesh(args.template)
    target = load_mesh(args.target)
    pairs = load_landmark_pairs(args.landmarks) if args.landmarks else []
    config = NicpConfig(
        stiffness_schedule=tuple(
            float(x) for x in np.geomspace(args.stiffness_start, args.stiffness_end, args.outer_steps)
        ),
        landmark_weight_schedule=tuple(
            float(x) for x in np.linspace(args.landmark_weight_start, 0.0, args.outer_steps)
        ),
        inner_iteration_cap=args.inner_cap,
        convergence_tol=args.tol,
    )
    result = nicp_register(template, target, pairs, config)
    save_mesh(result.deformed_template, args.out)
    if args.trace:
        with Path(args.trace).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["outer_step", "rmse"])
            for i, rmse in enumerate(result.residual_trace):
                writer.writerow([i, repr(rmse)])
    print(f"final rmse: {result.residual_trace[-1]:.3e}")
    return 0


def _cmd_texture_complete(args) -> int:
    mesh = load_mesh(args.mesh)
    ply_mesh, partial = load_colored_ply(args.colors)
    if ply_mesh.n_v != mesh.n_v:
        raise CarimorphError(
            f"color file covers {ply_mesh.n_v} vertices, mesh has {mesh.n_v}"
        )
    filled = complete_vertex_colors(mesh, partial)
    if not args.no_noise:
        filled = add_matched_noise(filled, partial.known_mask, seed=args.seed)
    save_colored_ply(mesh, filled, args.out)
    return 0


def _cmd_texture_project(args) -> int:
    mesh = load_mesh(args.mesh)
    from .mesh import load_landmarks

    landmarks = load_landmarks(args.landmarks)
    landmarks.validate_for(mesh)
    pixels = np.loadtxt(args.pixels, ndmin=2)
    if pixels.shape != (len(landmarks.indices), 2):
        raise CarimorphError(
            f"pixel file shape {pixels.shape} does not match {len(landmarks.indices)} landmarks"
        )
    try:
        w, h = (int(x) for x in args.image_size.lower().split("x"))
    except ValueError as exc:
        raise CarimorphError(f"bad --image-size {args.image_size!r}, want WxH") from exc
    camera, err = estimate_projection(mesh.vertices[list(landmarks.indices)], pixels)
    uv = compute_uv(mesh, camera, (w, h))
    save_mesh(HeadMesh(mesh.vertices, mesh.faces, uv=uv.uv), args.out)
    print(f"mean reprojection error: {err:.6g} px; invalid vertices: {int((~uv.valid).sum())}")
    return 0


def _cmd_score(args) -> int:
    averaged = score_vote_csv(args.votes, args.out, s_max=args.s_max)
    for cand in sorted(averaged):
        print(f"{cand}: {float(averaged[cand]):+.4f}")
    return 0


def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.partition("#")[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CarimorphError(f"bad config line {raw!r}, want key=value")
        out[key.strip()] = value.strip()
    return out


def _cmd_train_toy(args) -> int:
    params = {
        "steps": args.steps,
        "seed": args.seed,
        "lr": args.lr,
        "lambda_cha": args.lambda_cha,
        "lambda_cari": args.lambda_cari,
        "identities": args.identities,
        "hidden": args.hidden,
    }
    if args.config:
        overrides = _parse_config_file(args.config)
        for key, value in overrides.items():
            if key not in params:
                raise CarimorphError(f"unknown config key {key!r}")
            params[key] = type(params[key])(float(value) if key in ("lr", "lambda_cha", "lambda_cari") else int(value))
    model, mean_head, dataset = synthetic_training_setup(
        seed=int(params["seed"]), n_identities=int(params["identities"])
    )
    weights = LossWeights(float(params["lambda_cha"]), float(params["lambda_cari"]))
    config = TrainConfig(
        steps=int(params["steps"]),
        learning_rate=float(params["lr"]),
        seed=int(params["seed"]),
        hidden=int(params["hidden"]),
    )
    gen, _disc, trace = train_toy_gan(dataset, model, mean_head, weights, config)
    if args.trace:
        trace.write_csv(args.trace)
    cos, ratio = generated_statistics(gen, dataset, model, mean_head)
    print(f"final mean cosine: {cos:.4f}")
    print(f"final mean magnitude ratio: {ratio:.4f}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(
        args.model,
        args.mean,
        head_specs=[tuple(spec) for spec in args.head],
        host=args.host,
        port=args.port,
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except CarimorphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
