import argparse
import json
import sys
from pathlib import Path

import numpy as np

from src.augment.aomix import AoMixConfig, AoMixStrategy, run_aomix
from src.config import Config
from src.formats.dataset import DatasetLayout
from src.formats.instances_json import load_detections
from src.formats.png_maps import load_image, load_panoptic, load_semantic, save_image, save_semantic
from src.formats.raw_tensors import load_probs, load_tensor, save_named_tensors, save_tensor
from src.fusion.oafusion import BranchOutputs, FusionConfig, run_oafusion
from src.metrics.evaluator import evaluate_oass
from src.models.instances import MaskSelector
from src.models.taxonomy import TAXONOMIES, get_taxonomy
from src.nn.gradcheck import BLOCKS, build_case, grad_check
from src.report.colormap import render_colormap
from src.report.report_builder import ReportBuilder
from src.selftrain.ema import MeanTeacher
from src.selftrain.pseudo_label import SelfTrainConfig, pseudo_label_target, target_loss
from src.synth.certificate import certify
from src.synth.scene import SynthSpec, synth_dataset
from src.utils.logging import get_logger
from src.utils.parallel import resolve_threads

logger = get_logger()

GRADCHECK_TOLERANCE = 1e-5


def _fill_value(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"fill must be comma-separated integers, got '{text}'") from None


def cmd_evaluate(args) -> int:
    taxonomy = get_taxonomy(args.taxonomy)
    threads = resolve_threads(args.threads)
    preds = DatasetLayout(args.pred, taxonomy).load_all(threads)
    gts = DatasetLayout(args.gt, taxonomy).load_all(threads)
    report = evaluate_oass(preds, gts, taxonomy, threads=threads, progress=True)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report.to_json_dict(), indent=2), encoding="utf-8")
    md_path = out_path.with_suffix(".md")
    md_path.write_text(ReportBuilder(taxonomy).generate_report(report, len(gts)), encoding="utf-8")
    logger.info(f"Report saved: {out_path} (table: {md_path})")
    return 0


def cmd_fuse(args) -> int:
    taxonomy = get_taxonomy(args.taxonomy)
    semantic_path = Path(args.semantic)
    if semantic_path.suffix.lower() == ".png":
        semantic = load_semantic(semantic_path, taxonomy)
    else:
        semantic = load_probs(semantic_path)
    _, instances = load_detections(args.instances, MaskSelector.VISIBLE)
    _, amodal = load_detections(args.amodal, MaskSelector.AMODAL)
    branches = BranchOutputs(semantic=semantic, instances=tuple(instances), amodal_instances=tuple(amodal))
    config = FusionConfig(score_threshold=args.score_threshold, taxonomy=taxonomy.name)
    outputs = run_oafusion(branches, config=config)
    written = DatasetLayout(args.out, taxonomy).save(args.id, outputs)
    logger.info(f"Fused outputs for '{args.id}' written to {args.out} ({len(written)} files)")
    return 0


def cmd_aomix(args) -> int:
    taxonomy = get_taxonomy(args.taxonomy)
    source = DatasetLayout(args.source_dir, taxonomy)
    x_s = load_image(source.path(args.source_id, "image"))
    y_s = source.load(args.source_id)
    batch = source.load(args.batch_id or args.source_id)
    x_t = load_image(args.target_image)
    target_label = load_semantic(args.target_label, taxonomy) if args.target_label else None

    cfg = AoMixConfig(
        scale_min=args.scale_min,
        scale_max=args.scale_max,
        fill_value=args.fill,
        seed=args.seed,
        strategy=AoMixStrategy(args.strategy),
    )
    result = run_aomix(
        x_s,
        y_s.semantic,
        [a.amodal for a in y_s.amodal_instance],
        x_t,
        [a.amodal for a in batch.amodal_instance],
        cfg,
        target_label=target_label,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_image(result.masked_source, out / "masked_source.png")
    save_image(result.mixed_image, out / "mixed_image.png")
    save_semantic(result.mixed_label, out / "mixed_label.png")
    logger.info(
        f"AoMix ({cfg.strategy.value}) transplanted classes {list(result.selected_classes)}, "
        f"{int(result.provenance.sum())} px from the source; outputs in {out}"
    )
    return 0


def cmd_pseudolabel(args) -> int:
    cfg = SelfTrainConfig(tau=args.tau)
    teacher = load_probs(args.probs)
    target = pseudo_label_target(teacher, cfg)
    print(f"omega={target.omega:.6f}")
    if args.student:
        student = load_probs(args.student)
        loss = target_loss(student, target.labels, target.omega, target.ignore_mask)
        print(f"loss={loss:.6f}")
    if args.out:
        save_semantic(target.labels, args.out)
        logger.info(f"Pseudo-labels saved: {args.out}")
    return 0


def cmd_ema(args) -> int:
    teacher = load_tensor(args.teacher)
    student = load_tensor(args.student)
    mean_teacher = MeanTeacher(teacher, eta=args.eta, warmup=args.warmup)
    for _ in range(args.steps):
        mean_teacher.update(student)
    gap = float(np.max(np.abs(mean_teacher.params - student)))
    print(f"max_gap={gap:.6e}")
    if args.out:
        save_tensor(mean_teacher.params, args.out)
        logger.info(f"Teacher parameters after {args.steps} update(s) saved: {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    error = grad_check(args.block, seed=args.seed, eps=args.eps, inject_fault=args.inject_fault)
    print(f"max_rel_error={error:.3e}")
    if args.out:
        case = build_case(args.block, args.seed)
        save_named_tensors({"input": case.x, **case.params.values}, args.out)
    if error >= args.tolerance:
        logger.error(f"Gradient check failed: {error:.3e} >= {args.tolerance:g}")
        return 1
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        height=args.height,
        width=args.width,
        min_objects=args.min_objects,
        max_objects=args.max_objects,
        occlusion_prob=args.occlusion_prob,
        perturbation=args.perturbation,
        seed=args.seed,
        taxonomy=args.taxonomy,
    )
    taxonomy = get_taxonomy(spec.taxonomy)
    scenes = synth_dataset(spec, args.count, threads=resolve_threads(args.threads))
    out = Path(args.out)
    gt_layout = DatasetLayout(out / "gt", taxonomy)
    pred_layout = DatasetLayout(out / "pred", taxonomy)
    for image_id, scene in scenes.items():
        gt_layout.save(image_id, scene.gt, image=render_colormap(scene.gt.semantic, taxonomy))
        pred_layout.save(image_id, scene.pred)
    certificate = certify(
        {k: s.pred for k, s in scenes.items()}, {k: s.gt for k, s in scenes.items()}, taxonomy
    )
    (out / "certificate.json").write_text(json.dumps(certificate.to_json_dict(), indent=2), encoding="utf-8")
    logger.info(f"Wrote {len(scenes)} scenes and the certificate to {out}")
    return 0


def cmd_render(args) -> int:
    taxonomy = get_taxonomy(args.taxonomy)
    if args.panoptic:
        label_map = load_panoptic(args.panoptic, taxonomy)
    else:
        label_map = load_semantic(args.semantic, taxonomy)
    save_image(render_colormap(label_map, taxonomy), args.out)
    logger.info(f"Colour map saved: {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=Config.SEED, help="Random seed")
    common.add_argument("--threads", type=int, default=1, help="Worker threads (OASS_THREADS overrides)")
    common.add_argument("--taxonomy", choices=sorted(TAXONOMIES), default="oass18", help="Class table")

    parser = argparse.ArgumentParser(prog="oass", description="Occlusion-aware seamless segmentation toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("evaluate", parents=[common], help="Five-metric evaluation of a prediction directory")
    p.add_argument("--pred", required=True, help="Prediction dataset directory")
    p.add_argument("--gt", required=True, help="Ground-truth dataset directory")
    p.add_argument("--out", required=True, help="Report JSON path (a .md table is written beside it)")
    p.set_defaults(handler=cmd_evaluate)

    p = commands.add_parser("fuse", parents=[common], help="Fuse branch outputs into the five OASS outputs")
    p.add_argument("--semantic", required=True, help="Semantic PNG or probability file")
    p.add_argument("--instances", required=True, help="Instance-branch detections JSON")
    p.add_argument("--amodal", required=True, help="Amodal-branch detections JSON")
    p.add_argument("--score-threshold", type=float, default=Config.SCORE_THRESHOLD)
    p.add_argument("--id", default="fused", help="Image id of the written bundle")
    p.add_argument("--out", required=True, help="Output dataset directory")
    p.set_defaults(handler=cmd_fuse)

    p = commands.add_parser("aomix", parents=[common], help="Amodal-oriented mix of a source and a target image")
    p.add_argument("--source-dir", required=True, help="Dataset directory holding the source image")
    p.add_argument("--source-id", required=True)
    p.add_argument("--batch-id", help="Image whose amodal masks build M_r (default: the source)")
    p.add_argument("--target-image", required=True)
    p.add_argument("--target-label", help="Target pseudo-label PNG for the non-pasted pixels")
    p.add_argument("--scale-min", type=float, default=Config.SCALE_MIN)
    p.add_argument("--scale-max", type=float, default=Config.SCALE_MAX)
    p.add_argument("--fill", type=_fill_value, default=(0, 0, 0), help="Fill colour R,G,B")
    p.add_argument("--strategy", choices=[s.value for s in AoMixStrategy], default=AoMixStrategy.AOMIX.value)
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_aomix)

    p = commands.add_parser("pseudolabel", parents=[common], help="Pseudo-labels and confidence weight")
    p.add_argument("--probs", required=True, help="Teacher probability file")
    p.add_argument("--tau", type=float, default=Config.TAU)
    p.add_argument("--student", help="Student probability file; prints the weighted target loss")
    p.add_argument("--out", help="Pseudo-label PNG path")
    p.set_defaults(handler=cmd_pseudolabel)

    p = commands.add_parser("ema", parents=[common], help="EMA update of teacher parameters")
    p.add_argument("--teacher", required=True, help="Teacher parameter tensor")
    p.add_argument("--student", required=True, help="Student parameter tensor")
    p.add_argument("--eta", type=float, default=Config.ETA)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--warmup", action="store_true", help="Use the min(1 - 1/(k+1), eta) warm-up decay")
    p.add_argument("--out", help="Output tensor path")
    p.set_defaults(handler=cmd_ema)

    p = commands.add_parser("gradcheck", parents=[common], help="Finite-difference gradient check")
    p.add_argument("--block", choices=BLOCKS, default="ua")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    p.add_argument("--inject-fault", action="store_true", help="Flip the sign of the input gradient")
    p.add_argument("--out", help="Directory for the checked input and parameter tensors")
    p.set_defaults(handler=cmd_gradcheck)

    p = commands.add_parser("synth", parents=[common], help="Synthetic gt/prediction dataset with certificate")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--min-objects", type=int, default=1)
    p.add_argument("--max-objects", type=int, default=4)
    p.add_argument("--occlusion-prob", type=float, default=0.5)
    p.add_argument("--perturbation", type=int, default=0)
    p.add_argument("--out", required=True, help="Output directory (gt/, pred/, certificate.json)")
    p.set_defaults(handler=cmd_synth)

    p = commands.add_parser("render", parents=[common], help="Colour-map rendering of a label map")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--semantic", help="Semantic PNG")
    source.add_argument("--panoptic", help="Panoptic PNG")
    p.add_argument("--out", required=True, help="Output RGB PNG")
    p.set_defaults(handler=cmd_render)
    return parser


def cli_dispatch(argv: list[str] | None = None) -> int:
    """Run one subcommand; 0 on success, 1 on invalid input, 2 on usage errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2

    logger.info(f"Running '{args.command}'")
    try:
        return args.handler(args)
    except (ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
