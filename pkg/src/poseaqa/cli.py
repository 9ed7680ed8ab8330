"""Command-line entry point: synth, train, eval, segment, score, gradcheck."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import config as cfgmod
from .config import ConfigError, RunConfig


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help=f"JSON config file (default: ${cfgmod.CONFIG_ENV}, else built-in defaults)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. --set model.d=16 (repeatable)")
    p.add_argument("--seed", type=int, help="global seed; wins over the config file")
    p.add_argument("--threads", type=int, default=1, help="BLAS threads (1 gives bitwise reproducibility)")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="poseaqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dive corpus")
    p.add_argument("--items", type=int, help="training items (default synth.train_items)")
    p.add_argument("--test-items", type=int, help="test items (default synth.test_items)")
    p.add_argument("--out", help="corpus directory (default paths.corpus_dir)")

    p = sub.add_parser("train", parents=[common], help="train all modules on the corpus train split")
    p.add_argument("--corpus")
    p.add_argument("--out", help="checkpoint directory (default paths.checkpoint_dir)")

    p = sub.add_parser("eval", parents=[common], help="voted evaluation on the corpus test split")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint", help="model file (default <checkpoint_dir>/model.dpw)")
    p.add_argument("--out", help="report directory (default paths.output_dir)")
    p.add_argument("--L", type=int, help="references per test item (default eval.L)")

    p = sub.add_parser("segment", parents=[common], help="predict keyframes for one video")
    p.add_argument("--video", required=True, help="video id in the corpus manifest")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.add_argument("--save-probs", action="store_true", help="write probabilities (CSV) and a figure")

    p = sub.add_parser("score", parents=[common], help="score a query against one reference")
    p.add_argument("--query", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--keyframes", choices=["predicted", "ground_truth"], default="predicted")

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference checks of every layer kind")
    p.add_argument("--seeds", type=int, default=1, help="number of random seeds (starting at --seed)")
    return parser


def _emit(obj):
    print(json.dumps(obj), flush=True)


# ----------------------------------------------------------------------------
# subcommands


def _corpus(cfg: RunConfig, override):
    from .posedata import load_corpus

    return load_corpus(override or cfg.paths.corpus_dir)


def _prepare(cfg: RunConfig, corpus, items):
    from .pipeline import prepare_video

    m = cfg.model
    return [prepare_video(corpus.load_video(it, m.J, m.U), P=m.P, crop_frac=m.crop_frac,
                          grid=m.descriptor_grid) for it in items]


def _models(cfg: RunConfig, checkpoint=None):
    from .pipeline import ModelSet

    models = ModelSet(cfg.model_config(), cfg.score_weights(), seed=cfg.seed)
    if checkpoint is not None:
        models.load(checkpoint)
    return models


def _checkpoint(cfg, override):
    path = Path(override) if override else Path(cfg.paths.checkpoint_dir) / "model.dpw"
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return path


def cmd_synth(cfg: RunConfig, args):
    from .posedata import corpus_metadata, synth_corpus, write_corpus
    from .posedata.synth import S_MAX

    n_train = cfg.synth.train_items if args.items is None else args.items
    n_test = cfg.synth.test_items if args.test_items is None else args.test_items
    if n_train + n_test < 1:
        raise ValueError("corpus must contain at least one item")
    out = Path(args.out or cfg.paths.corpus_dir)
    videos = synth_corpus(n_train, n_test, cfg.seed, cfg.synth.judge_noise, cfg.synth.image_size)
    write_corpus(videos, out, S_MAX, 0.0, corpus_metadata(cfg.synth.judge_noise, cfg.synth.image_size))
    cfgmod.write_config(cfg, out)
    _emit({"command": "synth", "corpus": str(out), "train_items": n_train, "test_items": n_test})
    return 0


def cmd_train(cfg: RunConfig, args):
    from .plotting import loss_curves
    from .trainer import fit

    corpus = _corpus(cfg, args.corpus)
    train = _prepare(cfg, corpus, corpus.split("train"))
    models = _models(cfg)
    out = Path(args.out or cfg.paths.checkpoint_dir)
    cfgmod.write_config(cfg, out)

    def log(m):
        print(json.dumps({"epoch": m.epoch, "loss": m.loss, "asm": m.asm, "mse": m.mse,
                          "keyframe_source": m.keyframe_source}), file=sys.stderr, flush=True)

    history = fit(models, train, cfg.train_config(), out_dir=out, log=log)
    loss_curves(history, out / "loss_curves.png")
    last = history[-1]
    _emit({"command": "train", "checkpoint": str(out / "model.dpw"), "epochs": len(history),
           "final_loss": last.loss, "final_asm": last.asm, "final_mse": last.mse})
    return 0


def cmd_eval(cfg: RunConfig, args):
    from .evaluator import evaluate
    from .plotting import prediction_scatter

    corpus = _corpus(cfg, args.corpus)
    train = _prepare(cfg, corpus, corpus.split("train"))
    test = _prepare(cfg, corpus, corpus.split("test"))
    if not test:
        raise ValueError("corpus has no test split")
    models = _models(cfg, _checkpoint(cfg, args.checkpoint))
    L = cfg.eval.L if args.L is None else args.L
    report = evaluate(models, test, train, L, corpus.score_range, tuple(cfg.eval.thresholds))
    out = Path(args.out or cfg.paths.output_dir)
    cfgmod.write_config(cfg, out)
    report.write(out / "eval_report.json")
    report.write_csv(out / "eval_items.csv")
    prediction_scatter([it["gt"] for it in report.items], [it["prediction"] for it in report.items],
                       out / "eval_scatter.png", corpus.score_range,
                       title=f"rho={report.rho:.3f}  R-l2x100={report.r_l2_x100:.3f}")
    _emit({"command": "eval", "report": str(out / "eval_report.json"), "rho": report.rho,
           "r_l2_x100": report.r_l2_x100, "aiou": {str(k): v for k, v in report.aiou.items()},
           "L": L, "items": len(report.items)})
    return 0


def _find(corpus, vid):
    for it in corpus.items:
        if it.id == vid:
            return it
    raise KeyError(f"video {vid!r} not in the corpus manifest")


def cmd_segment(cfg: RunConfig, args):
    import numpy as np

    from .plotting import segmentation_plot

    corpus = _corpus(cfg, args.corpus)
    (video,) = _prepare(cfg, corpus, [_find(corpus, args.video)])
    models = _models(cfg, _checkpoint(cfg, args.checkpoint))
    probs = models.segment_probs(video).data
    K = models.keyframes(video, "predicted", probs=models.segment_probs(video))
    result = {"id": video.id, "keyframes": list(K.transitions)}
    if args.save_probs:
        out = Path(args.out or cfg.paths.output_dir)
        cfgmod.write_config(cfg, out)
        path = out / f"{video.id}_probs.csv"
        header = ",".join(f"transition_{h + 1}" for h in range(probs.shape[1]))
        np.savetxt(path, probs, delimiter=",", header=header, comments="", fmt="%.17g")
        gt = list(video.gt_keyframes.transitions) if video.gt_keyframes is not None else None
        segmentation_plot(probs, out / f"{video.id}_segmentation.png", list(K.transitions), gt, video.id)
        result["probs_path"] = str(path)
    _emit(result)
    return 0


def cmd_score(cfg: RunConfig, args):
    from .pipeline import mmp

    corpus = _corpus(cfg, args.corpus)
    q, e = _prepare(cfg, corpus, [_find(corpus, args.query), _find(corpus, args.reference)])
    models = _models(cfg, _checkpoint(cfg, args.checkpoint))
    result = mmp(models, q, e, args.keyframes, corpus.score_range)
    _emit(result.to_json())
    return 0


def cmd_gradcheck(cfg: RunConfig, args):
    from .gradsuite import run_suite

    ok = True
    for seed in range(cfg.seed, cfg.seed + args.seeds):
        for r in run_suite(seed):
            ok &= r.passed
            print(f"{r.component:24s} seed={seed:<4d} {'PASS' if r.passed else 'FAIL'} "
                  f"max_rel_error={r.worst:.3e} tolerance={r.tolerance:.0e}", flush=True)
    return 0 if ok else 1


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "segment": cmd_segment,
            "score": cmd_score, "gradcheck": cmd_gradcheck}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, args.set, args.seed)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "path": exc.path, "message": str(exc)}), file=sys.stderr)
        return 2
    if args.threads < 1:
        print(json.dumps({"error": "config", "path": "--threads", "message": "must be at least 1"}),
              file=sys.stderr)
        return 2
    try:
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](cfg, args)
    except Exception as exc:  # one machine-parsable line, never a traceback
        print(json.dumps({"error": "runtime", "command": args.command, "type": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
