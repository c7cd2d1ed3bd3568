"""Command-line entry point: ``mwnl {augment,train,evaluate,schedule,loss}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import contextlib
import logging
import os
import sys

from . import config as config_mod
from . import imaging, metrics, policy, schedule, trainer
from . import loss as losses
from .datasets import load_manifest, read_features
from .errors import DataError, NumericalError, ParameterError
from .loss import ClassStats

log = logging.getLogger("mwnl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    p.add_argument("--config", help=f"key = value config file (default: ${config_mod.ENV_VAR})")
    group = p.add_argument_group("run configuration (override the config file)")
    for key, (typ, default, text) in config_mod.KEYS.items():
        shown = config_mod._fmt(default) if default != "" else "''"
        group.add_argument(f"--{key}", dest=key, default=None, metavar=typ.__name__.upper(),
                           help=f"{text} (default: {shown})")


def _config(args):
    overrides = {k: getattr(args, k) for k in config_mod.KEYS}
    return config_mod.load_config(args.config, overrides)


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return open(path, "w", newline="")


# -- augment ------------------------------------------------------------------

def cmd_augment(args):
    cfg = _config(args)
    pcfg = cfg.policy()
    manifest = load_manifest(args.manifest)
    os.makedirs(args.out, exist_ok=True)
    images, names = [], []
    for i, sid in enumerate(manifest.ids):
        try:
            images.append(imaging.read_image(manifest.resolve(sid)))
        except (OSError, ValueError) as exc:
            log.warning("skipping %s: %s", sid, exc)
            images.append(None)
        names.append(f"{i:06d}_{os.path.splitext(os.path.basename(sid))[0]}.png")
    if all(img is None for img in images):
        raise DataError("no readable images in the manifest")

    replay = None
    if args.replay:
        with open(args.replay, newline="") as fh:
            replay = dict(policy.read_plan_log(fh))

    records = []
    for i, img in enumerate(images):
        if img is None:
            continue
        if cfg.partner_source == "batch":
            b0 = (i // cfg.augment_batch) * cfg.augment_batch
            pool = [x if x is not None else img for x in images[b0:b0 + cfg.augment_batch]]
        else:
            pool = [x if x is not None else img for x in images]
        image_id = manifest.ids[i]
        if replay is not None:
            if image_id not in replay:
                raise DataError(f"plan log has no entry for {image_id!r}")
            plan = replay[image_id]
            out = policy.execute_plan(img, plan, pool, pcfg.crop_size)
        else:
            out, plan = policy.augment(img, pcfg, cfg.seed, i, args.epoch, pool)
        imaging.write_image(os.path.join(args.out, names[i]), out, cfg.jpeg_quality)
        records.append((image_id, plan))
    with open(os.path.join(args.out, "plans.csv"), "w", newline="") as fh:
        policy.write_plan_log(fh, records, pcfg.n)
    return EXIT_OK


# -- train --------------------------------------------------------------------

def _dataset(cfg):
    if cfg.features:
        return read_features(cfg.features)
    return trainer.make_synthetic(cfg.synth_counts_list(), cfg.input_dim, cfg.synth_separation,
                                  cfg.synth_noise, cfg.seed)


def cmd_train(args):
    cfg = _config(args)
    ds = _dataset(cfg)
    result = trainer.train(ds, cfg.train(), cfg.loss(), cfg.schedule(), seed=cfg.seed)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "epoch_log.csv"), "w", newline="") as fh:
        trainer.write_epoch_log(fh, result.log, ds.num_classes)
    with open(os.path.join(args.out, "checkpoint.txt"), "w") as fh:
        trainer.save_checkpoint(fh, result.params)
    return EXIT_OK


# -- evaluate -----------------------------------------------------------------

def cmd_evaluate(args):
    cfg = _config(args)
    with open(args.predictions, newline="") as fh:
        ids, y, scores = metrics.read_predictions(fh)
    k = cfg.k_crops if args.crops else None
    if args.crops or len(set(ids)) != len(ids):
        ids, y, scores = metrics.group_crops(ids, y, scores, k, cfg.crop_average)
    elif cfg.crop_average == "logits":
        scores = losses.sigmoid(scores)
    if args.manifest:
        m = load_manifest(args.manifest)
        known = dict(m.entries)
        for sid, label in zip(ids, y):
            if sid not in known:
                raise DataError(f"sample {sid!r} is not in the manifest")
            if known[sid] != label:
                raise DataError(f"sample {sid!r}: true class {label} but manifest says {known[sid]}")
        missing = [sid for sid in m.ids if sid not in set(ids)]
        if missing:
            raise DataError(f"sample {missing[0]!r} from the manifest has no predictions")
    with _open_out(args.out) as fh:
        fh.write(metrics.format_report(metrics.report(y, scores)))
    return EXIT_OK


# -- schedule -----------------------------------------------------------------

def cmd_schedule(args):
    cfg = _config(args)
    with _open_out(args.out) as fh:
        schedule.write_schedule(fh, cfg.schedule())
    return EXIT_OK


# -- loss ---------------------------------------------------------------------

def cmd_loss(args):
    cfg = _config(args)
    lcfg = cfg.loss()
    with open(args.logits, newline="") as fh:
        ids, y, z = losses.read_logits(fh)
    counts = config_mod._floats(cfg.class_counts)
    stats = ClassStats(tuple(int(c) for c in counts) if counts else (1,) * z.shape[1])
    beta = float(cfg.beta_eff) if cfg.beta_eff.strip() else None
    values, grads = losses.loss_batch(z, y, stats, lcfg, beta)
    with _open_out(args.out) as fh:
        losses.write_loss_rows(fh, ids, values, grads)
    return EXIT_OK


# -- wiring -------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="mwnl", description=__doc__.splitlines()[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter,
                     epilog=__doc__.split("\n", 2)[2])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("augment", help="augment images listed in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory for crops and plans.csv")
    p.add_argument("--replay", help="plan log to replay instead of sampling new plans")
    p.add_argument("--epoch", type=int, default=0, help="epoch index mixed into the per-image streams")
    _add_config_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the reference classifier")
    p.add_argument("--out", required=True, help="directory for epoch_log.csv and checkpoint.txt")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics report from a predictions file")
    p.add_argument("predictions")
    p.add_argument("--manifest", help="check sample ids and classes against this manifest")
    p.add_argument("--crops", action="store_true", help="require k_crops rows per sample and average them")
    p.add_argument("--out", help="report file (default: stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("schedule", help="dump epoch, beta, lr rows")
    p.add_argument("--out", help="output file (default: stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("loss", help="loss values and gradients for a logits file")
    p.add_argument("logits")
    p.add_argument("--out", help="output file (default: stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_loss)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"mwnl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"mwnl: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"mwnl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
