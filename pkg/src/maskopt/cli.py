"""Command-line surface: mask synthesis, undersampling, training, and
method comparison.

Configuration comes from INI files (`[section] key = value`) with CLI
flags taking precedence; unknown keys are rejected.  Every run writes a
config snapshot into its output directory so it can be reproduced.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing or mismatched files), 3 numerical failure (training divergence).
"""

import argparse
import configparser
import math
import os
import sys

import numpy as np

from .baselines import _FAMILIES, BaselineSpec, baseline_mask
from .core import (load_complex, load_image, load_mask, load_pgm, save_image,
                   save_mask, save_pgm, save_probability)
from .data import load_dataset, make_phantom_set, normalize
from .pipeline import (TrainConfig, TrainingDiverged, compare_methods,
                       default_probability, psnr, save_probability_profile,
                       save_training_log, train, undersampled_image)
from .sampling import (ConstraintConfig, generate_constrained_mask,
                       save_region_reports)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_MASK_FAMILIES = _FAMILIES + ("probabilistic",)


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this tool reserves 2 for data
    errors, so remap to 1."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_size(text):
    parts = text.lower().split("x")
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad --size {text!r}; expected N or MxN")
    if len(dims) == 1:
        dims = dims * 2
    if len(dims) != 2 or min(dims) < 1:
        raise CliError(EXIT_USAGE, f"bad --size {text!r}; expected N or MxN")
    return dims


def _read_config(path, allowed):
    """Parse an INI config, rejecting unknown sections or keys.

    `allowed` maps section name to the set of permitted keys.  Returns a
    dict of dicts of strings.
    """
    cp = configparser.ConfigParser()
    loaded = cp.read(path)
    if not loaded:
        raise CliError(EXIT_DATA, f"config file not found: {path}")
    out = {}
    for section in cp.sections():
        if section not in allowed:
            raise CliError(EXIT_USAGE, f"{path}: unknown section [{section}]")
        keys = dict(cp[section])
        bad = set(keys) - allowed[section]
        if bad:
            raise CliError(EXIT_USAGE,
                           f"{path}: unknown key(s) in [{section}]: {', '.join(sorted(bad))}")
        out[section] = keys
    return out


def _write_snapshot(out_dir, sections):
    cp = configparser.ConfigParser()
    for name, kv in sections.items():
        cp[name] = {k: str(v) for k, v in kv.items()}
    with open(os.path.join(out_dir, "config_snapshot.ini"), "w") as fh:
        cp.write(fh)


_DATASET_KEYS = {"kind", "count", "size", "seed", "path", "split"}


def _load_configured_dataset(section):
    kind = section.get("kind", "phantom")
    if kind == "phantom":
        count = int(section.get("count", "32"))
        size = int(section.get("size", "64"))
        seed = int(section.get("seed", "11"))
        return make_phantom_set(count, size, seed)
    if kind == "manifest":
        if "path" not in section:
            raise CliError(EXIT_USAGE, "[dataset] kind=manifest requires path")
        try:
            return load_dataset(section["path"], split=section.get("split", "test"))
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_DATA, f"cannot load dataset: {exc}")
    raise CliError(EXIT_USAGE, f"unknown dataset kind {kind!r}")


def _mask_preview(out_dir, name, bits):
    save_pgm(os.path.join(out_dir, name), bits.astype(np.float64))


def cmd_mask(args):
    m, n = _parse_size(args.size)
    if not 0.0 < args.rate <= 1.0:
        raise CliError(EXIT_USAGE, f"rate must be in (0, 1], got {args.rate}")
    os.makedirs(args.out, exist_ok=True)
    if args.family == "probabilistic":
        ccfg = ConstraintConfig(target_rate=args.rate, seed=args.seed)
        try:
            p_u = default_probability(m, n, ccfg)
            mask, reports = generate_constrained_mask(p_u, ccfg)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, str(exc))
        save_probability(os.path.join(args.out, "probability.txt"), p_u)
        save_region_reports(os.path.join(args.out, "regions.csv"), reports)
    else:
        try:
            spec = BaselineSpec(family=args.family, m=m, n=n,
                                target_rate=args.rate, seed=args.seed)
            mask = baseline_mask(spec)
        except ValueError as exc:
            raise CliError(EXIT_USAGE, str(exc))
    save_mask(os.path.join(args.out, "mask.txt"), mask)
    _mask_preview(args.out, "mask.pgm", mask.bits)
    _write_snapshot(args.out, {"mask": {
        "family": args.family, "rate": args.rate, "size": args.size,
        "seed": args.seed}})
    print(f"family={args.family} rate={mask.rate:.4f} size={m}x{n} -> {args.out}")
    return EXIT_OK


def cmd_undersample(args):
    try:
        mask = load_mask(args.mask)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"cannot load mask: {exc}")
    try:
        if args.kspace is not None:
            k = load_complex(args.kspace)
            truth = None
        else:
            if args.image.lower().endswith(".pgm"):
                truth = normalize(load_pgm(args.image))
            else:
                truth = load_image(args.image)
            from .data import to_kspace
            k = to_kspace(truth)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_DATA, f"cannot load input: {exc}")
    if (k.m, k.n) != (mask.m, mask.n):
        raise CliError(EXIT_DATA,
                       f"mask {mask.m}x{mask.n} does not match data {k.m}x{k.n}")
    x_u = undersampled_image(k, mask)
    os.makedirs(args.out, exist_ok=True)
    save_image(os.path.join(args.out, "undersampled.img"), x_u)
    save_pgm(os.path.join(args.out, "undersampled.pgm"),
             np.clip(x_u.pixels, 0.0, 1.0))
    _write_snapshot(args.out, {"undersample": {
        "mask": args.mask, "kspace": args.kspace or "",
        "image": args.image or ""}})
    if truth is not None:
        value = psnr(x_u, truth)
        text = "inf" if math.isinf(value) else f"{value:.4f}"
        print(f"psnr_u={text} rate={mask.rate:.4f}")
    else:
        print(f"rate={mask.rate:.4f}")
    return EXIT_OK


_TRAIN_KEYS = {"rate", "depth", "epochs", "batch", "seed", "channels",
               "initial_lr", "weight_decay", "region_size", "p_min", "epsilon",
               "lambda1", "lambda2", "decay_step", "min_lr"}


def _train_config(section, args):
    kv = dict(section)
    if args.rate is not None:
        kv["rate"] = str(args.rate)
    if args.depth is not None:
        kv["depth"] = str(args.depth)
    if args.epochs is not None:
        kv["epochs"] = str(args.epochs)
    if args.seed is not None:
        kv["seed"] = str(args.seed)
    if "rate" not in kv:
        raise CliError(EXIT_USAGE, "training rate missing: set [train] rate or --rate")
    try:
        return TrainConfig(
            target_rate=float(kv["rate"]),
            recnet_depth=int(kv.get("depth", "5")),
            channels=int(kv.get("channels", "16")),
            lambda1=float(kv.get("lambda1", "1.0")),
            lambda2=float(kv.get("lambda2", "1.0")),
            batch_size=int(kv.get("batch", "16")),
            max_epochs=int(kv.get("epochs", "200")),
            initial_lr=float(kv.get("initial_lr", "1e-3")),
            decay_step=int(kv.get("decay_step", "20")),
            min_lr=float(kv.get("min_lr", "1e-8")),
            weight_decay=float(kv.get("weight_decay", "1e-5")),
            epsilon=float(kv.get("epsilon", "0.001")),
            region_size=int(kv.get("region_size", "10")),
            p_min=float(kv.get("p_min", "0.01")),
            seed=int(kv.get("seed", "0")),
        ), kv
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"bad training config value: {exc}")


def cmd_train(args):
    conf = _read_config(args.config, {"train": _TRAIN_KEYS,
                                      "dataset": _DATASET_KEYS})
    cfg, effective = _train_config(conf.get("train", {}), args)
    ds = _load_configured_dataset(conf.get("dataset", {}))
    os.makedirs(args.out, exist_ok=True)
    checkpoint_dir = os.path.join(args.out, "checkpoint")
    resume_from = checkpoint_dir if args.resume else None
    if args.resume and not os.path.exists(os.path.join(checkpoint_dir, "meta.ini")):
        raise CliError(EXIT_DATA, f"no checkpoint to resume in {checkpoint_dir}")
    try:
        result = train(ds, cfg, out_dir=checkpoint_dir, resume_from=resume_from)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    save_probability(os.path.join(args.out, "probability.txt"), result.p_u)
    save_mask(os.path.join(args.out, "mask.txt"), result.mask)
    from .recon import save_network
    if result.net is not None:
        save_network(os.path.join(args.out, "network.bin"), result.net)
    save_training_log(os.path.join(args.out, "training_log.csv"), result.log)
    save_region_reports(os.path.join(args.out, "regions.csv"), result.region_reports)
    save_probability_profile(os.path.join(args.out, "profile.csv"), result.p_u)
    _mask_preview(args.out, "mask.pgm", result.mask.bits)
    save_pgm(os.path.join(args.out, "probability.pgm"), result.p_u.probs)
    _write_snapshot(args.out, {"train": effective,
                               "dataset": conf.get("dataset", {})})
    final = result.log[-1]
    print(f"epochs={final['epoch']} L_joint={final['L_joint']:.6g} "
          f"val_psnr_u={final['val_psnr_u']:.4f} "
          f"val_psnr_rec={final['val_psnr_rec']:.4f} -> {args.out}")
    return EXIT_OK


_COMPARE_KEYS = {"rates", "families", "artifacts", "seed"}


def _probabilistic_artifact(art_dir, rate):
    """Trained-mask bundle for one rate, or None when absent."""
    from .recon import load_network
    sub = os.path.join(art_dir, f"probabilistic_{int(round(rate * 100))}")
    mask_path = os.path.join(sub, "mask.txt")
    if not os.path.exists(mask_path):
        return None
    mask = load_mask(mask_path)
    net_path = os.path.join(sub, "network.bin")
    net = load_network(net_path) if os.path.exists(net_path) else None
    return mask, net


def cmd_compare(args):
    conf = _read_config(args.config, {"compare": _COMPARE_KEYS,
                                      "dataset": _DATASET_KEYS})
    section = conf.get("compare", {})
    rates = [float(r) for r in section.get("rates", "0.2, 0.3").split(",")]
    families = [f.strip() for f in
                section.get("families", ", ".join(_MASK_FAMILIES)).split(",")]
    for fam in families:
        if fam not in _MASK_FAMILIES:
            raise CliError(EXIT_USAGE, f"unknown family {fam!r}")
    seed = args.seed if args.seed is not None else int(section.get("seed", "0"))
    ds = _load_configured_dataset(conf.get("dataset", {}))
    m, n = ds.images[0].m, ds.images[0].n
    art_dir = section.get("artifacts", "")
    artifacts = {}
    for rate in rates:
        for fam in families:
            if fam == "probabilistic":
                entry = _probabilistic_artifact(art_dir, rate) if art_dir else None
                if entry is not None:
                    artifacts[(fam, rate)] = entry
            else:
                spec = BaselineSpec(family=fam, m=m, n=n, target_rate=rate, seed=seed)
                artifacts[(fam, rate)] = (baseline_mask(spec), None)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "comparison.csv")
    header, rows = compare_methods(ds, rates, families, artifacts,
                                   out_path=out_csv, threads=args.threads)
    for fam in families:
        entry = artifacts.get((fam, rates[0]))
        if entry is None:
            continue
        mask, net = entry
        x_u = undersampled_image(ds.kspace[0], mask)
        img = x_u.pixels
        if net is not None:
            residual, _ = net.forward(img)
            img = img + residual
        save_pgm(os.path.join(args.out, f"preview_{fam}.pgm"),
                 np.clip(img, 0.0, 1.0))
    _write_snapshot(args.out, {"compare": {
        "rates": ", ".join(str(r) for r in rates),
        "families": ", ".join(families),
        "artifacts": art_dir, "seed": seed},
        "dataset": conf.get("dataset", {})})
    print(f"wrote {out_csv} ({len(rows)} rates x {len(families)} families)")
    return EXIT_OK


def _build_parser():
    parser = _Parser(prog="maskopt",
                     description="k-space undersampling mask optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    p_mask = sub.add_parser("mask", help="generate an undersampling mask")
    p_mask.add_argument("--family", choices=_MASK_FAMILIES, required=True)
    p_mask.add_argument("--rate", type=float, required=True)
    p_mask.add_argument("--size", default="64", help="N or MxN")
    p_mask.add_argument("--seed", type=int, default=0)
    p_mask.add_argument("--out", default="mask_out")
    p_mask.set_defaults(func=cmd_mask)

    p_und = sub.add_parser("undersample", help="apply a mask to k-space or an image")
    src = p_und.add_mutually_exclusive_group(required=True)
    src.add_argument("--kspace", help="complex-grid file")
    src.add_argument("--image", help="image file (.img or .pgm); PSNR is reported")
    p_und.add_argument("--mask", required=True)
    p_und.add_argument("--out", default="undersample_out")
    p_und.set_defaults(func=cmd_undersample)

    p_train = sub.add_parser("train", help="jointly train mask probabilities and network")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--rate", type=float)
    p_train.add_argument("--depth", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--resume", action="store_true")
    p_train.add_argument("--out", default="train_out")
    p_train.set_defaults(func=cmd_train)

    p_cmp = sub.add_parser("compare", help="compare mask families on a dataset")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--seed", type=int)
    p_cmp.add_argument("--threads", type=int, default=0)
    p_cmp.add_argument("--out", default="compare_out")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"maskopt: {exc}", file=sys.stderr)
        return exc.code
    except TrainingDiverged as exc:
        print(f"maskopt: training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"maskopt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"maskopt: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
