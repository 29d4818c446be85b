"""Command-line front end.

Subcommands: synth, bank build, bank density, coreset, score, eval,
bench.  Exit codes follow a fixed contract: 0 success, 1 usage error
(bad flags, bad config keys, values outside documented ranges), 2 data
or format error (unreadable/invalid inputs).  Diagnostics go to stderr;
results go to files or stdout.

An optional ``--config`` file supplies flat ``key=value`` defaults
(blank lines and ``#`` comments ignored); explicit flags override the
file, and the file overrides built-in defaults.  All randomness flows
from the effective seed, so identical argv + inputs produce identical
output bytes.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .bank import (
    LocalDensityBank,
    aggregate_hierarchies,
    build_memory_bank,
    learn_local_density,
    load_bank,
    load_memory_bank,
    save_bank,
    save_memory_bank,
)
from .coreset import apply_selection, greedy_kcenter
from .exceptions import DataError, FormatError, PatchBankError
from .metrics import BENCHMARK_HEADER, auroc, benchmark_fps
from .scoring import ScorerConfig, score_image
from .synth import DefectConfig, generate_samples
from .tensor_io import (
    FeatureTensor,
    ManifestRow,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)

_IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class _UsageError(Exception):
    """Flag or config problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems exit 1; argparse's default of 2 is reserved
        # for data errors here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise _UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def _merge_options(args, defaults: dict) -> dict:
    """Layer built-in defaults, then config-file values, then explicit flags."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _read_config_file(config_path).items():
            if key not in defaults:
                raise _UsageError(f"unknown config key {key!r} for this subcommand")
            base = defaults[key]
            try:
                if isinstance(base, bool):
                    merged[key] = raw.lower() in ("1", "true", "yes", "on")
                elif isinstance(base, int):
                    merged[key] = int(raw)
                elif isinstance(base, float):
                    merged[key] = float(raw)
                else:
                    merged[key] = raw
            except ValueError as exc:
                raise _UsageError(f"config key {key!r}: {exc}") from exc
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _list_images(directory: str) -> list:
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"not a directory: {directory}")
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_EXTS)
    if not paths:
        raise DataError(f"no images found in {directory}")
    return paths


def _load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB") if img.mode not in ("L", "RGB") else img)
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def _load_mask(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return (np.asarray(img.convert("L")) != 0).astype(np.uint8)
    except OSError as exc:
        raise DataError(f"cannot read mask {path}: {exc}") from exc


def _load_any_bank(path: str):
    """Density-annotated bank if the file carries densities, else a
    plain memory bank."""
    try:
        return load_bank(path)
    except (FormatError, DataError):
        return load_memory_bank(path)


def _feature_pairs(directory: str) -> list:
    """(stem, h2 path, h3 path) triples found in a feature dump directory."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"not a directory: {directory}")
    pairs = []
    for h2 in sorted(root.glob("*.h2" + ".rebf")):
        stem = h2.name[: -len(".h2.rebf")]
        h3 = root / (stem + ".h3.rebf")
        if not h3.is_file():
            raise DataError(f"missing hierarchy-3 tensor for {stem!r} in {directory}")
        pairs.append((stem, h2, h3))
    if not pairs:
        raise DataError(f"no feature tensor pairs (*.h2.rebf / *.h3.rebf) in {directory}")
    return pairs


def _load_feature_sets(directory: str, pool_window: int) -> list:
    out = []
    for stem, h2, h3 in _feature_pairs(directory):
        phi2 = FeatureTensor.read(h2)
        phi3 = FeatureTensor.read(h3)
        out.append((stem, aggregate_hierarchies(phi2, phi3, pool_window)))
    return out


def _scorer_config(opts: dict) -> ScorerConfig:
    try:
        return ScorerConfig(method=opts["method"], k=opts["k"], alpha=opts["alpha"])
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _parse_map_size(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise _UsageError(f"map size must look like 256x256, got {text!r}")
    try:
        h, w = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise _UsageError(f"map size must look like 256x256, got {text!r}") from exc
    if h < 1 or w < 1:
        raise _UsageError(f"map size must be positive, got {text!r}")
    return h, w


# ---------------------------------------------------------------- synth

_SYNTH_DEFAULTS = {
    "count": 10,
    "seed": 0,
    "shape_kind": "random",
    "fill_kind": "random",
    "fuse_mode": "random",
    "area_min": 0.01,
    "area_max": 0.06,
    "scar_aspect_min": 2.0,
    "scar_aspect_max": 6.0,
    "noise_mean": 128.0,
    "noise_fluctuation": 64.0,
    "blend_min": 0.3,
    "blend_max": 0.9,
    "control_points_min": 4,
    "control_points_max": 8,
    "normal_prob": 0.0,
}


def _cmd_synth(args) -> int:
    opts = _merge_options(args, _SYNTH_DEFAULTS)
    try:
        cfg = DefectConfig(
            shape_kind=opts["shape_kind"],
            fill_kind=opts["fill_kind"],
            fuse_mode=opts["fuse_mode"],
            area_range=(opts["area_min"], opts["area_max"]),
            scar_aspect_range=(opts["scar_aspect_min"], opts["scar_aspect_max"]),
            noise_mean=opts["noise_mean"],
            noise_fluctuation=opts["noise_fluctuation"],
            blend_range=(opts["blend_min"], opts["blend_max"]),
            control_points=(opts["control_points_min"], opts["control_points_max"]),
            normal_prob=opts["normal_prob"],
            seed=opts["seed"],
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    if opts["count"] < 1:
        raise _UsageError(f"--count must be positive, got {opts['count']}")

    image_paths = _list_images(args.input_dir)
    images = [_load_image(p) for p in image_paths]
    saliencies = None
    if args.saliency_dir:
        by_stem = {p.stem: p for p in Path(args.saliency_dir).iterdir()
                   if p.suffix.lower() in _IMAGE_EXTS}
        saliencies = []
        for p in image_paths:
            if p.stem not in by_stem:
                raise DataError(f"no saliency mask for {p.name} in {args.saliency_dir}")
            saliencies.append(_load_mask(by_stem[p.stem]))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    digits = max(5, len(str(opts["count"] - 1)))
    for i, sample in enumerate(
        generate_samples(images, saliencies, cfg, opts["count"])
    ):
        name = f"sample_{i:0{digits}d}"
        img_name, mask_name = name + ".png", name + "_mask.png"
        Image.fromarray(sample.image).save(out_dir / img_name)
        Image.fromarray(sample.mask * np.uint8(255)).save(out_dir / mask_name)
        rows.append(ManifestRow(img_name, sample.label, mask_name))
    write_manifest(rows, out_dir / "synth.rebm")
    print(f"wrote {len(rows)} samples and synth.rebm to {out_dir}")
    return 0


# ----------------------------------------------------------------- bank

def _cmd_bank_build(args) -> int:
    opts = _merge_options(args, {"pool_window": 3})
    sets = [s for _, s in _load_feature_sets(args.features_dir, opts["pool_window"])]
    bank = build_memory_bank(sets)
    save_memory_bank(bank, args.out)
    print(f"bank of {bank.size} x {bank.dim} entries -> {args.out}")
    return 0


def _cmd_bank_density(args) -> int:
    opts = _merge_options(args, {"k": 9})
    bank = load_memory_bank(args.bank)
    try:
        ld = learn_local_density(bank, opts["k"])
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    save_bank(ld, args.out)
    print(f"densities (k={opts['k']}) for {ld.size} entries -> {args.out}")
    return 0


# -------------------------------------------------------------- coreset

def _cmd_coreset(args) -> int:
    opts = _merge_options(args, {"proportion": 0.1, "seed_index": 0})
    bank = load_memory_bank(args.bank)
    try:
        selection = greedy_kcenter(bank, opts["proportion"], opts["seed_index"])
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    small = apply_selection(bank, selection)
    save_memory_bank(small, args.out)
    print(f"kept {small.size} of {bank.size} entries -> {args.out}")
    return 0


# ---------------------------------------------------------------- score

_SCORE_DEFAULTS = {
    "method": "ldknn",
    "k": 9,
    "alpha": 1.0,
    "pool_window": 3,
    "smoothing_sigma": 0.0,
}


def _cmd_score(args) -> int:
    opts = _merge_options(args, _SCORE_DEFAULTS)
    cfg = _scorer_config(opts)
    bank = _load_any_bank(args.bank)
    if cfg.method == "ldknn" and not isinstance(bank, LocalDensityBank):
        raise DataError(
            f"{args.bank} has no densities; run `bank density` first or "
            "pick another --method"
        )
    map_size = _parse_map_size(args.map_size) if args.maps_dir else None
    if args.maps_dir:
        Path(args.maps_dir).mkdir(parents=True, exist_ok=True)
    lines = []
    for stem, patches in _load_feature_sets(args.features_dir, opts["pool_window"]):
        result = score_image(patches, bank, cfg, map_size=map_size,
                             smoothing_sigma=opts["smoothing_sigma"])
        lines.append(f"{stem}\t{result.image_score:.9g}")
        if args.maps_dir:
            write_tensor(result.pixel_map.astype(np.float32),
                         Path(args.maps_dir) / (stem + ".map.rebf"))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"scored {len(lines)} images -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- eval

def _read_scores(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read scores file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected stem<TAB>score")
        try:
            out[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad score {parts[1]!r}") from exc
    if not out:
        raise DataError(f"no scores in {path}")
    return out


def _cmd_eval(args) -> int:
    scores = _read_scores(args.scores)
    manifest_dir = Path(args.manifest).parent
    rows = read_manifest(args.manifest)
    labels, values = [], []
    for row in rows:
        stem = Path(row.image_path).stem
        if stem not in scores:
            raise DataError(f"no score for manifest entry {row.image_path!r}")
        labels.append(1 if row.label != 0 else 0)
        values.append(scores[stem])
    im = auroc(np.array(labels), np.array(values))
    print(f"im_auroc\t{im:.9f}")

    if args.maps_dir:
        flat_labels, flat_scores = [], []
        for row in rows:
            stem = Path(row.image_path).stem
            map_path = Path(args.maps_dir) / (stem + ".map.rebf")
            if not map_path.is_file():
                raise DataError(f"no pixel map for {row.image_path!r} in {args.maps_dir}")
            pixel_map = read_tensor(map_path)
            if pixel_map.ndim != 2:
                raise DataError(f"{map_path} is not a 2-D map")
            if row.mask_path:
                mask_file = Path(row.mask_path)
                if not mask_file.is_absolute():
                    mask_file = manifest_dir / mask_file
                gt = _load_mask(mask_file)
                if gt.shape != pixel_map.shape:
                    raise DataError(
                        f"mask {mask_file} shape {gt.shape} != map {pixel_map.shape}"
                    )
            elif row.label == 0:
                gt = np.zeros(pixel_map.shape, dtype=np.uint8)
            else:
                raise DataError(f"defect entry {row.image_path!r} has no mask path")
            flat_labels.append(gt.reshape(-1))
            flat_scores.append(pixel_map.reshape(-1).astype(np.float64))
        pi = auroc(np.concatenate(flat_labels), np.concatenate(flat_scores))
        print(f"pi_auroc\t{pi:.9f}")
    return 0


# ---------------------------------------------------------------- bench

_BENCH_DEFAULTS = {
    "method": "ldknn",
    "k": 9,
    "alpha": 1.0,
    "pool_window": 3,
    "repetitions": 5,
    "proportions": "1.0",
}


def _cmd_bench(args) -> int:
    opts = _merge_options(args, _BENCH_DEFAULTS)
    cfg = _scorer_config(opts)
    try:
        proportions = [float(p) for p in str(opts["proportions"]).split(",") if p.strip()]
    except ValueError as exc:
        raise _UsageError(f"bad --proportions value: {opts['proportions']!r}") from exc
    if not proportions:
        raise _UsageError("--proportions must list at least one value")
    if opts["repetitions"] < 3:
        raise _UsageError(f"--repetitions must be >= 3, got {opts['repetitions']}")

    bank = _load_any_bank(args.bank)
    if isinstance(bank, LocalDensityBank):
        ld = bank
    else:
        if cfg.method == "ldknn":
            raise DataError(
                f"{args.bank} has no densities; run `bank density` first"
            )
        # placeholder densities: only the inference path is timed
        ld = LocalDensityBank(bank, np.zeros(bank.size, dtype=np.float32), 1)

    named_sets = _load_feature_sets(args.features_dir, opts["pool_window"])
    sets = [s for _, s in named_sets]
    labels = None
    if args.manifest:
        by_stem = {Path(r.image_path).stem: r.label for r in read_manifest(args.manifest)}
        stems = [stem for stem, _ in named_sets]
        missing = [s for s in stems if s not in by_stem]
        if missing:
            raise DataError(f"manifest lacks labels for: {', '.join(missing)}")
        labels = np.array([1 if by_stem[s] != 0 else 0 for s in stems])

    lines = [BENCHMARK_HEADER]
    for proportion in proportions:
        record = benchmark_fps(ld, sets, cfg, repetitions=opts["repetitions"],
                               coreset_proportion=proportion, labels=labels)
        lines.append(record.as_row())
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(proportions)} benchmark rows -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------- parser

def _add_config_flag(p):
    p.add_argument("--config", help="flat key=value defaults file; flags override")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchbank",
                     description="Patch-level anomaly detection over a memory bank")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND",
                              parser_class=_Parser)

    p = sub.add_parser("synth",
                       help="generate labeled synthetic-defect images")
    p.add_argument("--input-dir", required=True, help="directory of normal images")
    p.add_argument("--saliency-dir", help="directory of foreground masks, matched by stem")
    p.add_argument("--out-dir", required=True)
    _add_config_flag(p)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    for name in ("shape-kind", "fill-kind", "fuse-mode"):
        p.add_argument("--" + name)
    for name in ("area-min", "area-max", "scar-aspect-min", "scar-aspect-max",
                 "noise-mean", "noise-fluctuation", "blend-min", "blend-max",
                 "normal-prob"):
        p.add_argument("--" + name, type=float)
    for name in ("control-points-min", "control-points-max"):
        p.add_argument("--" + name, type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bank", help="build or annotate memory banks")
    bank_sub = p.add_subparsers(dest="bank_command", required=True, metavar="ACTION",
                                parser_class=_Parser)
    b = bank_sub.add_parser("build",
                            help="aggregate feature tensors into a bank")
    b.add_argument("--features-dir", required=True,
                   help="directory of <stem>.h2.rebf / <stem>.h3.rebf pairs")
    b.add_argument("--out", required=True)
    _add_config_flag(b)
    b.add_argument("--pool-window", type=int)
    b.set_defaults(func=_cmd_bank_build)
    b = bank_sub.add_parser("density",
                            help="learn per-entry local densities")
    b.add_argument("--bank", required=True)
    b.add_argument("--out", required=True)
    _add_config_flag(b)
    b.add_argument("--k", type=int)
    b.set_defaults(func=_cmd_bank_density)

    p = sub.add_parser("coreset",
                       help="subsample a bank by greedy k-center")
    p.add_argument("--bank", required=True)
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    p.add_argument("--proportion", type=float)
    p.add_argument("--seed-index", type=int)
    p.set_defaults(func=_cmd_coreset)

    p = sub.add_parser("score", help="score feature dumps against a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", help="TSV of stem<TAB>image score; stdout if omitted")
    p.add_argument("--maps-dir", help="also write per-image pixel maps here")
    p.add_argument("--map-size", default="256x256", help="pixel map size, HxW")
    _add_config_flag(p)
    p.add_argument("--method")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--pool-window", type=int)
    p.add_argument("--smoothing-sigma", type=float)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval",
                       help="AUROC of a score file against a labeled manifest")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--maps-dir", help="pixel maps from `score`; enables pixel AUROC")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench",
                       help="throughput sweep across coreset proportions")
    p.add_argument("--bank", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--manifest", help="labels for AUROC alongside FPS")
    p.add_argument("--out")
    _add_config_flag(p)
    p.add_argument("--method")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--pool-window", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--proportions", help="comma-separated list, e.g. 1.0,0.1,0.01")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"patchbank: error: {exc}", file=sys.stderr)
        return 1
    except PatchBankError as exc:
        print(f"patchbank: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"patchbank: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
