"""Command-line entry point.

Subcommands: gen-site (synthetic site + depth rasters), sample
(curriculum batch ids), forward (model inference over manifest views),
eval (pairwise pose metrics), fetch-tiles (cached tile mosaic).

Every subcommand accepts --seed, --out-dir, and --config. The config
file is a JSON object whose keys mirror the long flag names; explicit
flags win over config values, which win over built-in defaults. All
values are validated before any work starts.

Exit codes: 0 ok, 2 bad input, 3 bad data, 4 network failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .curriculum import (
    CurriculumProgress,
    build_distance_cache,
    composed_sample,
    curriculum_sample,
    modality_counts,
    sample_by_modality,
)
from .errors import DataError, InputError, InvalidPairing, NetworkError
from .evaluation import EvalConfig, evaluate_poses, format_report, report_to_json
from .geometry import CameraVector9, Pose, UnitQuaternion, quat_to_rotation
from .model import (
    ModelConfig,
    build_weight_bank,
    compute_loss,
    forward_model,
    load_weights,
    parameter_spec,
)
from .scenegen import (
    ALTITUDE_BANDS,
    MODALITIES,
    HelixBand,
    HelixConfig,
    SiteConfig,
    read_depth_raster,
    read_manifest,
    write_site,
)
from .tilemath import CachingFetcher, stitch_grid, write_png


@dataclass(frozen=True)
class Flag:
    name: str  # long flag, e.g. "--ground-n"
    type_fn: type
    default: object
    help: str
    required: bool = False
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.name.lstrip("-").replace("-", "_")


_COMMON = [
    Flag("--seed", int, 0, "seed for randomized steps"),
    Flag("--out-dir", str, ".", "directory for outputs"),
    Flag("--config", str, None, "JSON file of flag values (flags still win)"),
]

_FLAGS: dict[str, list[Flag]] = {
    "gen-site": [
        Flag("--site-id", str, "site_000", "identifier and output subdirectory"),
        Flag("--extent", float, 400.0, "terrain half-extent in meters"),
        Flag("--ground-n", int, 120, "ground views on the walk circle"),
        Flag("--satellite-n", int, 120, "satellite grid views"),
        Flag("--satellite-altitude", float, 1500.0, "satellite height AGL in meters"),
        Flag("--image-size", int, 32, "square image resolution"),
        Flag("--band-frames", str, "60,120,180", "per-camera frames per helix band"),
    ],
    "sample": [
        Flag("--manifest", str, None, "site directory or manifest.json", required=True),
        Flag("--mode", str, None, "sampler", required=True,
             choices=("cacs", "pvs", "composed")),
        Flag("--tau", float, 0.0, "curriculum progress in [0, 1]"),
        Flag("--n", int, 8, "views per batch"),
        Flag("--anchor", str, None, "anchor view id (cacs and composed)"),
        Flag("--lambda-t", float, 0.5, "translation weight in the view distance"),
    ],
    "forward": [
        Flag("--manifest", str, None, "site directory or manifest.json", required=True),
        Flag("--ids", str, None, "comma-separated view ids", required=True),
        Flag("--model-config", str, None, "JSON file of model settings"),
        Flag("--weights", str, None, "weight bank file (default: built from seed)"),
    ],
    "eval": [
        Flag("--pred", str, None, "predicted poses (site dir or frames JSON)",
             required=True),
        Flag("--gt", str, None, "reference poses (site dir or frames JSON)",
             required=True),
        Flag("--threshold", float, 5.0, "accuracy threshold in degrees"),
        Flag("--style", str, "full", "table layout",
             choices=("full", "ground_satellite")),
        Flag("--bucket-rule", str, "pair", "modality attribution rule",
             choices=("pair", "image")),
    ],
    "fetch-tiles": [
        Flag("--lat", float, None, "latitude of the mosaic center", required=True),
        Flag("--lon", float, None, "longitude of the mosaic center", required=True),
        Flag("--zoom", int, 16, "tile zoom level"),
        Flag("--grid", int, 3, "mosaic side length in tiles (odd)"),
        Flag("--cache", str, None, "tile cache directory (default under out-dir)"),
    ],
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skybench",
        description="Cross-view site generation, sampling, inference, and metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command, flag_list in _FLAGS.items():
        p = sub.add_parser(command)
        for flag in flag_list + _COMMON:
            p.add_argument(
                flag.name,
                dest=flag.dest,
                type=flag.type_fn,
                default=argparse.SUPPRESS,
                choices=flag.choices,
                help=flag.help,
            )
    return parser


def _coerce(flag: Flag, value, where: str):
    """Type-check one config-file value against its flag."""
    ok = {
        int: lambda v: isinstance(v, int) and not isinstance(v, bool),
        float: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        str: lambda v: isinstance(v, str),
    }[flag.type_fn]
    if not ok(value):
        raise InputError(f"{where}: {flag.name} expects {flag.type_fn.__name__}")
    return flag.type_fn(value)


def _merge_options(command: str, provided: dict) -> argparse.Namespace:
    table = {f.dest: f for f in _FLAGS[command] + _COMMON}
    merged = {dest: f.default for dest, f in table.items()}

    config_path = provided.get("config")
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text())
        except OSError as e:
            raise InputError(f"cannot read --config file: {e}") from None
        except json.JSONDecodeError as e:
            raise DataError(f"--config file is not valid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise DataError("--config file must hold a JSON object")
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest not in table or dest == "config":
                raise InputError(f"unknown config key {key!r} for {command}")
            if value is None:
                continue
            merged[dest] = _coerce(table[dest], value, "--config")

    merged.update(provided)
    for dest, flag in table.items():
        if flag.required and merged[dest] is None:
            raise InputError(f"{flag.name} is required for {command}")
        if flag.choices and merged[dest] not in flag.choices + (None,):
            raise InputError(f"{flag.name} must be one of {flag.choices}")
    return argparse.Namespace(**merged)


def _out_dir(opt) -> Path:
    out = Path(opt.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _site_dir(path_str: str) -> Path:
    p = Path(path_str)
    if p.is_file():
        return p.parent
    if p.is_dir():
        return p
    raise InputError(f"manifest path {p} does not exist")


def _parse_band_frames(text: str) -> tuple[int, ...]:
    try:
        frames = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise InputError("--band-frames must be comma-separated integers") from None
    if len(frames) != 3 or any(f < 1 for f in frames):
        raise InputError("--band-frames needs three positive counts")
    return frames


def _cmd_gen_site(opt) -> int:
    lo, hi = ALTITUDE_BANDS["satellite"]
    if not lo <= opt.satellite_altitude <= hi:
        raise InputError(
            f"--satellite-altitude {opt.satellite_altitude} outside [{lo}, {hi}]"
        )
    frames = _parse_band_frames(opt.band_frames)
    default_bands = HelixConfig().bands
    helix = HelixConfig(
        bands=tuple(
            HelixBand(band.start_agl, band.end_agl, n)
            for band, n in zip(default_bands, frames)
        )
    )
    config = SiteConfig(
        site_id=opt.site_id,
        seed=opt.seed,
        extent=opt.extent,
        ground_count=opt.ground_n,
        satellite_count=opt.satellite_n,
        satellite_altitude=opt.satellite_altitude,
        helix=helix,
        image_width=opt.image_size,
        image_height=opt.image_size,
    )
    site_dir = _out_dir(opt) / opt.site_id
    site_dir.mkdir(parents=True, exist_ok=True)
    _, manifest = write_site(config, site_dir)
    counts = {m: len(manifest.by_modality(m)) for m in MODALITIES}
    print(
        f"site {opt.site_id}: {counts['ground']} ground / {counts['aerial']} aerial"
        f" / {counts['satellite']} satellite views -> {site_dir}"
    )
    return 0


def _cmd_sample(opt) -> int:
    manifest = read_manifest(_site_dir(opt.manifest))
    progress = CurriculumProgress(opt.tau)
    if opt.mode == "pvs":
        ids = sample_by_modality(manifest, modality_counts(opt.n, progress), opt.seed)
    else:
        if opt.anchor is None:
            raise InputError(f"--anchor is required for mode {opt.mode}")
        cache = build_distance_cache(manifest.views, opt.lambda_t)
        if opt.mode == "cacs":
            picks = curriculum_sample(cache.index_of(opt.anchor), cache, opt.n, progress)
            ids = [cache.ids[i] for i in picks]
        else:
            ids = composed_sample(manifest, cache, opt.anchor, opt.n, progress)
    for view_id in ids:
        print(view_id)
    return 0


def _load_model_config(path_str: str | None, seed: int) -> ModelConfig:
    if path_str is None:
        return ModelConfig(seed=seed)
    try:
        doc = json.loads(Path(path_str).read_text())
    except OSError as e:
        raise InputError(f"cannot read --model-config file: {e}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"--model-config is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise DataError("--model-config must hold a JSON object")
    known = {f.name for f in dataclass_fields(ModelConfig)}
    unknown = set(doc) - known
    if unknown:
        raise InputError(f"unknown model-config keys: {sorted(unknown)}")
    return ModelConfig(**{**{"seed": seed}, **doc})


def _cmd_forward(opt) -> int:
    site_dir = _site_dir(opt.manifest)
    manifest = read_manifest(site_dir)
    ids = [part.strip() for part in opt.ids.split(",") if part.strip()]
    if not ids:
        raise InputError("--ids must name at least one view")
    views = []
    for view_id in ids:
        try:
            views.append(manifest.view_by_id(view_id))
        except KeyError:
            raise InputError(f"unknown view id {view_id!r}") from None

    config = _load_model_config(opt.model_config, opt.seed)
    if opt.weights is not None:
        bank = load_weights(Path(opt.weights))
        expected = {name: shape for name, shape, _ in parameter_spec(config)}
        got = {name: arr.shape for name, arr in bank.tensors.items()}
        if expected != got:
            raise InputError("--weights does not match the model config")
    else:
        bank = build_weight_bank(config)

    gt_depths = []
    for view in views:
        if view.depth_path is None:
            raise InputError(f"view {view.id!r} has no depth raster")
        gt_depths.append(read_depth_raster(site_dir / view.depth_path))
    # depth rasters stand in for imagery; d/(1+d) maps them into [0, 1)
    images = [d / (1.0 + d) for d in gt_depths]
    tags = [v.modality for v in views]

    out = forward_model(images, tags, config, bank)
    gt_cams = [CameraVector9.from_pose_intrinsics(v.pose(), v.intrinsics) for v in views]
    total, parts = compute_loss(out, gt_cams, gt_depths, tags)

    out_dir = _out_dir(opt)
    frames = []
    for view, cam, provenance in zip(views, out.cameras, out.provenance):
        frames.append(
            {
                "id": view.id,
                "modality": view.modality,
                "provenance": provenance,
                "quat": [float(x) for x in cam.quat.as_array()],
                "translation": [float(x) for x in cam.translation],
                "fov_h": cam.fov_h,
                "fov_v": cam.fov_v,
            }
        )
    (out_dir / "cameras.json").write_text(
        json.dumps({"frames": frames}, indent=2, sort_keys=True) + "\n"
    )
    np.save(out_dir / "depths.npy", np.stack(out.depths))
    (out_dir / "loss.json").write_text(
        json.dumps({"total": total, "parts": parts}, indent=2, sort_keys=True) + "\n"
    )
    print(f"forward over {len(views)} views -> {out_dir} (loss {total:.6f})")
    return 0


def _load_pose_frames(path_str: str) -> list[tuple[str, str, Pose]]:
    """Read (id, modality, pose) triples from a site or a frames file."""
    p = Path(path_str)
    if p.is_dir() or p.name == "manifest.json":
        manifest = read_manifest(p if p.is_dir() else p.parent)
        return [(v.id, v.modality, v.pose()) for v in manifest.views]
    try:
        doc = json.loads(p.read_text())
    except OSError as e:
        raise InputError(f"cannot read pose file: {e}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{p}: not valid JSON: {e}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), list):
        raise DataError(f"{p}: expected an object with a frames list")
    out = []
    for i, frame in enumerate(doc["frames"]):
        where = f"{p}: frames[{i}]"
        if not isinstance(frame, dict):
            raise DataError(f"{where} must be an object")
        try:
            view_id = frame["id"]
            modality = frame["modality"]
            quat = frame["quat"]
            translation = frame["translation"]
        except KeyError as e:
            raise DataError(f"{where} is missing key {e.args[0]!r}") from None
        if modality not in MODALITIES:
            raise DataError(f"{where}: unknown modality {modality!r}")
        try:
            pose = Pose(
                quat_to_rotation(UnitQuaternion(*[float(x) for x in quat])),
                np.asarray(translation, dtype=np.float64),
            )
        except (InputError, TypeError, ValueError) as e:
            raise DataError(f"{where}: {e}") from None
        out.append((str(view_id), str(modality), pose))
    return out


def _cmd_eval(opt) -> int:
    pred = _load_pose_frames(opt.pred)
    gt = _load_pose_frames(opt.gt)
    pred_by_id = {vid: (tag, pose) for vid, tag, pose in pred}
    if len(pred_by_id) != len(pred):
        raise InvalidPairing("--pred contains duplicate frame ids")
    gt_ids = [vid for vid, _, _ in gt]
    missing = [vid for vid in gt_ids if vid not in pred_by_id]
    extra = sorted(set(pred_by_id) - set(gt_ids))
    if missing or extra:
        raise InvalidPairing(
            f"frame sets differ (missing from pred: {missing[:5]},"
            f" extra in pred: {extra[:5]})"
        )
    pred_poses, gt_poses, tags = [], [], []
    for vid, tag, pose in gt:
        pred_tag, pred_pose = pred_by_id[vid]
        if pred_tag != tag:
            raise InvalidPairing(f"frame {vid!r} has modality {pred_tag!r} vs {tag!r}")
        pred_poses.append(pred_pose)
        gt_poses.append(pose)
        tags.append(tag)

    config = EvalConfig(
        rot_threshold_deg=opt.threshold,
        trans_threshold_deg=opt.threshold,
        bucket_rule=opt.bucket_rule,
    )
    report = evaluate_poses(pred_poses, gt_poses, tags, config)
    print(format_report(report, opt.style), end="")
    out_dir = _out_dir(opt)
    (out_dir / "report.json").write_text(
        json.dumps(report_to_json(report), indent=2, sort_keys=True) + "\n"
    )
    return 0


def _cmd_fetch_tiles(opt) -> int:
    if opt.grid < 1 or opt.grid % 2 == 0:
        raise InputError(f"--grid must be odd and positive, got {opt.grid}")
    out_dir = _out_dir(opt)
    cache_dir = Path(opt.cache) if opt.cache is not None else out_dir / "tile_cache"
    stitched = stitch_grid(
        opt.lat, opt.lon, opt.zoom, opt.grid, CachingFetcher(cache_dir)
    )
    if len(stitched.misses) == opt.grid * opt.grid:
        raise NetworkError("no tiles could be fetched (every slot missing)")
    png_path = out_dir / f"stitch_z{opt.zoom}_g{opt.grid}.png"
    write_png(stitched.pixels, png_path)
    print(
        f"stitched {opt.grid}x{opt.grid} tiles at zoom {opt.zoom}"
        f" -> {png_path} ({len(stitched.misses)} missing)"
    )
    return 0


_COMMANDS = {
    "gen-site": _cmd_gen_site,
    "sample": _cmd_sample,
    "forward": _cmd_forward,
    "eval": _cmd_eval,
    "fetch-tiles": _cmd_fetch_tiles,
}


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    provided = {k: v for k, v in vars(args).items() if k != "command"}
    opt = _merge_options(args.command, provided)
    return _COMMANDS[args.command](opt)


def main(argv=None) -> int:
    try:
        return run(argv)
    except NetworkError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
