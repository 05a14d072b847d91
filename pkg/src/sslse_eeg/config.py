"""Strict, versioned JSON run configuration.

Every key is checked against the schema; unknown keys are rejected with the
full dotted path so a typo ("windw_s") fails loudly instead of silently
running with a default. The effective configuration, defaults included, is
re-serializable so each run directory can echo exactly what it ran with.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .contrastive import AugOp, AugmentationSpec, PretrainConfig
from .errors import ConfigParse, SchemaVersionMismatch
from .evaluate import FinetuneConfig
from .ingest import SynthSpec, WindowSpec
from .model import EncoderConfig

SCHEMA_VERSION = 1


@dataclass
class ImagingConfig:
    lut_path: str | None = None
    resize_mode: str = "nearest"
    out_h: int = 224
    out_w: int = 224
    png_export: bool = False

    def __post_init__(self):
        if self.resize_mode not in ("nearest", "bilinear"):
            raise ConfigParse(
                f"imaging.resize_mode must be nearest or bilinear, "
                f"got {self.resize_mode!r}")
        if self.out_h < 1 or self.out_w < 1:
            raise ConfigParse("imaging.out_h/out_w must be >= 1")


@dataclass
class IngestConfig:
    kind: str = "synth"
    synth: SynthSpec = field(default_factory=SynthSpec)
    path: str | None = None
    csv_rate_hz: float | None = None


@dataclass
class RunConfig:
    version: int = SCHEMA_VERSION
    seed: int = 0
    ingest: IngestConfig = field(default_factory=IngestConfig)
    window: WindowSpec = field(default_factory=WindowSpec)
    imaging: ImagingConfig = field(default_factory=ImagingConfig)
    model: EncoderConfig = field(default_factory=EncoderConfig)
    ssl: PretrainConfig = field(default_factory=PretrainConfig)
    eval: FinetuneConfig = field(default_factory=FinetuneConfig)


def _reject_unknown(section: dict, path: str, known: tuple[str, ...]) -> None:
    for key in section:
        if key not in known:
            raise ConfigParse(f"unknown key {path}.{key}" if path else
                              f"unknown key {key}")


def _number(section, path, key, default, kind=float, minimum=None, optional=False):
    if key not in section or section[key] is None:
        if key in section and optional:
            return None
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigParse(f"{path}.{key} must be a number, got {value!r}")
    value = kind(value)
    if kind is int and value != section[key]:
        raise ConfigParse(f"{path}.{key} must be an integer, got {section[key]!r}")
    if minimum is not None and value < minimum:
        raise ConfigParse(f"{path}.{key} must be >= {minimum}, got {value}")
    return value


def _flag(section, path, key, default):
    value = section.get(key, default)
    if not isinstance(value, bool):
        raise ConfigParse(f"{path}.{key} must be true or false, got {value!r}")
    return value


def _string(section, path, key, default=None):
    value = section.get(key, default)
    if value is not None and not isinstance(value, str):
        raise ConfigParse(f"{path}.{key} must be a string, got {value!r}")
    return value


def _parse_ingest(section: dict) -> IngestConfig:
    _reject_unknown(section, "ingest",
                    ("synth", "edf_path", "csv_path", "csv_rate_hz", "images_dir"))
    sources = [k for k in ("synth", "edf_path", "csv_path", "images_dir")
               if section.get(k) is not None]
    if len(sources) > 1:
        raise ConfigParse(f"ingest declares multiple sources: {sources}")
    if "csv_rate_hz" in section and "csv_path" not in section:
        raise ConfigParse("ingest.csv_rate_hz requires ingest.csv_path")
    if not sources or sources == ["synth"]:
        synth = section.get("synth", {})
        if not isinstance(synth, dict):
            raise ConfigParse("ingest.synth must be an object")
        _reject_unknown(synth, "ingest.synth",
                        ("classes", "windows_per_class", "sample_rate_hz",
                         "channels", "noise_sigma", "seed", "f0_hz",
                         "delta_f_hz", "window_s", "amplitude"))
        try:
            spec = SynthSpec(
                classes=_number(synth, "ingest.synth", "classes", 2, int, 2),
                windows_per_class=_number(
                    synth, "ingest.synth", "windows_per_class", 10, int, 1),
                sample_rate_hz=_number(
                    synth, "ingest.synth", "sample_rate_hz", 500.0),
                channels=_number(synth, "ingest.synth", "channels", 1, int, 1),
                noise_sigma=_number(synth, "ingest.synth", "noise_sigma", 2.0),
                seed=_number(synth, "ingest.synth", "seed", 0, int, 0),
                f0_hz=_number(synth, "ingest.synth", "f0_hz", 8.0),
                delta_f_hz=_number(synth, "ingest.synth", "delta_f_hz", 4.0),
                window_s=_number(synth, "ingest.synth", "window_s", 5.0),
                amplitude=_number(synth, "ingest.synth", "amplitude", 50.0),
            )
        except ValueError as exc:
            raise ConfigParse(f"ingest.synth: {exc}") from exc
        return IngestConfig(kind="synth", synth=spec)
    source = sources[0]
    if source == "edf_path":
        return IngestConfig(kind="edf", path=_string(section, "ingest", "edf_path"))
    if source == "csv_path":
        rate = _number(section, "ingest", "csv_rate_hz", None)
        if rate is None or rate <= 0:
            raise ConfigParse("ingest.csv_path requires positive ingest.csv_rate_hz")
        return IngestConfig(kind="csv", path=_string(section, "ingest", "csv_path"),
                            csv_rate_hz=rate)
    return IngestConfig(kind="images", path=_string(section, "ingest", "images_dir"))


def _parse_window(section: dict) -> WindowSpec:
    _reject_unknown(section, "window", ("window_s", "segment_ms", "stride_s"))
    try:
        return WindowSpec(
            window_s=_number(section, "window", "window_s", 5.0),
            segment_ms=_number(section, "window", "segment_ms", 50.0),
            stride_s=_number(section, "window", "stride_s", None, optional=True),
        )
    except ValueError as exc:
        raise ConfigParse(f"window: {exc}") from exc


def _parse_imaging(section: dict) -> ImagingConfig:
    _reject_unknown(section, "imaging",
                    ("lut", "resize_mode", "out_h", "out_w", "png_export"))
    return ImagingConfig(
        lut_path=_string(section, "imaging", "lut"),
        resize_mode=_string(section, "imaging", "resize_mode", "nearest"),
        out_h=_number(section, "imaging", "out_h", 224, int, 1),
        out_w=_number(section, "imaging", "out_w", 224, int, 1),
        png_export=_flag(section, "imaging", "png_export", False),
    )


def _parse_model(section: dict) -> EncoderConfig:
    _reject_unknown(section, "model",
                    ("stage_channels", "blocks_per_stage", "se_enabled",
                     "se_ratio", "embedding_dim", "projection_hidden",
                     "projection_dim", "num_classes", "in_channels",
                     "input_hw", "stem_kernel", "stem_stride", "stem_padding"))
    channels = section.get("stage_channels", [16, 32, 64, 128])
    if (not isinstance(channels, list) or not channels
            or not all(isinstance(c, int) and not isinstance(c, bool)
                       for c in channels)):
        raise ConfigParse(
            f"model.stage_channels must be a list of integers, got {channels!r}")
    try:
        return EncoderConfig(
            stage_channels=tuple(channels),
            blocks_per_stage=_number(section, "model", "blocks_per_stage", 1, int, 1),
            se_enabled=_flag(section, "model", "se_enabled", True),
            se_ratio=_number(section, "model", "se_ratio", 8, int, 1),
            embedding_dim=_number(section, "model", "embedding_dim", 128, int, 1),
            projection_hidden=_number(
                section, "model", "projection_hidden", 128, int, 1),
            projection_dim=_number(section, "model", "projection_dim", 64, int, 1),
            num_classes=_number(section, "model", "num_classes", 2, int, 1),
            in_channels=_number(section, "model", "in_channels", 3, int, 1),
            input_hw=_number(section, "model", "input_hw", 224, int, 1),
            stem_kernel=_number(section, "model", "stem_kernel", 8, int, 1),
            stem_stride=_number(section, "model", "stem_stride", 8, int, 1),
            stem_padding=_number(section, "model", "stem_padding", 0, int, 0),
        )
    except ValueError as exc:
        raise ConfigParse(f"model: {exc}") from exc


def _parse_augment(items, path="ssl.augment") -> AugmentationSpec:
    if items is None:
        return AugmentationSpec.default()
    if not isinstance(items, list) or not items:
        raise ConfigParse(f"{path} must be a non-empty list")
    ops = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigParse(f"{path}[{i}] must be an object")
        _reject_unknown(item, f"{path}[{i}]", ("kind", "probability", "lo", "hi"))
        kind = _string(item, f"{path}[{i}]", "kind")
        if kind is None:
            raise ConfigParse(f"{path}[{i}].kind is required")
        try:
            ops.append(AugOp(
                kind=kind,
                probability=_number(item, f"{path}[{i}]", "probability", 1.0),
                lo=_number(item, f"{path}[{i}]", "lo", 0.0),
                hi=_number(item, f"{path}[{i}]", "hi", 0.0),
            ))
        except ValueError as exc:
            raise ConfigParse(f"{path}[{i}]: {exc}") from exc
    return AugmentationSpec(ops=tuple(ops))


def _parse_ssl(section: dict, encoder: EncoderConfig, seed: int) -> PretrainConfig:
    _reject_unknown(section, "ssl",
                    ("epochs", "batch_size", "lr", "temperature",
                     "checkpoint_every", "augment"))
    try:
        return PretrainConfig(
            epochs=_number(section, "ssl", "epochs", 10, int, 1),
            batch_size=_number(section, "ssl", "batch_size", 32, int, 1),
            lr=_number(section, "ssl", "lr", 1e-3),
            temperature=_number(section, "ssl", "temperature", 0.5),
            seed=seed,
            checkpoint_every=_number(section, "ssl", "checkpoint_every", 1, int, 0),
            augment=_parse_augment(section.get("augment")),
            encoder=encoder,
        )
    except ValueError as exc:
        raise ConfigParse(f"ssl: {exc}") from exc


def _parse_eval(section: dict, seed: int) -> FinetuneConfig:
    _reject_unknown(section, "eval",
                    ("labeled_fraction", "labeled_count", "epochs", "lr",
                     "batch_size", "freeze_encoder", "test_fraction"))
    try:
        return FinetuneConfig(
            labeled_fraction=_number(
                section, "eval", "labeled_fraction", None, optional=True),
            labeled_count=_number(
                section, "eval", "labeled_count", None, kind=int, optional=True),
            epochs=_number(section, "eval", "epochs", 20, int, 0),
            lr=_number(section, "eval", "lr", 1e-3),
            batch_size=_number(section, "eval", "batch_size", 64, int, 1),
            seed=seed,
            freeze_encoder=_flag(section, "eval", "freeze_encoder", True),
            test_fraction=_number(section, "eval", "test_fraction", 0.2),
        )
    except ValueError as exc:
        raise ConfigParse(f"eval: {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigParse(f"config root must be an object, got {type(raw).__name__}")
    if "version" not in raw:
        raise SchemaVersionMismatch("config is missing the version key")
    if raw["version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"config version {raw['version']!r} != supported {SCHEMA_VERSION}")
    _reject_unknown(raw, "", ("version", "seed", "ingest", "window", "imaging",
                              "model", "ssl", "eval"))
    for name in ("ingest", "window", "imaging", "model", "ssl", "eval"):
        if name in raw and not isinstance(raw[name], dict):
            raise ConfigParse(f"{name} must be an object")
    seed = _number(raw, "", "seed", 0, int, 0)
    model = _parse_model(raw.get("model", {}))
    return RunConfig(
        version=SCHEMA_VERSION,
        seed=seed,
        ingest=_parse_ingest(raw.get("ingest", {})),
        window=_parse_window(raw.get("window", {})),
        imaging=_parse_imaging(raw.get("imaging", {})),
        model=model,
        ssl=_parse_ssl(raw.get("ssl", {}), model, seed),
        eval=_parse_eval(raw.get("eval", {}), seed),
    )


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"config {p} is not valid JSON: {exc}") from exc
    return parse_config(raw)


def effective_config(cfg: RunConfig) -> dict:
    """Fully materialized config (defaults included), re-parseable."""
    ingest: dict = {}
    if cfg.ingest.kind == "synth":
        s = cfg.ingest.synth
        ingest["synth"] = {
            "classes": s.classes, "windows_per_class": s.windows_per_class,
            "sample_rate_hz": s.sample_rate_hz, "channels": s.channels,
            "noise_sigma": s.noise_sigma, "seed": s.seed, "f0_hz": s.f0_hz,
            "delta_f_hz": s.delta_f_hz, "window_s": s.window_s,
            "amplitude": s.amplitude,
        }
    elif cfg.ingest.kind == "edf":
        ingest["edf_path"] = cfg.ingest.path
    elif cfg.ingest.kind == "csv":
        ingest["csv_path"] = cfg.ingest.path
        ingest["csv_rate_hz"] = cfg.ingest.csv_rate_hz
    else:
        ingest["images_dir"] = cfg.ingest.path
    return {
        "version": cfg.version,
        "seed": cfg.seed,
        "ingest": ingest,
        "window": {
            "window_s": cfg.window.window_s,
            "segment_ms": cfg.window.segment_ms,
            "stride_s": cfg.window.stride_s,
        },
        "imaging": {
            "lut": cfg.imaging.lut_path,
            "resize_mode": cfg.imaging.resize_mode,
            "out_h": cfg.imaging.out_h,
            "out_w": cfg.imaging.out_w,
            "png_export": cfg.imaging.png_export,
        },
        "model": {
            "stage_channels": list(cfg.model.stage_channels),
            "blocks_per_stage": cfg.model.blocks_per_stage,
            "se_enabled": cfg.model.se_enabled,
            "se_ratio": cfg.model.se_ratio,
            "embedding_dim": cfg.model.embedding_dim,
            "projection_hidden": cfg.model.projection_hidden,
            "projection_dim": cfg.model.projection_dim,
            "num_classes": cfg.model.num_classes,
            "in_channels": cfg.model.in_channels,
            "input_hw": cfg.model.input_hw,
            "stem_kernel": cfg.model.stem_kernel,
            "stem_stride": cfg.model.stem_stride,
            "stem_padding": cfg.model.stem_padding,
        },
        "ssl": {
            "epochs": cfg.ssl.epochs,
            "batch_size": cfg.ssl.batch_size,
            "lr": cfg.ssl.lr,
            "temperature": cfg.ssl.temperature,
            "checkpoint_every": cfg.ssl.checkpoint_every,
            "augment": [
                {"kind": op.kind, "probability": op.probability,
                 "lo": op.lo, "hi": op.hi}
                for op in cfg.ssl.augment.ops
            ],
        },
        "eval": {
            "labeled_fraction": cfg.eval.labeled_fraction,
            "labeled_count": cfg.eval.labeled_count,
            "epochs": cfg.eval.epochs,
            "lr": cfg.eval.lr,
            "batch_size": cfg.eval.batch_size,
            "freeze_encoder": cfg.eval.freeze_encoder,
            "test_fraction": cfg.eval.test_fraction,
        },
    }


def config_json(cfg: RunConfig) -> str:
    return json.dumps(effective_config(cfg), indent=2, sort_keys=True) + "\n"
