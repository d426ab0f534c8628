"""
Scenario I/O.

Reads scenario files into ScenarioConfig, applies command-line overrides,
builds the deployment and grid a config describes, and reads/writes every
run artifact: frame and estimate CSVs, the calibration file, the detector
bitstream and sweep summaries.

Floats are written with repr() so a written file reads back to the same
values bit for bit.
"""

import configparser
import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from src.models.common import RTIError
from src.models.deployment import Deployment, Grid
from src.models.detection import Blacklist, CalibrationResult, PathLossFit
from src.models.scenario import EstimateRecord, FrameRecord, ScenarioConfig
from src.services.geometry import GeometryError, channel_frequency, perimeter_nodes

logger = logging.getLogger(__name__)

FRAME_COLUMNS = ["frame", "time_s", "link", "channel", "rss_db", "true_x", "true_y"]
ESTIMATE_COLUMNS = [
    "frame",
    "time_s",
    "true_x",
    "true_y",
    "est_x",
    "est_y",
    "error_m",
    "support_pixels",
    "detecting_links",
    "status",
]
SWEEP_COLUMNS = [
    "parameter",
    "value",
    "mean_error_m",
    "variance_m2",
    "skewness",
    "detection_rate",
    "mean_support_pixels",
    "mean_threshold_db",
    "additions",
]
BITSTREAM_MAGIC = b"RTIB"


class ConfigError(RTIError, ValueError):
    """Scenario configuration is invalid; `key` names the offending setting."""

    def __init__(self, message: str, key: Optional[str] = None, detail: Optional[str] = None):
        super().__init__(message, detail)
        self.key = key

    def __str__(self) -> str:
        return f"{self.key}: {self.message}" if self.key else self.message


class ScenarioFormatError(RTIError):
    """A run artifact does not match its expected layout."""


# =============================================================================
# Scenario configuration
# =============================================================================


def _section_models() -> dict[str, type[BaseModel]]:
    return {
        name: field.annotation
        for name, field in ScenarioConfig.model_fields.items()
        if name != "fades"
    }


def resolve_key(key: str) -> tuple[str, str]:
    """Map `section.key` or a bare key unique across sections to (section, key)."""
    sections = _section_models()
    key = key.strip()
    if "." in key:
        section, name = key.split(".", 1)
        if section == "fades":
            try:
                int(name)
            except ValueError:
                raise ConfigError("fade keys must be link ids", key=key)
            return section, name
        if section not in sections:
            raise ConfigError("unknown section", key=key)
        if name not in sections[section].model_fields:
            raise ConfigError("unknown key", key=key)
        return section, name
    owners = [s for s, model in sections.items() if key in model.model_fields]
    if not owners:
        raise ConfigError("unknown key", key=key)
    if len(owners) > 1:
        raise ConfigError(f"ambiguous key, qualify it as one of {[f'{s}.{key}' for s in owners]}", key=key)
    return owners[0], key


def parse_overrides(overrides: Iterable[str]) -> list[tuple[str, str, str]]:
    """Split `KEY=VALUE` strings into (section, key, value)."""
    parsed = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not KEY=VALUE")
        key, value = item.split("=", 1)
        section, name = resolve_key(key)
        parsed.append((section, name, value.strip()))
    return parsed


def _validation_to_config_error(exc: ValidationError) -> ConfigError:
    errors = exc.errors()
    first = errors[0]
    key = ".".join(str(part) for part in first["loc"]) or "config"
    detail = "; ".join(
        f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in errors
    )
    return ConfigError(first["msg"], key=key, detail=detail)


def parse_scenario(
    text: str,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
) -> ScenarioConfig:
    """Parse scenario text, apply overrides and validate."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed scenario file: {e}") from e

    sections = _section_models()
    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section != "fades" and section not in sections:
            raise ConfigError("unknown section", key=section)
        raw[section] = dict(parser.items(section))

    for section, name, value in parse_overrides(overrides):
        raw.setdefault(section, {})[name] = value
    if seed is not None:
        raw.setdefault("scenario", {})["seed"] = str(seed)

    try:
        config = ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        raise _validation_to_config_error(e) from e
    logger.debug(f"Loaded scenario '{config.scenario.name}' with {len(overrides)} overrides")
    return config


def load_scenario(
    path: Path | str,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
) -> ScenarioConfig:
    """Read and validate a scenario file; I/O errors propagate as OSError."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text, overrides, seed)


def build_grid(config: ScenarioConfig) -> Grid:
    g = config.grid
    return Grid.covering(g.width_m, g.height_m, g.pixel_size_m, origin=(g.origin_x, g.origin_y))


def build_deployment(config: ScenarioConfig) -> Deployment:
    """Full-mesh deployment over the configured nodes and channels."""
    d = config.deployment
    try:
        if d.layout == "perimeter":
            nodes = perimeter_nodes(
                config.grid.width_m,
                config.grid.height_m,
                d.node_count,
                offset=d.node_offset_m,
                origin=(config.grid.origin_x, config.grid.origin_y),
            )
        else:
            nodes = list(d.nodes)
        frequencies = {c: channel_frequency(c) for c in d.channels}
        return Deployment.full_mesh(nodes, list(d.channels), frequencies)
    except (GeometryError, ValidationError) as e:
        raise ConfigError(str(e), key="deployment") from e


# =============================================================================
# Frames and estimates
# =============================================================================


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _opt_float(text: str) -> Optional[float]:
    return float(text) if text != "" else None


def write_frames(records: Iterable[FrameRecord], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(FRAME_COLUMNS)
        for r in records:
            x, y = r.true_position if r.true_position is not None else (None, None)
            writer.writerow([r.frame, _fmt(r.time_s), r.link, r.channel, _fmt(r.rss_db), _fmt(x), _fmt(y)])


def read_frames(path: Path | str) -> list[FrameRecord]:
    """Read a frame CSV; any layout problem raises ScenarioFormatError."""
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != FRAME_COLUMNS:
            raise ScenarioFormatError(f"{path}: expected columns {FRAME_COLUMNS}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            try:
                frame, time_s, link, channel, rss, x, y = row
                tx, ty = _opt_float(x), _opt_float(y)
                records.append(
                    FrameRecord(
                        frame=int(frame),
                        time_s=float(time_s),
                        link=int(link),
                        channel=int(channel),
                        rss_db=float(rss),
                        true_position=(tx, ty) if tx is not None and ty is not None else None,
                    )
                )
            except (ValueError, ValidationError) as e:
                raise ScenarioFormatError(f"{path}:{line_no}: malformed frame row", detail=str(e)) from e
    return records


def check_frames(records: Sequence[FrameRecord], deployment: Deployment) -> None:
    """Every record must name a known link on that link's channel, in time order."""
    last_time = -math.inf
    for r in records:
        if r.link >= deployment.link_count:
            raise ScenarioFormatError(f"frame {r.frame} references unknown link id {r.link}")
        if deployment.links[r.link].channel != r.channel:
            raise ScenarioFormatError(
                f"frame {r.frame}: link {r.link} is on channel {deployment.links[r.link].channel}, "
                f"not {r.channel}"
            )
        if r.time_s < last_time:
            raise ScenarioFormatError(f"frame {r.frame} is out of time order")
        last_time = r.time_s


def write_estimates(records: Iterable[EstimateRecord], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ESTIMATE_COLUMNS)
        for r in records:
            tx, ty = r.true_position if r.true_position is not None else (None, None)
            ex, ey = r.estimate if r.estimate is not None else (None, None)
            writer.writerow(
                [
                    r.frame,
                    _fmt(r.time_s),
                    _fmt(tx),
                    _fmt(ty),
                    _fmt(ex),
                    _fmt(ey),
                    _fmt(r.error_m),
                    r.support_pixels,
                    r.detecting_links,
                    r.status,
                ]
            )


def read_estimates(path: Path | str) -> list[EstimateRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ESTIMATE_COLUMNS:
            raise ScenarioFormatError(f"{path}: expected columns {ESTIMATE_COLUMNS}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            try:
                frame, time_s, tx, ty, ex, ey, err, support, detecting, _status = row
                truth = (float(tx), float(ty)) if tx and ty else None
                estimate = (float(ex), float(ey)) if ex and ey else None
                records.append(
                    EstimateRecord(
                        frame=int(frame),
                        time_s=float(time_s),
                        true_position=truth,
                        estimate=estimate,
                        error_m=_opt_float(err),
                        support_pixels=int(support),
                        detecting_links=int(detecting),
                    )
                )
            except (ValueError, ValidationError) as e:
                raise ScenarioFormatError(f"{path}:{line_no}: malformed estimate row", detail=str(e)) from e
    return records


def write_sweep(rows: Iterable[dict], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {k: repr(v) if isinstance(v, float) else ("" if v is None else v) for k, v in row.items()}
            )


# =============================================================================
# Calibration file
# =============================================================================


def write_calibration(result: CalibrationResult, path: Path | str) -> None:
    """Plain-text `[section]` / `key = value` calibration file."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["fit"] = {
        "eta": repr(result.fit.eta),
        "residual_norm": repr(result.fit.residual_norm),
        "fade_threshold_db": repr(result.fade_threshold_db),
        "transmit_power_dbm": "" if result.transmit_power_dbm is None else repr(result.transmit_power_dbm),
    }
    parser["reference_power_db"] = {str(c): repr(v) for c, v in result.fit.reference_power_db.items()}
    parser["links"] = {
        str(link): f"{repr(p)} {repr(fade)} {usable}"
        for link, (p, fade, usable) in enumerate(
            zip(result.los_power, result.fade_levels, result.link_usable)
        )
    }
    parser["pairs"] = {str(pair): str(flag) for pair, flag in enumerate(result.blacklist.usable)}
    with open(path, "w", encoding="utf-8") as f:
        f.write("# link = los_power_db fade_level_db usable\n")
        parser.write(f)


def read_calibration(path: Path | str) -> CalibrationResult:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
        fit_section = parser["fit"]
        fit = PathLossFit(
            eta=float(fit_section["eta"]),
            reference_power_db={int(c): float(v) for c, v in parser.items("reference_power_db")},
            residual_norm=float(fit_section["residual_norm"]),
        )
        links = sorted(((int(k), v.split()) for k, v in parser.items("links")), key=lambda kv: kv[0])
        if [k for k, _ in links] != list(range(len(links))):
            raise ValueError("link ids must be dense")
        pairs = sorted(((int(k), int(v)) for k, v in parser.items("pairs")), key=lambda kv: kv[0])
        transmit = fit_section.get("transmit_power_dbm", "")
        return CalibrationResult(
            fit=fit,
            los_power=[float(v[0]) for _, v in links],
            fade_levels=[float(v[1]) for _, v in links],
            link_usable=[int(v[2]) for _, v in links],
            blacklist=Blacklist(usable=[flag for _, flag in pairs]),
            fade_threshold_db=float(fit_section["fade_threshold_db"]),
            transmit_power_dbm=float(transmit) if transmit else None,
        )
    except (configparser.Error, KeyError, IndexError, ValueError, ValidationError) as e:
        raise ScenarioFormatError(f"{path}: malformed calibration file", detail=str(e)) from e


# =============================================================================
# Detector bitstream
# =============================================================================


def write_bitstream(frames: Sequence[bytes], pair_count: int, path: Path | str) -> None:
    """
    Magic, little-endian uint32 pair count, then one packed record per frame.

    Records are ceil(pair_count / 8) bytes each.
    """
    size = (pair_count + 7) // 8
    with open(path, "wb") as f:
        f.write(BITSTREAM_MAGIC)
        f.write(np.array([pair_count], dtype="<u4").tobytes())
        for record in frames:
            if len(record) != size:
                raise ScenarioFormatError(f"bitstream record of {len(record)} bytes, expected {size}")
            f.write(record)


def read_bitstream(path: Path | str) -> tuple[int, list[bytes]]:
    data = Path(path).read_bytes()
    if data[:4] != BITSTREAM_MAGIC or len(data) < 8:
        raise ScenarioFormatError(f"{path}: not a detector bitstream")
    pair_count = int(np.frombuffer(data[4:8], dtype="<u4")[0])
    size = (pair_count + 7) // 8
    body = data[8:]
    if size == 0 or len(body) % size:
        raise ScenarioFormatError(f"{path}: truncated bitstream")
    return pair_count, [body[i : i + size] for i in range(0, len(body), size)]
