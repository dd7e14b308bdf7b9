"""Engine and service configuration.

Every tunable threshold lives here with its documented default; nothing
is hidden inside the algorithms. The service config is one flat JSON
document whose keys map 1:1 onto ServiceConfig fields, overridable per
key through INKASSESS_<UPPERCASE_KEY> environment variables.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    # feature extraction
    pause_threshold_s: float = 0.2        # gap longer than this is a pause
    resample_spacing_mm: float = 0.25
    smooth_window: int = 9                # centered moving average, points
    tremor_min_path_mm: float = 2.0       # shorter strokes report (0, 0)
    direction_change_angle_deg: float = 20.0

    # corner detection
    corner_angle_deg: float = 45.0
    corner_neighborhood_mm: float = 1.0
    corner_merge_mm: float = 2.0
    corner_smooth_window: int = 3     # pre-smoothing of the resampled path

    # stroke grouping
    group_gap_mm: float = 5.0
    group_gap_s: float = 1.0

    # shape classification
    dot_diagonal_mm: float = 1.5
    line_spread_ratio: float = 0.05
    closure_frac: float = 0.15            # endpoint gap / path length
    circle_residual_frac: float = 0.15    # fit residual / radius
    rect_axis_tol_deg: float = 15.0       # rectangle vs diamond

    # scoring
    angle_tol_deg: float = 15.0           # clock marks and hands
    contour_min_radius_mm: float = 15.0
    contour_closure_frac: float = 0.10
    hand_center_frac: float = 0.20        # hand start within this * radius
    crossing_ink_mm: float = 2.0          # ink path inside region to count
    long_pause_s: float = 3.0             # summary anomaly flag

    # replay suggestions
    correction_age_s: float = 2.0
    correction_overlap_frac: float = 0.30
    correction_distance_mm: float = 1.0   # overdraw proximity
    tremor_percentile: float = 95.0
    tremor_floor_mm: float = 0.15         # ignore tremor below this


DEFAULT_ENGINE = EngineConfig()


@dataclass(frozen=True)
class ServiceConfig:
    """Session service + CLI settings, loadable from a flat JSON file."""

    store_root: str = "./ink-store"
    host: str = "127.0.0.1"
    tcp_port: int = 8700
    ws_port: int = 8701
    token: str = ""                       # static shared token, "" disables
    feature_export: str = "csv"           # csv | json
    dashboard_root: str = ""              # serve a built dashboard, "" disables
    engine: EngineConfig = DEFAULT_ENGINE


_ENV_PREFIX = "INKASSESS_"


def load_service_config(path: str | None = None,
                        env: dict[str, str] | None = None) -> ServiceConfig:
    """Build a ServiceConfig from an optional JSON file plus env overrides.

    Unknown keys are rejected so typos fail loudly.
    """
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold one JSON object")

    svc_fields = {f.name: f for f in dataclasses.fields(ServiceConfig)
                  if f.name != "engine"}
    eng_fields = {f.name: f for f in dataclasses.fields(EngineConfig)}

    for key, value in env.items():
        if not key.startswith(_ENV_PREFIX):
            continue
        name = key[len(_ENV_PREFIX):].lower()
        if name in svc_fields or name in eng_fields:
            raw[name] = value

    svc_kwargs: dict = {}
    eng_kwargs: dict = {}
    for key, value in raw.items():
        if key in svc_fields:
            svc_kwargs[key] = _coerce(svc_fields[key].type, value, key)
        elif key in eng_fields:
            eng_kwargs[key] = _coerce(eng_fields[key].type, value, key)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    engine = dataclasses.replace(DEFAULT_ENGINE, **eng_kwargs)
    return ServiceConfig(engine=engine, **svc_kwargs)


def _coerce(typ: str | type, value, key: str):
    name = typ if isinstance(typ, str) else typ.__name__
    try:
        if name == "float":
            return float(value)
        if name == "int":
            return int(value)
        if name == "str":
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    raise ConfigError(f"unsupported config field type for {key!r}")
