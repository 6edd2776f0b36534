"""Run configuration: JSON parsing, whole-file validation, derived builders.

A config describes one run end to end: the correlation model, the setting
grids and the four chosen pairs, trial counts and the master seed, the
geometry and stage times, measurement-uncertainty widths, and the mode flags.
Parsing reports *every* problem found, not just the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .angles import Angle, setting_from_text
from .errors import ConfigError, InvalidScheduleError, MissingDataError
from .models import (
    Behavior,
    ChshSettings,
    LhvModel,
    behavior_from_csv,
    lhv_behavior,
    optimal_singlet_settings,
    pr_box,
    pr_box_settings,
    singlet_behavior,
)
from .spacetime import Schedule, build_schedule

MODEL_CHOICES = ("singlet", "pr-box", "lhv", "custom")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "singlet"
    grid_a: tuple = (Angle.of(0), Angle.of(1, 2))
    grid_b: tuple = (Angle.of(1, 4), Angle.of(-1, 4))
    chsh: ChshSettings = field(default_factory=optimal_singlet_settings)
    trials_per_pair: int = 10000
    seed: int = 0
    position_a: float = -1.0
    position_b: float = 1.0
    source_x: float = 0.0
    t_prepare: float = 0.0
    t_setting: float = 0.1
    t_detection: float = 0.2
    t_communication: float = 2.3
    signal_speed: float = 1.0
    c: float = 1.0
    q_setting_width: float = 0.0
    q_outcome_width: float = 0.0
    preset_settings: bool = False
    preset_pair: tuple | None = None
    unresolved_local_setting: bool = False
    workers: int = 1
    traced_trials: int = 1
    keep_records: bool = True
    lhv: LhvModel | None = None
    behavior_file: str | None = None


def build_model(config: ExperimentConfig) -> Behavior:
    if config.model == "singlet":
        return singlet_behavior(config.grid_a, config.grid_b)
    if config.model == "pr-box":
        return pr_box()
    if config.model == "lhv":
        return lhv_behavior(config.lhv, config.grid_a, config.grid_b)
    if config.model == "custom":
        with open(config.behavior_file, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            return behavior_from_csv(text)
        except (ValueError, MissingDataError) as exc:
            raise ConfigError([("behavior_file", str(exc))]) from exc
    raise ValueError(f"unknown model {config.model!r}")


def build_run_schedule(config: ExperimentConfig) -> Schedule:
    return build_schedule(
        position_a=config.position_a,
        position_b=config.position_b,
        source_x=config.source_x,
        t_prepare=config.t_prepare,
        t_setting=config.t_setting,
        t_detection=config.t_detection,
        t_communication=config.t_communication,
        signal_speed=config.signal_speed,
        c=config.c,
    )


_KNOWN_KEYS = {
    "model",
    "grid_a",
    "grid_b",
    "chsh",
    "trials_per_pair",
    "seed",
    "positions",
    "stage_times",
    "signal_speed",
    "c",
    "q_setting_width",
    "q_outcome_width",
    "preset_settings",
    "preset_pair",
    "unresolved_local_setting",
    "workers",
    "traced_trials",
    "keep_records",
    "lhv",
    "behavior_file",
}


def _parse_setting(value, path, errors, angles: bool):
    if isinstance(value, bool):
        errors.append((path, "setting must be an integer label or an angle string"))
        return None
    if isinstance(value, int):
        if angles:
            errors.append((path, "this model takes angle settings; write e.g. \"0\" or \"pi/4\""))
            return None
        return value
    if isinstance(value, str):
        try:
            return Angle.parse(value) if angles else setting_from_text(value)
        except ValueError as exc:
            errors.append((path, str(exc)))
            return None
    errors.append((path, f"setting must be an integer label or an angle string, got {value!r}"))
    return None


def _parse_grid(raw, path, errors, angles: bool):
    if not isinstance(raw, list) or not raw:
        errors.append((path, "must be a non-empty list of settings"))
        return None
    out = []
    for i, item in enumerate(raw):
        v = _parse_setting(item, f"{path}[{i}]", errors, angles)
        if v is not None:
            out.append(v)
    if len(out) != len(raw):
        return None
    if len(set(out)) != len(out):
        errors.append((path, "settings must be distinct"))
        return None
    return tuple(out)


def _want(raw, key, kind, path, errors, default):
    if key not in raw:
        return default
    value = raw[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (isinstance(value, bool) and kind is not bool):
        errors.append((path, f"expected {kind.__name__}"))
        return default
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a JSON config; raise with every error found."""
    errors: list = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"not valid JSON: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([("", "top level must be a JSON object")])

    for key in sorted(set(raw) - _KNOWN_KEYS):
        errors.append((key, "unknown key"))

    model = _want(raw, "model", str, "model", errors, "singlet")
    if model not in MODEL_CHOICES:
        errors.append(("model", f"must be one of {MODEL_CHOICES}"))
        model = "singlet"

    # model-appropriate grid and settings defaults; the singlet takes angles
    angles = model == "singlet"
    if angles:
        default_grid_a: tuple = (Angle.of(0), Angle.of(1, 2))
        default_grid_b: tuple = (Angle.of(1, 4), Angle.of(-1, 4))
        default_chsh = optimal_singlet_settings()
    else:
        default_grid_a = (0, 1)
        default_grid_b = (0, 1)
        default_chsh = pr_box_settings()

    grid_a = _parse_grid(raw["grid_a"], "grid_a", errors, angles) if "grid_a" in raw else default_grid_a
    grid_b = _parse_grid(raw["grid_b"], "grid_b", errors, angles) if "grid_b" in raw else default_grid_b

    chsh = default_chsh
    if "chsh" in raw:
        if not isinstance(raw["chsh"], dict):
            errors.append(("chsh", "must be an object with x0, x1, y0, y1"))
        else:
            vals = {}
            for k in ("x0", "x1", "y0", "y1"):
                if k not in raw["chsh"]:
                    errors.append((f"chsh.{k}", "missing"))
                else:
                    vals[k] = _parse_setting(raw["chsh"][k], f"chsh.{k}", errors, angles)
            for k in sorted(set(raw["chsh"]) - {"x0", "x1", "y0", "y1"}):
                errors.append((f"chsh.{k}", "unknown key"))
            if len(vals) == 4 and all(v is not None for v in vals.values()):
                chsh = ChshSettings(**vals)

    trials = _want(raw, "trials_per_pair", int, "trials_per_pair", errors, 10000)
    if isinstance(trials, int) and trials < 1:
        errors.append(("trials_per_pair", f"must be at least 1, got {trials}"))
    seed = _want(raw, "seed", int, "seed", errors, 0)
    if isinstance(seed, int) and seed < 0:
        errors.append(("seed", "must be non-negative"))

    position_a, position_b, source_x = -1.0, 1.0, 0.0
    if "positions" in raw:
        if not isinstance(raw["positions"], dict):
            errors.append(("positions", "must be an object with a, b, source"))
        else:
            position_a = _want(raw["positions"], "a", float, "positions.a", errors, -1.0)
            position_b = _want(raw["positions"], "b", float, "positions.b", errors, 1.0)
            source_x = _want(raw["positions"], "source", float, "positions.source", errors, 0.0)
            for k in sorted(set(raw["positions"]) - {"a", "b", "source"}):
                errors.append((f"positions.{k}", "unknown key"))

    t_prepare, t_setting, t_detection, t_communication = 0.0, 0.1, 0.2, 2.3
    if "stage_times" in raw:
        if not isinstance(raw["stage_times"], dict):
            errors.append(("stage_times", "must be an object"))
        else:
            st = raw["stage_times"]
            t_prepare = _want(st, "prepare", float, "stage_times.prepare", errors, 0.0)
            t_setting = _want(st, "setting", float, "stage_times.setting", errors, 0.1)
            t_detection = _want(st, "detection", float, "stage_times.detection", errors, 0.2)
            t_communication = _want(st, "communication", float, "stage_times.communication", errors, 2.3)
            for k in sorted(set(st) - {"prepare", "setting", "detection", "communication"}):
                errors.append((f"stage_times.{k}", "unknown key"))

    signal_speed = _want(raw, "signal_speed", float, "signal_speed", errors, 1.0)
    c = _want(raw, "c", float, "c", errors, 1.0)
    q_setting_width = _want(raw, "q_setting_width", float, "q_setting_width", errors, 0.0)
    q_outcome_width = _want(raw, "q_outcome_width", float, "q_outcome_width", errors, 0.0)
    for name, width in (("q_setting_width", q_setting_width), ("q_outcome_width", q_outcome_width)):
        if isinstance(width, float) and width < 0.0:
            errors.append((name, "must be non-negative"))
    preset_settings = _want(raw, "preset_settings", bool, "preset_settings", errors, False)
    unresolved = _want(raw, "unresolved_local_setting", bool, "unresolved_local_setting", errors, False)
    workers = _want(raw, "workers", int, "workers", errors, 1)
    if isinstance(workers, int) and workers < 1:
        errors.append(("workers", "must be at least 1"))
    traced = _want(raw, "traced_trials", int, "traced_trials", errors, 1)
    if isinstance(traced, int) and traced < 0:
        errors.append(("traced_trials", "must be non-negative"))
    keep_records = _want(raw, "keep_records", bool, "keep_records", errors, True)

    preset_pair = None
    if "preset_pair" in raw:
        if not isinstance(raw["preset_pair"], list) or len(raw["preset_pair"]) != 2:
            errors.append(("preset_pair", "must be a two-element list [x, y]"))
        else:
            px = _parse_setting(raw["preset_pair"][0], "preset_pair[0]", errors, angles)
            py = _parse_setting(raw["preset_pair"][1], "preset_pair[1]", errors, angles)
            if px is not None and py is not None:
                preset_pair = (px, py)

    lhv = None
    if model == "lhv":
        if "lhv" not in raw:
            errors.append(("lhv", "model 'lhv' needs hidden-variable tables"))
        elif not isinstance(raw["lhv"], dict):
            errors.append(("lhv", "must be an object"))
        else:
            tables = raw["lhv"]
            try:
                hidden = tuple(tables["hidden"]) if "hidden" in tables else tuple(range(len(tables["prior"])))
                lhv = LhvModel(
                    hidden,
                    tuple(tables["prior"]),
                    tuple(tuple(map(tuple, x)) for x in tables["response_a"]),
                    tuple(tuple(map(tuple, y)) for y in tables["response_b"]),
                )
                lhv.arrays()
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(("lhv", f"bad hidden-variable tables: {exc}"))
                lhv = None
    elif "lhv" in raw:
        errors.append(("lhv", f"only meaningful for model 'lhv', not {model!r}"))

    behavior_file = None
    if model == "custom":
        behavior_file = _want(raw, "behavior_file", str, "behavior_file", errors, None)
        if behavior_file is None:
            errors.append(("behavior_file", "model 'custom' needs a behavior file path"))
    elif "behavior_file" in raw:
        errors.append(("behavior_file", f"only meaningful for model 'custom', not {model!r}"))

    # cross-field checks
    if grid_a and grid_b and model != "custom":
        for name, value, grid in (
            ("chsh.x0", chsh.x0, grid_a),
            ("chsh.x1", chsh.x1, grid_a),
            ("chsh.y0", chsh.y0, grid_b),
            ("chsh.y1", chsh.y1, grid_b),
        ):
            if value not in grid:
                errors.append((name, f"setting {value!r} not in the corresponding grid"))
        if preset_pair is not None:
            if preset_pair[0] not in grid_a:
                errors.append(("preset_pair[0]", f"{preset_pair[0]!r} not in grid_a"))
            if preset_pair[1] not in grid_b:
                errors.append(("preset_pair[1]", f"{preset_pair[1]!r} not in grid_b"))
    if model == "pr-box" and (grid_a != (0, 1) or grid_b != (0, 1)):
        errors.append(("grid_a", "the pr-box model requires binary grids [0, 1]"))

    try:
        build_schedule(
            position_a=position_a if isinstance(position_a, float) else -1.0,
            position_b=position_b if isinstance(position_b, float) else 1.0,
            source_x=source_x if isinstance(source_x, float) else 0.0,
            t_prepare=t_prepare,
            t_setting=t_setting,
            t_detection=t_detection,
            t_communication=t_communication,
            signal_speed=signal_speed,
            c=c,
        )
    except (InvalidScheduleError, TypeError) as exc:
        errors.append(("stage_times", str(exc)))

    if errors:
        raise ConfigError(errors)

    return ExperimentConfig(
        model=model,
        grid_a=grid_a,
        grid_b=grid_b,
        chsh=chsh,
        trials_per_pair=trials,
        seed=seed,
        position_a=position_a,
        position_b=position_b,
        source_x=source_x,
        t_prepare=t_prepare,
        t_setting=t_setting,
        t_detection=t_detection,
        t_communication=t_communication,
        signal_speed=signal_speed,
        c=c,
        q_setting_width=q_setting_width,
        q_outcome_width=q_outcome_width,
        preset_settings=preset_settings,
        preset_pair=preset_pair,
        unresolved_local_setting=unresolved,
        workers=workers,
        traced_trials=traced,
        keep_records=keep_records,
        lhv=lhv,
        behavior_file=behavior_file,
    )


def config_defaults_json() -> str:
    """A documented minimal config, usable as a starting point."""
    doc = {
        "model": "singlet",
        "grid_a": ["0", "pi/2"],
        "grid_b": ["pi/4", "-pi/4"],
        "chsh": {"x0": "0", "x1": "pi/2", "y0": "pi/4", "y1": "-pi/4"},
        "trials_per_pair": 10000,
        "seed": 0,
        "positions": {"a": -1.0, "b": 1.0, "source": 0.0},
        "stage_times": {"prepare": 0.0, "setting": 0.1, "detection": 0.2, "communication": 2.3},
        "signal_speed": 1.0,
        "workers": 1,
        "traced_trials": 1,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)
