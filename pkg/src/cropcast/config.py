"""Pipeline configuration: one TOML file drives every stage.

All randomness in a run flows from the single root seed; each stage draws
its own seed from a hash of (root seed, stage name) so stages can be rerun
independently and still reproduce the full-run bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

from .errors import InvalidConfigError, ParseError
from .forest import ForestParams
from .gridio import CELL_KM
from .mlp import MlpHyper, SplitSpec, hyper_from_mapping
from .raster import KM_IN_DEGREES
from .synth import LatLonBox, SynthConfig


def stage_seed(root_seed: int, stage: str) -> int:
    """Deterministic per-stage seed derived from the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class PathsConfig:
    """Resolved input/output locations; inputs may be scene-generated."""

    out_dir: Path
    stacks_dir: Path
    balances: Path
    calendar: Path
    zones_grid: Path
    zones_table: Path
    baseline_production: Path
    target_production: Path | None


@dataclass(frozen=True)
class SceneSpec:
    """Synthetic-scene request; present only when the config has [scene]."""

    north: float = 12.0
    west: float = 0.0
    side_cells: int = 24
    years: tuple[int, int] = (2018, 2020)
    noise_sigma: float = 0.1


@dataclass(frozen=True)
class SelectionSpec:
    top_n: int = 10
    keep: int = 5
    threshold_frac: float = 0.4
    cap: int = 3

    def __post_init__(self):
        if self.top_n < 1 or self.keep < 1 or self.cap < 1:
            raise InvalidConfigError("selection: top_n, keep, and cap must all be >= 1")
        if self.keep > self.top_n:
            raise InvalidConfigError(
                f"selection: keep ({self.keep}) cannot exceed top_n ({self.top_n})"
            )
        if not 0.0 <= self.threshold_frac <= 1.0:
            raise InvalidConfigError(
                f"selection: threshold_frac must lie in [0, 1], got {self.threshold_frac}"
            )


@dataclass(frozen=True)
class RunSpec:
    """What to model: one crop, one baseline year, one forecast year."""

    crop: str
    baseline_year: int
    target_year: int
    asof_day: int = 250

    def __post_init__(self):
        if not self.crop:
            raise InvalidConfigError("run: crop must be a nonempty commodity name")
        if self.baseline_year >= self.target_year:
            raise InvalidConfigError(
                f"run: baseline_year {self.baseline_year} must precede target_year {self.target_year}"
            )
        if not 1 <= self.asof_day <= 365:
            raise InvalidConfigError(f"run: asof_day must lie in [1, 365], got {self.asof_day}")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    threads: int
    paths: PathsConfig
    scene: SceneSpec | None
    selection: SelectionSpec
    run: RunSpec
    hyper: MlpHyper
    split: SplitSpec
    forest: ForestParams

    def stage_seed(self, stage: str) -> int:
        return stage_seed(self.seed, stage)

    def synth_config(self) -> SynthConfig:
        if self.scene is None:
            raise InvalidConfigError("config has no [scene] section to generate from")
        side = self.scene.side_cells * CELL_KM["PRODUCTION"] * KM_IN_DEGREES
        box = LatLonBox(
            north=self.scene.north,
            west=self.scene.west,
            south=self.scene.north - side,
            east=self.scene.west + side,
        )
        return SynthConfig(
            seed=self.stage_seed("synth"),
            box=box,
            years=self.scene.years,
            noise_sigma=self.scene.noise_sigma,
        )


_TOP_KEYS = {"seed", "threads", "paths", "scene", "selection", "run", "model", "split", "forecast"}
_PATH_KEYS = {
    "out_dir",
    "stacks_dir",
    "balances",
    "calendar",
    "zones_grid",
    "zones_table",
    "baseline_production",
    "target_production",
}
_SCENE_KEYS = {"north", "west", "side_cells", "years", "noise_sigma"}
_SELECTION_KEYS = {"top_n", "keep", "threshold_frac", "cap"}
_RUN_KEYS = {"crop", "baseline_year", "target_year", "asof_day"}
_SPLIT_KEYS = {"train_frac", "val_frac", "test_frac"}
_FOREST_KEYS = {"n_trees", "max_depth", "min_leaf", "bootstrap", "feature_subset"}

# Input path keys that [scene] fills in; giving both is ambiguous.
_SCENE_OWNED_PATHS = _PATH_KEYS - {"out_dir"}


def _reject_unknown(section: str, data: dict, allowed: set) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise InvalidConfigError(f"{section}: unknown keys {unknown}")


def _required(data: dict, section: str, key: str):
    if key not in data:
        raise InvalidConfigError(f"{section}: missing required key {key!r}")
    return data[key]


def _load_toml(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InvalidConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: not valid TOML: {e}") from e
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a table")
    return data


def _scene_spec(data: dict) -> SceneSpec:
    _reject_unknown("scene", data, _SCENE_KEYS)
    kwargs = dict(data)
    if "years" in kwargs:
        years = kwargs["years"]
        if not (isinstance(years, list) and len(years) == 2):
            raise InvalidConfigError("scene: years must be a two-element list [first, last]")
        kwargs["years"] = (int(years[0]), int(years[1]))
    spec = SceneSpec(**kwargs)
    if spec.side_cells < 3:
        raise InvalidConfigError(f"scene: side_cells must be >= 3, got {spec.side_cells}")
    if spec.noise_sigma < 0:
        raise InvalidConfigError(f"scene: noise_sigma must be >= 0, got {spec.noise_sigma}")
    if spec.years[0] > spec.years[1]:
        raise InvalidConfigError(f"scene: years {spec.years} are out of order")
    return spec


def _paths_config(data: dict, base: Path, scene: SceneSpec | None, run: RunSpec) -> PathsConfig:
    _reject_unknown("paths", data, _PATH_KEYS)
    if scene is not None:
        given = sorted(_SCENE_OWNED_PATHS.intersection(data))
        if given:
            raise InvalidConfigError(
                f"paths: {given} conflict with [scene]; scene runs generate those inputs"
            )
    out_dir = (base / data.get("out_dir", "out")).resolve()

    def resolve(key: str, default: Path | None) -> Path | None:
        if key in data:
            return (base / data[key]).resolve()
        return default

    if scene is not None:
        scene_dir = out_dir / "scene"
        defaults = {
            "stacks_dir": scene_dir / "stacks",
            "balances": scene_dir / "balances.csv",
            "calendar": scene_dir / "calendar.csv",
            "zones_grid": scene_dir / "zones.grdh",
            "zones_table": scene_dir / "zones.csv",
            "baseline_production": scene_dir / f"production_{run.baseline_year}.grdh",
            "target_production": scene_dir / f"production_{run.target_year}.grdh",
        }
    else:
        defaults = dict.fromkeys(_SCENE_OWNED_PATHS)
    resolved = {}
    for key in _SCENE_OWNED_PATHS:
        resolved[key] = resolve(key, defaults[key])
    missing = sorted(k for k, v in resolved.items() if v is None and k != "target_production")
    if missing:
        raise InvalidConfigError(f"paths: missing required keys {missing} (no [scene] to generate them)")
    return PathsConfig(out_dir=out_dir, **resolved)


def load_config(
    path,
    seed: int | None = None,
    out_dir=None,
    threads: int | None = None,
) -> PipelineConfig:
    """Parse and cross-check a TOML config; keyword arguments override it.

    Relative paths resolve against the config file's directory, except an
    overriding ``out_dir``, which resolves against the working directory.
    """
    p = Path(path)
    data = _load_toml(p)
    _reject_unknown("config", data, _TOP_KEYS)

    root_seed = int(data.get("seed", 0)) if seed is None else int(seed)
    n_threads = int(data.get("threads", 1)) if threads is None else int(threads)
    if n_threads < 1:
        raise InvalidConfigError(f"threads must be >= 1, got {n_threads}")

    run_data = _required(data, "config", "run")
    _reject_unknown("run", run_data, _RUN_KEYS)
    try:
        run = RunSpec(**run_data)
    except TypeError as e:
        raise InvalidConfigError(f"run: {e}") from e

    scene = _scene_spec(data["scene"]) if "scene" in data else None
    if scene is not None:
        first, last = scene.years
        for label, year in (("baseline_year", run.baseline_year), ("target_year", run.target_year)):
            if not first <= year <= last:
                raise InvalidConfigError(
                    f"run: {label} {year} outside scene years {first}..{last}"
                )

    paths_data = dict(data.get("paths", {}))
    if out_dir is not None:
        paths_data["out_dir"] = str(Path(out_dir).resolve())
    paths = _paths_config(paths_data, p.resolve().parent, scene, run)

    sel_data = data.get("selection", {})
    _reject_unknown("selection", sel_data, _SELECTION_KEYS)
    selection = SelectionSpec(**sel_data)

    try:
        hyper = hyper_from_mapping(dict(data.get("model", {})))
    except ValueError as e:
        raise InvalidConfigError(f"model: {e}") from e

    split_data = data.get("split", {})
    _reject_unknown("split", split_data, _SPLIT_KEYS)
    try:
        split = SplitSpec(seed=stage_seed(root_seed, "split"), **split_data)
    except ValueError as e:
        raise InvalidConfigError(f"split: {e}") from e

    forest_data = data.get("forecast", {})
    _reject_unknown("forecast", forest_data, _FOREST_KEYS)
    try:
        forest = ForestParams(**forest_data)
    except ValueError as e:
        raise InvalidConfigError(f"forecast: {e}") from e

    return PipelineConfig(
        seed=root_seed,
        threads=n_threads,
        paths=paths,
        scene=scene,
        selection=selection,
        run=run,
        hyper=hyper,
        split=split,
        forest=forest,
    )


def validate_config(config_path) -> list[str]:
    """Diagnostics for a config file; empty list iff the config is runnable.

    Structural problems surface one diagnostic each instead of raising, so
    callers can report everything at once.
    """
    try:
        cfg = load_config(config_path)
    except (InvalidConfigError, ParseError) as e:
        return [str(e)]

    diagnostics = []
    if cfg.scene is None:
        checks = [
            ("stacks_dir", cfg.paths.stacks_dir),
            ("balances", cfg.paths.balances),
            ("calendar", cfg.paths.calendar),
            ("zones_grid", cfg.paths.zones_grid),
            ("zones_table", cfg.paths.zones_table),
            ("baseline_production", cfg.paths.baseline_production),
        ]
        if cfg.paths.target_production is not None:
            checks.append(("target_production", cfg.paths.target_production))
        for label, path in checks:
            if not path.exists():
                diagnostics.append(f"paths: {label} does not exist: {path}")
        grd = cfg.paths.baseline_production
        if grd.exists() and not grd.with_suffix(".grd").exists():
            diagnostics.append(f"paths: baseline_production payload missing: {grd.with_suffix('.grd')}")
    return diagnostics
