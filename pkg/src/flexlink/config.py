"""Scenario configuration: TOML schema, validation, and object construction.

A scenario file is a single TOML document describing the arm (links, joints,
motors), the reference trajectory, the controller and its gains, optional
parameter adaptation, integration settings, and output layout.  Loading is
strict: unknown keys, missing required keys, wrong types, and non-physical
values are all reported together in one aggregated error list rather than
one at a time.

``load_config`` parses and schema-checks a file; ``validate_config`` runs the
deeper physics checks (gain symmetry and positive semidefiniteness, bound
ordering, actuation-projector idempotency at the start pose) without running
the scenario.  ``build_chain`` / ``build_gains`` / ``build_trajectory`` turn a
validated configuration into library objects.

Preset scenario files live in the packaged ``configs/`` directory and are
resolved by name through ``preset_path``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from .beam import LinkParams, make_clamped_free_basis
from .chain import Chain, JointSpec, MotorSpec
from .control import GainSet, actuation_matrix
from .dynamics import LinkModel
from .reference import TrajectorySpec

__all__ = [
    "AdaptationConfig",
    "ConfigError",
    "GainConfig",
    "IntegrationConfig",
    "JointConfig",
    "LinkConfig",
    "ModalConfig",
    "MotorConfig",
    "OutputConfig",
    "ScenarioConfig",
    "TrajectoryConfig",
    "ValidationReport",
    "build_chain",
    "build_gains",
    "build_trajectory",
    "load_config",
    "preset_names",
    "preset_path",
    "validate_config",
]


CONTROLLERS = ("slpc", "slpc-adaptive", "ptc", "pd", "compare")

N_PARAMS = 5


class ConfigError(ValueError):
    """Aggregated configuration failure: one message per problem found."""

    def __init__(self, errors: list[str]):
        self.errors = tuple(errors)
        super().__init__("\n".join(errors))


# ---------------------------------------------------------------------------
# configuration dataclasses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkConfig:
    length: float
    density: float
    width: float
    height: float
    modulus: float
    offset_y: float = 0.0
    offset_z: float = 0.0


@dataclass(frozen=True)
class MotorConfig:
    axis: int
    inertia: float


@dataclass(frozen=True)
class JointConfig:
    child: int
    parent: int | None
    locked_rot_axes: tuple[int, ...]
    free_rot_axis: int | None
    motors: tuple[MotorConfig, ...]
    anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class TrajectoryConfig:
    radius: float = 0.5
    angular_rate: float = 1.0
    tau_ramp: float = 1.5
    tau_blend: float = 2.0
    start_angles: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class GainConfig:
    """Feedback gains for one link; ``twist`` is the full 6x6 matrix."""

    twist: tuple[tuple[float, ...], ...]
    kp: float
    kd: float
    torque_limit: float

    def twist_matrix(self) -> np.ndarray:
        return np.array(self.twist, dtype=float)


@dataclass(frozen=True)
class AdaptationConfig:
    gains: tuple[float, ...]
    initial_offset: tuple[float, ...]
    margin: float | None
    lower: tuple[float, ...] | None
    upper: tuple[float, ...] | None
    span: float = 2.0 * np.pi
    noise: bool = False
    noise_scale: float = 0.0


@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 1e-3
    t_f: float = 25.0
    substeps: int = 10


@dataclass(frozen=True)
class ModalConfig:
    n_bending: int = 3
    n_axial: int = 1


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs"
    log_every: int = 1
    field_every: float = 0.01
    xi_points: int = 21


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    controller: str
    links: tuple[LinkConfig, ...]
    joints: tuple[JointConfig, ...]
    trajectory: TrajectoryConfig
    gains: tuple[GainConfig, ...]
    adaptation: AdaptationConfig | None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    modal: ModalConfig = field(default_factory=ModalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    gravity: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ValidationReport:
    """Aggregated validation outcome; ``ok`` iff there are no errors."""

    errors: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self) -> str:
        lines = [f"error: {e}" for e in self.errors]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok"


# ---------------------------------------------------------------------------
# strict table walker
# ---------------------------------------------------------------------------


class _Table:
    """Typed accessor over one TOML table that records errors and used keys."""

    def __init__(self, data: dict[str, Any], path: str, errors: list[str]):
        self.data = data
        self.path = path
        self.errors = errors
        self.used: set[str] = set()

    def _label(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def _get(self, key: str, required: bool, default: Any) -> Any:
        self.used.add(key)
        if key in self.data:
            return self.data[key]
        if required:
            self.errors.append(f"missing required key '{self._label(key)}'")
        return default

    def number(self, key: str, required: bool = True, default: float = 0.0) -> float:
        raw = self._get(key, required, default)
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.errors.append(f"'{self._label(key)}' must be a number")
            return float(default)
        return float(raw)

    def integer(self, key: str, required: bool = True, default: int = 0) -> int:
        raw = self._get(key, required, default)
        if isinstance(raw, bool) or not isinstance(raw, int):
            self.errors.append(f"'{self._label(key)}' must be an integer")
            return int(default)
        return int(raw)

    def boolean(self, key: str, required: bool = True, default: bool = False) -> bool:
        raw = self._get(key, required, default)
        if not isinstance(raw, bool):
            self.errors.append(f"'{self._label(key)}' must be true or false")
            return bool(default)
        return raw

    def text(self, key: str, required: bool = True, default: str = "") -> str:
        raw = self._get(key, required, default)
        if not isinstance(raw, str):
            self.errors.append(f"'{self._label(key)}' must be a string")
            return str(default)
        return raw

    def number_list(
        self, key: str, length: int | None, required: bool = True, default: Any = None
    ) -> list[float] | None:
        raw = self._get(key, required, default)
        if raw is default:
            return None if default is None else list(default)
        if not isinstance(raw, list) or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) for x in raw
        ):
            self.errors.append(f"'{self._label(key)}' must be a list of numbers")
            return None
        if length is not None and len(raw) != length:
            self.errors.append(
                f"'{self._label(key)}' must have exactly {length} entries, got {len(raw)}"
            )
            return None
        return [float(x) for x in raw]

    def integer_list(self, key: str, required: bool = True, default: Any = None) -> list[int] | None:
        raw = self._get(key, required, default)
        if raw is default:
            return None if default is None else list(default)
        if not isinstance(raw, list) or any(
            isinstance(x, bool) or not isinstance(x, int) for x in raw
        ):
            self.errors.append(f"'{self._label(key)}' must be a list of integers")
            return None
        return list(raw)

    def matrix(self, key: str, rows: int, cols: int, required: bool = True) -> list[list[float]] | None:
        raw = self._get(key, required, None)
        if raw is None:
            return None
        ok = (
            isinstance(raw, list)
            and len(raw) == rows
            and all(
                isinstance(r, list)
                and len(r) == cols
                and all(not isinstance(x, bool) and isinstance(x, (int, float)) for x in r)
                for r in raw
            )
        )
        if not ok:
            self.errors.append(
                f"'{self._label(key)}' must be a {rows}x{cols} matrix of numbers"
            )
            return None
        return [[float(x) for x in r] for r in raw]

    def table(self, key: str, required: bool = True) -> "_Table | None":
        raw = self._get(key, required, None)
        if raw is None:
            return None
        if not isinstance(raw, dict):
            self.errors.append(f"'{self._label(key)}' must be a table")
            return None
        return _Table(raw, self._label(key), self.errors)

    def table_list(self, key: str, required: bool = True) -> "list[_Table] | None":
        raw = self._get(key, required, None)
        if raw is None:
            return None
        if not isinstance(raw, list) or not all(isinstance(x, dict) for x in raw):
            self.errors.append(f"'{self._label(key)}' must be an array of tables")
            return None
        return [
            _Table(x, f"{self._label(key)}[{i}]", self.errors) for i, x in enumerate(raw)
        ]

    def has(self, key: str) -> bool:
        return key in self.data

    def reject_unknown(self) -> None:
        for key in sorted(set(self.data) - self.used):
            self.errors.append(f"unknown key '{self._label(key)}'")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _parse_link(tbl: _Table) -> LinkConfig:
    link = LinkConfig(
        length=tbl.number("length"),
        density=tbl.number("density"),
        width=tbl.number("width"),
        height=tbl.number("height"),
        modulus=tbl.number("modulus"),
        offset_y=tbl.number("offset_y", required=False, default=0.0),
        offset_z=tbl.number("offset_z", required=False, default=0.0),
    )
    tbl.reject_unknown()
    for name in ("length", "density", "width", "height", "modulus"):
        if getattr(link, name) <= 0.0:
            tbl.errors.append(f"'{tbl.path}.{name}' must be positive")
    return link


def _parse_joint(tbl: _Table, n_links: int) -> JointConfig:
    child = tbl.integer("child")
    parent = tbl.integer("parent", required=False, default=-1)
    locked = tbl.integer_list("locked_rot_axes", required=False, default=[]) or []
    free_axis = tbl.integer("free_rot_axis", required=False, default=-1)
    anchor = tbl.number_list("anchor", 3, required=False, default=[0.0, 0.0, 0.0])
    motor_tbls = tbl.table_list("motors", required=False) or []
    motors = []
    for mt in motor_tbls:
        motor = MotorConfig(axis=mt.integer("axis"), inertia=mt.number("inertia"))
        mt.reject_unknown()
        if motor.axis not in (0, 1, 2):
            tbl.errors.append(f"'{mt.path}.axis' must be 0, 1, or 2")
        if motor.inertia <= 0.0:
            tbl.errors.append(f"'{mt.path}.inertia' must be positive")
        motors.append(motor)
    tbl.reject_unknown()
    if not 0 <= child < n_links:
        tbl.errors.append(f"'{tbl.path}.child' must name a link index (0..{n_links - 1})")
    if parent >= 0 and not 0 <= parent < n_links:
        tbl.errors.append(f"'{tbl.path}.parent' must name a link index (0..{n_links - 1})")
    if len(set(locked)) != len(locked) or any(a not in (0, 1, 2) for a in locked):
        tbl.errors.append(f"'{tbl.path}.locked_rot_axes' must be distinct axes from 0, 1, 2")
    if free_axis >= 0 and free_axis not in (0, 1, 2):
        tbl.errors.append(f"'{tbl.path}.free_rot_axis' must be 0, 1, or 2")
    if len(locked) == 2 and free_axis < 0:
        tbl.errors.append(f"'{tbl.path}' locks two axes and must name free_rot_axis")
    return JointConfig(
        child=child,
        parent=parent if parent >= 0 else None,
        locked_rot_axes=tuple(locked),
        free_rot_axis=free_axis if free_axis >= 0 else None,
        motors=tuple(motors),
        anchor=tuple(anchor or (0.0, 0.0, 0.0)),
    )


def _parse_trajectory(tbl: _Table) -> TrajectoryConfig:
    traj = TrajectoryConfig(
        radius=tbl.number("radius", required=False, default=0.5),
        angular_rate=tbl.number("angular_rate", required=False, default=1.0),
        tau_ramp=tbl.number("tau_ramp", required=False, default=1.5),
        tau_blend=tbl.number("tau_blend", required=False, default=2.0),
        start_angles=tuple(
            tbl.number_list("start_angles", 3, required=False, default=[0.0, 0.0, 0.0])
            or (0.0, 0.0, 0.0)
        ),
    )
    tbl.reject_unknown()
    if traj.radius < 0.0:
        tbl.errors.append(f"'{tbl.path}.radius' must be nonnegative")
    for name in ("tau_ramp", "tau_blend"):
        if getattr(traj, name) <= 0.0:
            tbl.errors.append(f"'{tbl.path}.{name}' must be positive")
    return traj


def _parse_gains(tbl: _Table) -> GainConfig:
    has_diag = tbl.has("twist_diag")
    has_full = tbl.has("twist")
    twist: list[list[float]] = [[0.0] * 6 for _ in range(6)]
    if has_diag and has_full:
        tbl.errors.append(f"'{tbl.path}' must set either twist_diag or twist, not both")
    if has_full:
        mat = tbl.matrix("twist", 6, 6)
        if mat is not None:
            twist = mat
    elif has_diag:
        diag = tbl.number_list("twist_diag", 6)
        if diag is not None:
            twist = [[diag[i] if i == j else 0.0 for j in range(6)] for i in range(6)]
    else:
        tbl.errors.append(f"'{tbl.path}' must set twist_diag or twist")
    gains = GainConfig(
        twist=tuple(tuple(row) for row in twist),
        kp=tbl.number("kp", required=False, default=0.0),
        kd=tbl.number("kd", required=False, default=0.0),
        torque_limit=tbl.number("torque_limit", required=False, default=100.0),
    )
    tbl.reject_unknown()
    if gains.kp < 0.0 or gains.kd < 0.0:
        tbl.errors.append(f"'{tbl.path}.kp' and '{tbl.path}.kd' must be nonnegative")
    if gains.torque_limit <= 0.0:
        tbl.errors.append(f"'{tbl.path}.torque_limit' must be positive")
    return gains


def _parse_adaptation(tbl: _Table) -> AdaptationConfig:
    gains = tbl.number_list("gains", N_PARAMS)
    offset_raw = tbl.data.get("initial_offset", 0.1)
    tbl.used.add("initial_offset")
    if isinstance(offset_raw, list):
        offsets = tbl.number_list("initial_offset", N_PARAMS, required=False, default=offset_raw)
        offset = tuple(offsets) if offsets is not None else (0.0,) * N_PARAMS
    elif isinstance(offset_raw, (int, float)) and not isinstance(offset_raw, bool):
        offset = (float(offset_raw),) * N_PARAMS
    else:
        tbl.errors.append(f"'{tbl.path}.initial_offset' must be a number or 5-entry list")
        offset = (0.0,) * N_PARAMS
    has_margin = tbl.has("margin")
    has_box = tbl.has("lower") or tbl.has("upper")
    margin: float | None = None
    lower: list[float] | None = None
    upper: list[float] | None = None
    if has_margin and has_box:
        tbl.errors.append(f"'{tbl.path}' must set either margin or lower/upper, not both")
        tbl.used.update({"margin", "lower", "upper"})
    elif has_box:
        lower = tbl.number_list("lower", N_PARAMS)
        upper = tbl.number_list("upper", N_PARAMS)
    else:
        margin = tbl.number("margin", required=False, default=0.2)
        if margin <= 0.0:
            tbl.errors.append(f"'{tbl.path}.margin' must be positive")
    adapt = AdaptationConfig(
        gains=tuple(gains) if gains is not None else (1.0,) * N_PARAMS,
        initial_offset=offset,
        margin=margin,
        lower=tuple(lower) if lower is not None else None,
        upper=tuple(upper) if upper is not None else None,
        span=tbl.number("span", required=False, default=2.0 * np.pi),
        noise=tbl.boolean("noise", required=False, default=False),
        noise_scale=tbl.number("noise_scale", required=False, default=0.0),
    )
    tbl.reject_unknown()
    if gains is not None and any(g <= 0.0 for g in gains):
        tbl.errors.append(f"'{tbl.path}.gains' must all be positive")
    if adapt.span <= 0.0:
        tbl.errors.append(f"'{tbl.path}.span' must be positive")
    if adapt.noise_scale < 0.0:
        tbl.errors.append(f"'{tbl.path}.noise_scale' must be nonnegative")
    return adapt


def _parse_integration(tbl: _Table) -> IntegrationConfig:
    integ = IntegrationConfig(
        dt=tbl.number("dt", required=False, default=1e-3),
        t_f=tbl.number("t_f", required=False, default=25.0),
        substeps=tbl.integer("substeps", required=False, default=10),
    )
    tbl.reject_unknown()
    if integ.dt <= 0.0:
        tbl.errors.append(f"'{tbl.path}.dt' must be positive")
    if integ.t_f < 0.0:
        tbl.errors.append(f"'{tbl.path}.t_f' must be nonnegative")
    if integ.substeps < 1:
        tbl.errors.append(f"'{tbl.path}.substeps' must be at least 1")
    return integ


def _parse_modal(tbl: _Table) -> ModalConfig:
    modal = ModalConfig(
        n_bending=tbl.integer("n_bending", required=False, default=3),
        n_axial=tbl.integer("n_axial", required=False, default=1),
    )
    tbl.reject_unknown()
    if modal.n_bending < 0 or modal.n_axial < 0:
        tbl.errors.append(f"'{tbl.path}' modal counts must be nonnegative")
    return modal


def _parse_output(tbl: _Table, name: str) -> OutputConfig:
    out = OutputConfig(
        dir=tbl.text("dir", required=False, default=f"runs/{name}"),
        log_every=tbl.integer("log_every", required=False, default=1),
        field_every=tbl.number("field_every", required=False, default=0.01),
        xi_points=tbl.integer("xi_points", required=False, default=21),
    )
    tbl.reject_unknown()
    if out.log_every < 1:
        tbl.errors.append(f"'{tbl.path}.log_every' must be at least 1")
    if out.field_every <= 0.0:
        tbl.errors.append(f"'{tbl.path}.field_every' must be positive")
    if out.xi_points < 2:
        tbl.errors.append(f"'{tbl.path}.xi_points' must be at least 2")
    return out


def parse_config(data: dict[str, Any]) -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from parsed TOML data; raise on any problem."""
    errors: list[str] = []
    root = _Table(data, "", errors)

    name = root.text("name")
    seed = root.integer("seed", required=False, default=0)
    controller = root.text("controller")
    gravity = root.number_list("gravity", 3, required=False, default=[0.0, 0.0, 0.0])

    link_tbls = root.table_list("links") or []
    links = [_parse_link(t) for t in link_tbls]
    if not links:
        errors.append("at least one [[links]] table is required")

    joint_tbls = root.table_list("joints") or []
    joints = [_parse_joint(t, max(len(links), 1)) for t in joint_tbls]

    traj_tbl = root.table("trajectory", required=False)
    trajectory = _parse_trajectory(traj_tbl) if traj_tbl else TrajectoryConfig()

    gain_tbls = root.table_list("gains") or []
    gains = [_parse_gains(t) for t in gain_tbls]
    if links and len(gains) != len(links):
        errors.append(
            f"expected one [[gains]] table per link ({len(links)}), got {len(gains)}"
        )

    adapt_tbl = root.table("adaptation", required=False)
    adaptation = _parse_adaptation(adapt_tbl) if adapt_tbl else None

    integ_tbl = root.table("integration", required=False)
    integration = _parse_integration(integ_tbl) if integ_tbl else IntegrationConfig()

    modal_tbl = root.table("modal", required=False)
    modal = _parse_modal(modal_tbl) if modal_tbl else ModalConfig()

    out_tbl = root.table("output", required=False)
    output = _parse_output(out_tbl, name) if out_tbl else OutputConfig(dir=f"runs/{name}")

    root.reject_unknown()

    if controller and controller not in CONTROLLERS:
        errors.append(
            f"controller must be one of {', '.join(CONTROLLERS)}; got '{controller}'"
        )
    if controller == "slpc-adaptive" and adaptation is None:
        errors.append("controller 'slpc-adaptive' requires an [adaptation] table")
    if seed < 0:
        errors.append("'seed' must be nonnegative")

    children = [j.child for j in joints]
    if links and sorted(children) != list(range(len(links))):
        errors.append("joints must name every link as a child exactly once")
    for j in joints:
        expected_parent = None if j.child == 0 else j.child - 1
        if j.parent != expected_parent:
            errors.append(
                f"joint for child {j.child} must have parent "
                f"{'none' if expected_parent is None else expected_parent}"
            )

    if errors:
        raise ConfigError(errors)

    return ScenarioConfig(
        name=name,
        seed=seed,
        controller=controller,
        links=tuple(links),
        joints=tuple(sorted(joints, key=lambda j: j.child)),
        trajectory=trajectory,
        gains=tuple(gains),
        adaptation=adaptation,
        integration=integration,
        modal=modal,
        output=output,
        gravity=tuple(gravity or (0.0, 0.0, 0.0)),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse and schema-check a scenario file; raises ``ConfigError``."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"config file is not valid TOML: {exc}"]) from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# deep validation
# ---------------------------------------------------------------------------


def _gain_checks(config: ScenarioConfig, errors: list[str]) -> None:
    for i, g in enumerate(config.gains):
        k = g.twist_matrix()
        scale = max(float(np.abs(k).max()), 1.0)
        if not np.allclose(k, k.T, atol=1e-9 * scale):
            errors.append(f"gains[{i}].twist must be symmetric")
            continue
        eigs = np.linalg.eigvalsh(0.5 * (k + k.T))
        if eigs.min() < -1e-9 * scale:
            errors.append(f"gains[{i}].twist must be positive semidefinite")


def _adaptation_checks(config: ScenarioConfig, errors: list[str]) -> None:
    adapt = config.adaptation
    if adapt is None:
        return
    if adapt.lower is not None and adapt.upper is not None:
        lo = np.array(adapt.lower)
        hi = np.array(adapt.upper)
        if np.any(lo <= 0.0):
            errors.append("adaptation.lower must be strictly positive")
        if np.any(lo >= hi):
            errors.append("adaptation bounds must satisfy lower < upper elementwise")
    offsets = np.array(adapt.initial_offset)
    if adapt.margin is not None and np.any(np.abs(offsets) >= adapt.margin):
        errors.append(
            "adaptation.initial_offset must lie strictly inside the margin box"
        )


def _projection_checks(config: ScenarioConfig, errors: list[str]) -> None:
    """Actuated-subspace projector at the start pose must be idempotent."""
    try:
        chain = build_chain(config)
        states = start_states(config, chain)
    except Exception as exc:  # construction failures become validation errors
        errors.append(f"scenario construction failed: {exc}")
        return
    for jn, joint in enumerate(chain.joints):
        if not joint.motors:
            errors.append(f"joint {jn} has no motors and cannot be actuated")
            continue
        mat = actuation_matrix(chain.links[joint.child], states[joint.child], joint)
        gram = mat.T @ mat
        if np.linalg.matrix_rank(mat) < mat.shape[1]:
            errors.append(f"joint {jn} motor axes are linearly dependent")
            continue
        proj = mat @ np.linalg.solve(gram, mat.T)
        drift = float(np.abs(proj @ proj - proj).max())
        if drift > 1e-8:
            errors.append(
                f"joint {jn} actuation projector is not idempotent (drift {drift:.2e})"
            )


def validate_config(config: ScenarioConfig) -> ValidationReport:
    """Physics checks on a parsed configuration, without running it."""
    errors: list[str] = []
    warnings: list[str] = []
    _gain_checks(config, errors)
    _adaptation_checks(config, errors)
    _projection_checks(config, errors)
    if config.integration.dt > 0 and config.output.field_every < config.integration.dt:
        warnings.append("output.field_every is below the control period; snapshots repeat")
    if config.controller == "pd":
        for i, g in enumerate(config.gains):
            if g.kp <= 0.0 or g.kd <= 0.0:
                errors.append(f"pd controller requires positive kp and kd in gains[{i}]")
    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))


def validate_file(path: str | Path) -> ValidationReport:
    """Schema plus physics validation of a file, aggregated into one report."""
    try:
        config = load_config(path)
    except ConfigError as exc:
        return ValidationReport(errors=exc.errors)
    return validate_config(config)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def build_chain(config: ScenarioConfig) -> Chain:
    """Instantiate the articulated arm described by a configuration."""
    links = []
    for lc in config.links:
        params = LinkParams(
            length=lc.length,
            density=lc.density,
            width=lc.width,
            height=lc.height,
            modulus=lc.modulus,
            offset_y=lc.offset_y,
            offset_z=lc.offset_z,
        )
        basis = make_clamped_free_basis(
            params, n_bending=config.modal.n_bending, n_axial=config.modal.n_axial
        )
        links.append(LinkModel(params, basis))
    joints = [
        JointSpec(
            child=jc.child,
            parent=jc.parent,
            locked_rot_axes=jc.locked_rot_axes,
            free_rot_axis=jc.free_rot_axis,
            motors=tuple(MotorSpec(axis=m.axis, inertia=m.inertia) for m in jc.motors),
            anchor=np.array(jc.anchor, dtype=float),
        )
        for jc in config.joints
    ]
    return Chain(links, joints, gravity=np.array(config.gravity, dtype=float))


def build_gains(config: ScenarioConfig) -> list[GainSet]:
    return [
        GainSet(
            twist_gain=g.twist_matrix(),
            kp=g.kp,
            kd=g.kd,
            torque_limit=g.torque_limit,
        )
        for g in config.gains
    ]


def build_trajectory(config: ScenarioConfig) -> TrajectorySpec:
    t = config.trajectory
    return TrajectorySpec(
        radius=t.radius,
        angular_rate=t.angular_rate,
        tau_ramp=t.tau_ramp,
        tau_blend=t.tau_blend,
        # a zero-duration run draws no samples but still needs a valid spec
        t_final=max(config.integration.t_f, config.integration.dt),
        start_angles=tuple(t.start_angles),
    )


def start_states(config: ScenarioConfig, chain: Chain):
    """Joint-consistent rest states at the trajectory start angles."""
    a1y, a1z, a2z = config.trajectory.start_angles
    theta = [np.array([0.0, a1y, a1z])]
    for _ in range(1, chain.n_links):
        theta.append(np.array([0.0, a1y, a2z]))
    omega = [np.zeros(3) for _ in range(chain.n_links)]
    return chain.consistent_states(theta, omega)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def preset_names() -> list[str]:
    """Names of the scenario presets shipped with the package."""
    base = resources.files("flexlink") / "configs"
    return sorted(p.name[: -len(".toml")] for p in base.iterdir() if p.name.endswith(".toml"))


def preset_path(name: str) -> Path:
    """Filesystem path of a packaged preset scenario by name."""
    base = resources.files("flexlink") / "configs"
    candidate = base / f"{name}.toml"
    if not candidate.is_file():
        raise ConfigError(
            [f"unknown preset '{name}'; available: {', '.join(preset_names())}"]
        )
    return Path(str(candidate))
