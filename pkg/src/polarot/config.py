"""Declarative experiment configuration.

Config files are INI-style structured text with named sections mirroring
the run description: [state], [noise], [arm_a], [arm_b], [offsets],
[statistics], [settings], [sweep], [outputs]. Angles appear in degrees in
files (keys carry a _deg suffix) and are converted to radians on load.
Calibration constants default to the shipped values below and are never
hard-coded in analysis logic.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field

from .channels import NoiseSpec, SolutionSpec, solution_rotation
from .states import BELL_KINDS

__all__ = [
    "ArmConfig", "ExperimentConfig", "load_config", "loads_config",
    "config_hash", "DEFAULT_SLOPE_DEG_PER_MOLAR", "DEFAULT_PBS_A_DEG",
    "DEFAULT_PBS_B_DEG", "DEFAULT_HWP_DEG", "DEFAULT_TRANSMISSION",
]

# shipped calibration defaults
DEFAULT_SLOPE_DEG_PER_MOLAR = 7.01
DEFAULT_PBS_A_DEG = -4.75
DEFAULT_PBS_B_DEG = 4.09
DEFAULT_HWP_DEG = 5.47
DEFAULT_TRANSMISSION = 0.75

SWEEP_VARIABLES = ("molarity_b", "theta_b")


@dataclass(frozen=True)
class ArmConfig:
    """One arm of the experiment: either a fixed rotation angle (radians)
    or a molarity-calibrated solution."""

    angle: float | None = None
    solution: SolutionSpec | None = None
    transmission: float = DEFAULT_TRANSMISSION

    def __post_init__(self):
        if (self.angle is None) == (self.solution is None):
            raise ValueError("an arm needs exactly one of a fixed angle or a solution")
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"transmission must be in [0, 1], got {self.transmission}")

    def theta(self) -> float:
        if self.angle is not None:
            return self.angle
        return solution_rotation(self.solution)


@dataclass(frozen=True)
class ExperimentConfig:
    state_kind: str = "psi_minus"
    ket_a: str = "H"
    ket_b: str = "V"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    arm_a: ArmConfig = field(default_factory=lambda: ArmConfig(angle=0.0))
    arm_b: ArmConfig = field(default_factory=lambda: ArmConfig(angle=0.0))
    pbs_a: float = math.radians(DEFAULT_PBS_A_DEG)
    pbs_b: float = math.radians(DEFAULT_PBS_B_DEG)
    hwp: float = math.radians(DEFAULT_HWP_DEG)
    pair_flux: float = 1e5
    duration: float = 1.0
    seed: int = 0
    setting_pairs: tuple = (("Z", "Z"), ("X", "Z"), ("Z", "X"))
    sweep_variable: str | None = None
    sweep_values: tuple = ()
    output_dir: str | None = None

    def __post_init__(self):
        if self.state_kind not in BELL_KINDS + ("separable",):
            raise ValueError(f"unknown state kind {self.state_kind!r}")
        if self.pair_flux <= 0 or self.duration <= 0:
            raise ValueError("pair_flux and duration must be positive")
        if self.sweep_variable is not None:
            if self.sweep_variable not in SWEEP_VARIABLES:
                raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}, "
                                 f"got {self.sweep_variable!r}")
            if not self.sweep_values:
                raise ValueError("sweep requested but no sweep values given")

    def canonical_items(self) -> list[tuple[str, str]]:
        """Flat, sorted (key, value) view of every configuration field;
        the provenance hash is built from exactly these items."""
        items = {
            "state.kind": self.state_kind,
            "state.ket_a": self.ket_a,
            "state.ket_b": self.ket_b,
            "noise.visibility": repr(self.noise.visibility),
            "noise.accidental_fraction": repr(self.noise.accidental_fraction),
            "offsets.pbs_a": repr(self.pbs_a),
            "offsets.pbs_b": repr(self.pbs_b),
            "offsets.hwp": repr(self.hwp),
            "statistics.pair_flux": repr(self.pair_flux),
            "statistics.duration": repr(self.duration),
            "statistics.seed": repr(self.seed),
            "settings.pairs": ";".join(f"{a}/{b}" for a, b in self.setting_pairs),
            "sweep.variable": str(self.sweep_variable),
            "sweep.values": ";".join(repr(v) for v in self.sweep_values),
            "outputs.directory": str(self.output_dir),
        }
        for name, arm in (("arm_a", self.arm_a), ("arm_b", self.arm_b)):
            items[f"{name}.transmission"] = repr(arm.transmission)
            if arm.angle is not None:
                items[f"{name}.angle"] = repr(arm.angle)
            else:
                items[f"{name}.molarity"] = repr(arm.solution.molarity)
                items[f"{name}.slope"] = repr(arm.solution.slope_deg_per_molar)
        return sorted(items.items())


def config_hash(cfg: ExperimentConfig) -> str:
    payload = "\n".join(f"{k}={v}" for k, v in cfg.canonical_items())
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _parse_arm(section) -> ArmConfig:
    transmission = section.getfloat("transmission", fallback=DEFAULT_TRANSMISSION)
    has_angle = "angle_deg" in section
    has_molarity = "molarity" in section
    if has_angle and has_molarity:
        raise ValueError(f"section [{section.name}] must not set both angle_deg "
                         f"and molarity")
    if has_angle:
        return ArmConfig(angle=math.radians(section.getfloat("angle_deg")),
                         transmission=transmission)
    if has_molarity:
        spec = SolutionSpec(
            molarity=section.getfloat("molarity"),
            slope_deg_per_molar=section.getfloat(
                "slope_deg_per_molar", fallback=DEFAULT_SLOPE_DEG_PER_MOLAR),
            transmission=transmission,
        )
        return ArmConfig(solution=spec, transmission=transmission)
    raise ValueError(f"section [{section.name}] needs angle_deg or molarity")


def _parse_sweep(section) -> tuple[str, tuple]:
    variable = section.get("variable")
    if variable is None:
        raise ValueError("[sweep] section needs a 'variable' key")
    has_values = "values" in section
    has_range = "start" in section or "stop" in section or "count" in section
    if has_values == has_range:
        raise ValueError("[sweep] needs either 'values' or 'start/stop/count'")
    if has_values:
        values = tuple(float(v) for v in section.get("values").split(","))
    else:
        start = section.getfloat("start")
        stop = section.getfloat("stop")
        count = section.getint("count")
        if count < 2:
            raise ValueError("[sweep] count must be at least 2")
        step = (stop - start) / (count - 1)
        values = tuple(start + step * i for i in range(count))
    return variable, values


def loads_config(text: str) -> ExperimentConfig:
    """Parse a configuration from INI text."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config: {exc}") from exc

    kwargs = {}
    if parser.has_section("state"):
        sec = parser["state"]
        kwargs["state_kind"] = sec.get("kind", "psi_minus").strip()
        kwargs["ket_a"] = sec.get("ket_a", "H").strip().upper()
        kwargs["ket_b"] = sec.get("ket_b", "V").strip().upper()
    if parser.has_section("noise"):
        sec = parser["noise"]
        kwargs["noise"] = NoiseSpec(
            visibility=sec.getfloat("visibility", fallback=1.0),
            accidental_fraction=sec.getfloat("accidental_fraction", fallback=0.0))
    for name in ("arm_a", "arm_b"):
        if parser.has_section(name):
            kwargs[name] = _parse_arm(parser[name])
    if parser.has_section("offsets"):
        sec = parser["offsets"]
        kwargs["pbs_a"] = math.radians(sec.getfloat("pbs_a_deg", fallback=DEFAULT_PBS_A_DEG))
        kwargs["pbs_b"] = math.radians(sec.getfloat("pbs_b_deg", fallback=DEFAULT_PBS_B_DEG))
        kwargs["hwp"] = math.radians(sec.getfloat("hwp_deg", fallback=DEFAULT_HWP_DEG))
    if not parser.has_section("statistics") or "seed" not in parser["statistics"]:
        raise ValueError("[statistics] section with an explicit seed is mandatory")
    sec = parser["statistics"]
    kwargs["pair_flux"] = sec.getfloat("pair_flux", fallback=1e5)
    kwargs["duration"] = sec.getfloat("duration", fallback=1.0)
    kwargs["seed"] = sec.getint("seed")
    if parser.has_section("settings"):
        pairs = []
        for token in parser["settings"].get("pairs").split(","):
            token = token.strip()
            if token.count("/") != 1:
                raise ValueError(f"setting pair {token!r} must be '<id_a>/<id_b>'")
            a, b = token.split("/")
            pairs.append((a.strip(), b.strip()))
        kwargs["setting_pairs"] = tuple(pairs)
    if parser.has_section("sweep"):
        variable, values = _parse_sweep(parser["sweep"])
        kwargs["sweep_variable"] = variable
        kwargs["sweep_values"] = values
    if parser.has_section("outputs"):
        kwargs["output_dir"] = parser["outputs"].get("directory", fallback=None)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    """Load a configuration file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())
