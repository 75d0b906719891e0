"""Scenario configuration: INI-style ``key = value`` text with fixed sections.

Grammar
-------
Four optional sections, each holding flat ``key = value`` lines (``#`` and
``;`` start comments)::

    [protocol]   theta, f, mu, eta_B, eta_C
    [trajectory] kind (constant|linear|step|piecewise), offset, rate,
                 steps = t1:v1, t2:v2, ...
    [feedback]   mode (fast|slow|off), window, resolution, max_kick, basis
    [run]        preset, duration, seed, replicas, out, events_csv,
                 events_decimate, exclude_jumps, jobs

Numeric values accept plain numbers and arithmetic with ``pi``, e.g.
``theta = pi/3``.  ``max_kick = none`` disables the clamp.  Anything left
out comes from the preset named in ``[run] preset`` (default ``fig3-top``).
"""
from __future__ import annotations

import ast
import configparser
import dataclasses
import math
import operator
import re
from dataclasses import dataclass, field

from ._validation import DomainError
from .channel import NoiseTrajectory
from .feedback import FeedbackConfig
from .quantum import ProtocolParams


class ConfigError(ValueError):
    """Malformed or out-of-range configuration; carries the offending line."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class ScenarioConfig:
    params: ProtocolParams = field(default_factory=ProtocolParams)
    trajectory: NoiseTrajectory = field(default_factory=lambda: NoiseTrajectory.linear(0.05))
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    duration: float = 60.0
    seed: int = 0
    replicas: int = 1
    out: str | None = None
    events_csv: bool = False
    events_decimate: int = 100
    exclude_jumps: bool = True
    jobs: int | None = None
    preset: str = "fig3-top"

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError(f"duration must be positive, got {self.duration!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.replicas < 1:
            raise DomainError(f"replicas must be at least 1, got {self.replicas!r}")
        if self.events_decimate < 1:
            raise DomainError(f"events_decimate must be at least 1, got {self.events_decimate!r}")
        if self.jobs is not None and self.jobs < 1:
            raise DomainError(f"jobs must be at least 1, got {self.jobs!r}")
        if self.feedback.theta != self.params.theta:
            object.__setattr__(self, "feedback",
                               dataclasses.replace(self.feedback, theta=self.params.theta))

    def to_dict(self):
        traj = self.trajectory
        return {
            "preset": self.preset,
            "protocol": dataclasses.asdict(self.params),
            "trajectory": {"kind": traj.kind, "offset": traj.offset, "rate": traj.rate,
                           "steps": [list(s) for s in traj.steps]},
            "feedback": {"mode": self.feedback.mode, "window": self.feedback.window,
                         "resolution": self.feedback.resolution,
                         "max_kick": self.feedback.max_kick, "basis": self.feedback.basis},
            "run": {"duration": self.duration, "seed": self.seed, "replicas": self.replicas,
                    "out": self.out, "events_csv": self.events_csv,
                    "events_decimate": self.events_decimate,
                    "exclude_jumps": self.exclude_jumps, "jobs": self.jobs},
        }

    @classmethod
    def from_dict(cls, d):
        traj = d["trajectory"]
        fb = d["feedback"]
        params = ProtocolParams(**d["protocol"])
        return cls(
            params=params,
            trajectory=NoiseTrajectory(traj["kind"], traj["offset"], traj["rate"],
                                       tuple(tuple(s) for s in traj["steps"])),
            feedback=FeedbackConfig(fb["mode"], fb["window"], params.theta, fb["resolution"],
                                    fb["max_kick"], fb["basis"]),
            preset=d.get("preset", "fig3-top"),
            **d["run"],
        )


FIG3_BOTTOM_STEPS = ((7.5, 2.0), (15.0, 0.0), (22.5, 2.0))

PRESETS = {
    "fig3-top": ScenarioConfig(),
    "fig3-bottom": ScenarioConfig(
        trajectory=NoiseTrajectory.step(FIG3_BOTTOM_STEPS),
        feedback=FeedbackConfig(mode="slow", window=1000),
        duration=30.0,
        preset="fig3-bottom",
    ),
    "zero-noise": ScenarioConfig(
        trajectory=NoiseTrajectory.constant(0.0),
        duration=20.0,
        preset="zero-noise",
    ),
}


def preset(name) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub,
           ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_number(text):
    """Evaluate a numeric literal or simple arithmetic involving ``pi``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def _parse_int(text):
    try:
        return int(text.strip())
    except ValueError:
        pass
    v = parse_number(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_number(text):
    return None if text.strip().lower() in ("none", "") else parse_number(text)


def _parse_steps(text):
    steps = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        t, sep, v = item.partition(":")
        if not sep:
            raise ValueError(f"step entries look like time:value, got {item!r}")
        steps.append((parse_number(t), parse_number(v)))
    return tuple(steps)


def _parse_basis(text):
    t = text.strip().lower()
    return "mean" if t == "mean" else _parse_int(t)


SCHEMA = {
    "protocol": {"theta": parse_number, "f": parse_number, "mu": parse_number,
                 "eta_b": parse_number, "eta_c": parse_number},
    "trajectory": {"kind": str.strip, "offset": parse_number, "rate": parse_number,
                   "steps": _parse_steps},
    "feedback": {"mode": str.strip, "window": _parse_int, "resolution": parse_number,
                 "max_kick": _parse_optional_number, "basis": _parse_basis},
    "run": {"preset": str.strip, "duration": parse_number, "seed": _parse_int,
            "replicas": _parse_int, "out": str.strip, "events_csv": _parse_bool,
            "events_decimate": _parse_int, "exclude_jumps": _parse_bool,
            "jobs": _parse_int},
}


def _line_of(text, section, key):
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip().lower()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return n
    return None


def _section_line(text, section):
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[(.+)\]\s*$", line)
        if m and m.group(1).strip().lower() == section:
            return n
    return None


def _field_line(text, values, message):
    # map a validation message back to the key it names
    for section, keys in values.items():
        for key in keys:
            if re.search(rf"\b{re.escape(key)}\b", message, re.IGNORECASE):
                return _line_of(text, section, key)
    return None


def load_config(text, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse configuration text into a validated :class:`ScenarioConfig`.

    Missing keys fall back to ``base`` if given, else to the preset named in
    ``[run] preset`` (default ``fig3-top``).

    Raises
    ------
    ConfigError
        With the line number for syntax errors, unknown keys, unparsable
        values, and out-of-range parameters.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno, line = exc.errors[0]
            raise ConfigError(f"cannot parse {line.strip()}", lineno) from None
        raise ConfigError(str(exc).splitlines()[0], lineno) from None

    values = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _section_line(text, sec))
        values[sec] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", _line_of(text, sec, key))
            try:
                values[sec][key] = SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}", _line_of(text, sec, key)) from None

    run = values.get("run", {})
    if base is None:
        base = preset(run.get("preset", "fig3-top"))
    try:
        return _merge(base, values)
    except DomainError as exc:
        raise ConfigError(str(exc), _field_line(text, values, str(exc))) from None


def _merge(base: ScenarioConfig, values) -> ScenarioConfig:
    proto = values.get("protocol", {})
    params = dataclasses.replace(
        base.params,
        **{("eta_B" if k == "eta_b" else "eta_C" if k == "eta_c" else k): v
           for k, v in proto.items()},
    )

    traj_v = values.get("trajectory", {})
    traj = base.trajectory
    if traj_v:
        kind = traj_v.get("kind", traj.kind)
        same_kind = kind == traj.kind
        traj = NoiseTrajectory(
            kind,
            traj_v.get("offset", traj.offset if same_kind else 0.0),
            traj_v.get("rate", traj.rate if same_kind else 0.0),
            traj_v.get("steps", traj.steps if same_kind else ()),
        )

    fb_v = values.get("feedback", {})
    fb = base.feedback
    if fb_v:
        mode = fb_v.get("mode", fb.mode)
        # a mode switch without an explicit window picks the new mode's default
        window = fb_v.get("window", fb.window if mode == fb.mode else None)
        fb = FeedbackConfig(mode, window, params.theta, fb_v.get("resolution", fb.resolution),
                            fb_v.get("max_kick", fb.max_kick), fb_v.get("basis", fb.basis))

    run = dict(values.get("run", {}))
    run.pop("preset", None)
    return dataclasses.replace(base, params=params, trajectory=traj, feedback=fb, **run)
