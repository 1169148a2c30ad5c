"""
Run configuration: an INI document with sections [model], [mesh], [solver] and [run].

    [model]
    lambda0_bar = 2.0
    chi = 0.0

    [mesh]
    G = 1.0
    I = 400
    J = 400

    [solver]
    dt = auto            ; auto -> dy / (2G)
    tol = 1e-10
    cadence = 100
    max_steps = 10000000

    [run]
    command = solve      ; solve | corrector | coefficients | sweep | convergence | verify
    output_dir = out
    G_list = 0.1, 0.2, 0.5
    I_list = 200, 400
    I_ref = 1600

Keys are case-sensitive and unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

COMMANDS = ("solve", "corrector", "coefficients", "sweep", "convergence", "verify")

_SCHEMA = {
    "model": {"lambda0_bar", "chi"},
    "mesh": {"G", "I", "J"},
    "solver": {"dt", "tol", "cadence", "max_steps"},
    "run": {"command", "output_dir", "G_list", "I_list", "I_ref"},
}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass
class RunConfig:
    command: str = "solve"
    lambda0_bar: float = 1.0
    chi: float = 0.0
    G: float = 1.0
    I: int = 100
    J: int = 100
    dt: Optional[float] = None
    tol: float = 1e-10
    cadence: int = 100
    max_steps: int = 10_000_000
    output_dir: Path = Path("out")
    G_list: list[float] = field(default_factory=list)
    I_list: list[int] = field(default_factory=list)
    I_ref: Optional[int] = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {self.command!r}")
        if not (math.isfinite(self.lambda0_bar) and self.lambda0_bar > 0):
            raise ConfigError(f"lambda0_bar must be positive, got {self.lambda0_bar}")
        if not (0.0 <= self.chi < 1.0):
            raise ConfigError(f"chi must lie in [0,1), got {self.chi}")
        if not (math.isfinite(self.G) and self.G > 0):
            raise ConfigError(f"G must be positive, got {self.G}")
        if self.I < 1 or self.J < 1:
            raise ConfigError(f"I and J must be positive, got I={self.I}, J={self.J}")
        if self.J % self.I:
            raise ConfigError(f"J mod I != 0 (I={self.I}, J={self.J})")
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive or 'auto', got {self.dt}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.cadence < 1:
            raise ConfigError(f"cadence must be >= 1, got {self.cadence}")
        if self.max_steps < self.cadence:
            raise ConfigError(f"max_steps must be >= cadence, got {self.max_steps}")
        if self.command == "sweep":
            if not self.G_list:
                raise ConfigError("sweep needs G_list in [run]")
            if any(g <= 0 for g in self.G_list):
                raise ConfigError("G_list entries must be positive")
            if self.G_list != sorted(self.G_list):
                raise ConfigError("G_list must be sorted ascending")
        if self.command == "convergence":
            if not self.I_list or self.I_ref is None:
                raise ConfigError("convergence needs I_list and I_ref in [run]")
            for I in self.I_list:
                if I < 1 or self.I_ref % I:
                    raise ConfigError(f"I_list entry {I} does not divide I_ref={self.I_ref}")
        return self


def _key_line(text: str, section: str, key: str) -> Optional[int]:
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return None


def _convert(raw: str, kind, name: str, line: Optional[int]):
    where = f" (line {line})" if line else ""
    try:
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if kind == "intlist":
            return [_convert(x.strip(), int, name, line) for x in raw.split(",") if x.strip()]
        if kind == "floatlist":
            return [float(x) for x in raw.split(",") if x.strip()]
        if kind == "dt":
            return None if raw.strip().lower() == "auto" else float(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}{where}: cannot read {raw!r} as {getattr(kind, '__name__', kind)}") from None


_TYPES = {
    "lambda0_bar": float, "chi": float, "G": float, "I": int, "J": int,
    "dt": "dt", "tol": float, "cadence": int, "max_steps": int,
    "command": str, "output_dir": Path, "G_list": "floatlist", "I_list": "intlist", "I_ref": int,
}


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] (line {_section_line(text, section)})")
        for key, raw in parser.items(section):
            line = _key_line(text, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}] (line {line})")
            values[key] = _convert(raw, _TYPES[key], key, line)
    cfg = RunConfig(**values)
    if "J" not in values and "I" in values:
        cfg.J = cfg.I
    return cfg.validate()


def _section_line(text: str, section: str) -> Optional[int]:
    for n, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return n
    return None


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())
