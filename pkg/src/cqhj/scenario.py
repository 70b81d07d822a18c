"""Scenario files (TOML) and the two built-in presets."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import ScenarioError
from .wavefield import GaussianPacket, Superposition

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_TOP_KEYS = {"name", "mass", "hbar", "packet", "cave"}
_PACKET_KEYS = {"x0", "vp", "sigma0"}
_CAVE_KEYS = {"iso_psi", "iso_dpsi"}


@dataclass(frozen=True)
class Scenario:
    name: str
    packets: tuple[tuple[float, float, float], ...]
    mass: float = 1.0
    hbar: float = 1.0
    iso_psi: float | None = None
    iso_dpsi: float | None = None

    def superposition(self) -> Superposition:
        return Superposition(tuple(GaussianPacket(x0, vp, s0, self.mass, self.hbar) for x0, vp, s0 in self.packets))

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "mass": self.mass,
            "hbar": self.hbar,
            "packets": [{"x0": x0, "vp": vp, "sigma0": s0} for x0, vp, s0 in self.packets],
        }
        if self.iso_psi is not None or self.iso_dpsi is not None:
            d["cave"] = {"iso_psi": self.iso_psi, "iso_dpsi": self.iso_dpsi}
        return d


PRESETS = {
    "case1": Scenario("case1", ((-10.0, 2.0, math.sqrt(2.0)), (10.0, -2.0, math.sqrt(2.0))), iso_psi=0.053, iso_dpsi=0.106),
    "case2": Scenario("case2", ((-5.0, 1.0, math.sqrt(2.0) / 4), (5.0, -1.0, math.sqrt(2.0) / 4)), iso_psi=0.16, iso_dpsi=0.23),
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where} must be a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ScenarioError(f"{where} must be finite")
    return v


def _reject_unknown(table, allowed, where):
    extra = set(table) - allowed
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def parse_scenario(doc: dict) -> Scenario:
    _reject_unknown(doc, _TOP_KEYS, "scenario")
    name = doc.get("name", "custom")
    if not isinstance(name, str):
        raise ScenarioError("name must be a string")
    packets = doc.get("packet")
    if not isinstance(packets, list) or not packets:
        raise ScenarioError("scenario needs at least one [[packet]] table")
    rows = []
    for i, pk in enumerate(packets):
        if not isinstance(pk, dict):
            raise ScenarioError(f"packet {i} must be a table")
        _reject_unknown(pk, _PACKET_KEYS, f"packet {i}")
        missing = _PACKET_KEYS - set(pk)
        if missing:
            raise ScenarioError(f"packet {i} is missing {', '.join(sorted(missing))}")
        row = tuple(_number(pk[k], f"packet {i}.{k}") for k in ("x0", "vp", "sigma0"))
        if row[2] <= 0:
            raise ScenarioError(f"packet {i}.sigma0 must be > 0")
        rows.append(row)
    mass = _number(doc.get("mass", 1.0), "mass")
    hbar = _number(doc.get("hbar", 1.0), "hbar")
    if mass <= 0 or hbar <= 0:
        raise ScenarioError("mass and hbar must be > 0")
    cave = doc.get("cave", {})
    if not isinstance(cave, dict):
        raise ScenarioError("[cave] must be a table")
    _reject_unknown(cave, _CAVE_KEYS, "[cave]")
    iso_psi = _number(cave["iso_psi"], "cave.iso_psi") if "iso_psi" in cave else None
    iso_dpsi = _number(cave["iso_dpsi"], "cave.iso_dpsi") if "iso_dpsi" in cave else None
    return Scenario(name, tuple(rows), mass, hbar, iso_psi, iso_dpsi)


def load_scenario(path) -> Scenario:
    try:
        with open(Path(path), "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed scenario file {path}: {exc}") from exc
    return parse_scenario(doc)
