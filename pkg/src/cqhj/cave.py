"""|psi| and |dpsi/dz| sampled on regular (x, y, t) grids, with a self-describing volume file format.

Volumes are stored as float32 arrays of shape (nt, ny, nx), so x varies
fastest in row-major order. See docs/formats.md for the byte layout.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import wavefield as wf
from .errors import GridTooLarge, IoFailure
from .wavefield import Superposition

DEFAULT_BUDGET = 10**8
MAGIC = "CQHJ-VOLUME 1"
FORMATS = ("binary", "text")


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("axis bounds must be finite")
        if self.count < 1:
            raise ValueError("axis count must be >= 1")
        if self.count == 1 and self.lo != self.hi:
            raise ValueError("a one-point axis needs lo == hi")
        if self.count > 1 and not self.hi > self.lo:
            raise ValueError("axis needs hi > lo")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.count - 1) if self.count > 1 else 0.0


@dataclass(frozen=True)
class GridSpec:
    x: Axis
    y: Axis
    t: Axis

    @property
    def size(self) -> int:
        return self.x.count * self.y.count * self.t.count

    @classmethod
    def default(cls) -> "GridSpec":
        """x in [-4, 4], y in [-3, 3], t in [0, 10] at 161 x 121 x 201 points."""
        return cls(Axis(-4.0, 4.0, 161), Axis(-3.0, 3.0, 121), Axis(0.0, 10.0, 201))


@dataclass(frozen=True, eq=False)
class CaveGrid:
    spec: GridSpec
    psi_abs: np.ndarray  # float32, (nt, ny, nx)
    dpsi_abs: np.ndarray
    iso_psi: float | None = None
    iso_dpsi: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.spec.t.count, self.spec.y.count, self.spec.x.count)
        if self.psi_abs.shape != shape or self.dpsi_abs.shape != shape:
            raise ValueError(f"field shapes must be {shape}")


def sample_cave(
    sup: Superposition,
    spec: GridSpec,
    iso_psi: float | None = None,
    iso_dpsi: float | None = None,
    budget: int = DEFAULT_BUDGET,
    meta: dict | None = None,
) -> CaveGrid:
    """Evaluate |psi| and |dpsi/dz| at every grid point, one time slice at a time."""
    if spec.size > budget:
        raise GridTooLarge(f"{spec.size} grid points exceed the budget of {budget}")
    xs, ys, ts = spec.x.values(), spec.y.values(), spec.t.values()
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    shape = (spec.t.count, spec.y.count, spec.x.count)
    psi = np.empty(shape, dtype=np.float32)
    dpsi = np.empty(shape, dtype=np.float32)
    for k, t in enumerate(ts):
        m, s0, s1, _ = wf._sums(sup, zz, np.full(zz.shape, t))
        scale = np.exp(m)
        psi[k] = (scale * np.abs(s0)).reshape(shape[1:])
        dpsi[k] = (scale * np.abs(s1)).reshape(shape[1:])
    return CaveGrid(spec, psi, dpsi, iso_psi, iso_dpsi, dict(meta or {}))


def _fmt_opt(v):
    return "none" if v is None else repr(float(v))


def _header(grid: CaveGrid, fmt: str) -> str:
    s = grid.spec
    lines = [
        MAGIC,
        f"format {fmt}",
        f"x_axis {s.x.lo!r} {s.x.hi!r} {s.x.count}",
        f"y_axis {s.y.lo!r} {s.y.hi!r} {s.y.count}",
        f"t_axis {s.t.lo!r} {s.t.hi!r} {s.t.count}",
        f"iso_psi {_fmt_opt(grid.iso_psi)}",
        f"iso_dpsi {_fmt_opt(grid.iso_dpsi)}",
    ]
    for key in sorted(grid.meta):
        val = str(grid.meta[key])
        if "\n" in val or not key.isidentifier():
            raise ValueError(f"bad metadata entry {key!r}")
        lines.append(f"meta.{key} {val}")
    lines += ["fields psi_abs dpsi_abs", "order t y x", "end_header"]
    return "\n".join(lines) + "\n"


def export_volume(grid: CaveGrid, path, fmt: str = "binary") -> Path:
    """Write the header and both fields; binary payload is little-endian float32."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    try:
        with open(tmp, "wb") as fh:
            fh.write(_header(grid, fmt).encode("ascii"))
            for arr in (grid.psi_abs, grid.dpsi_abs):
                flat = np.ascontiguousarray(arr, dtype="<f4").ravel()
                if fmt == "binary":
                    fh.write(flat.tobytes())
                else:
                    fh.write("".join(f"{v:.9g}\n" for v in flat.tolist()).encode("ascii"))
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise IoFailure(f"cannot write volume {path}: {exc}") from exc
    return path


def _parse_opt(tok):
    return None if tok == "none" else float(tok)


def read_volume(path) -> CaveGrid:
    """Inverse of :func:`export_volume`."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read volume {path}: {exc}") from exc
    marker = b"end_header\n"
    cut = data.find(marker)
    if not data.startswith(MAGIC.encode()) or cut < 0:
        raise IoFailure(f"{path} is not a volume file")
    header = data[:cut].decode("ascii").splitlines()
    payload = data[cut + len(marker) :]
    fields, meta = {}, {}
    for line in header[1:]:
        key, _, rest = line.partition(" ")
        if key.startswith("meta."):
            meta[key[5:]] = rest
        else:
            fields[key] = rest.split()
    try:
        fmt = fields["format"][0]
        axes = [Axis(float(a), float(b), int(c)) for a, b, c in (fields[k] for k in ("x_axis", "y_axis", "t_axis"))]
        spec = GridSpec(*axes)
        n = spec.size
        if fmt == "binary":
            if len(payload) != 8 * n:
                raise IoFailure(f"{path}: expected {8 * n} payload bytes, found {len(payload)}")
            flat = np.frombuffer(payload, dtype="<f4")
        elif fmt == "text":
            flat = np.array(payload.split(), dtype=np.float64).astype(np.float32)
            if flat.size != 2 * n:
                raise IoFailure(f"{path}: expected {2 * n} values, found {flat.size}")
        else:
            raise IoFailure(f"{path}: unknown format {fmt!r}")
        shape = (spec.t.count, spec.y.count, spec.x.count)
        psi = flat[:n].astype(np.float32).reshape(shape)
        dpsi = flat[n:].astype(np.float32).reshape(shape)
        return CaveGrid(spec, psi, dpsi, _parse_opt(fields["iso_psi"][0]), _parse_opt(fields["iso_dpsi"][0]), meta)
    except (KeyError, IndexError, ValueError) as exc:
        raise IoFailure(f"{path}: malformed header ({exc})") from exc


def slice_minima(values: np.ndarray) -> np.ndarray:
    """Indices of interior local minima of a 1-D profile."""
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])) + 1
