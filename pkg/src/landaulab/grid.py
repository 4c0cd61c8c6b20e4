"""Cell-centered velocity grid and scalar fields on it.

The grid is uniform on [-L, L]^3 with an even number of cells per axis, so
cell centers come in exact +/- pairs and midpoint quadrature of any even field
has machine-zero odd moments.  Fields are immutable after construction; all
reductions use numpy's fixed pairwise summation order, so repeated evaluation
is bitwise reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GridError(ValueError):
    pass


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centered grid on [-L, L]^3 with n cells per axis (n even, >= 8)."""

    n: int
    half_width: float

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise GridError(f"n must be even and >= 8 (got {self.n})")
        if not self.half_width > 0:
            raise GridError(f"half_width must be positive (got {self.half_width})")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @property
    def axis(self) -> np.ndarray:
        """Cell centers along one axis: -L + (i + 1/2) h."""
        return -self.half_width + (np.arange(self.n) + 0.5) * self.h

    def centers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable center coordinates (vx, vy, vz) indexed [ix, iy, iz]."""
        a = self.axis
        return a[:, None, None], a[None, :, None], a[None, None, :]

    def speed_squared(self) -> np.ndarray:
        vx, vy, vz = self.centers()
        return vx * vx + vy * vy + vz * vz

    def bracket(self, power: float) -> np.ndarray:
        """Japanese bracket weight <v>^power = (1 + |v|^2)^(power/2) per cell."""
        return (1.0 + self.speed_squared()) ** (power / 2.0)

    def points(self) -> np.ndarray:
        """All cell centers as an (n, n, n, 3) array."""
        vx, vy, vz = self.centers()
        out = np.empty((self.n, self.n, self.n, 3))
        out[..., 0], out[..., 1], out[..., 2] = vx, vy, vz
        return out


@dataclass(frozen=True)
class ScalarField:
    """One float64 value per cell.  Values are frozen (read-only array).

    ``analytic`` optionally carries the generator descriptor the samples came
    from, so affine renormalization can re-evaluate instead of resampling.
    """

    grid: VelocityGrid
    values: np.ndarray
    analytic: object = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n,) * 3:
            raise FieldError(f"values shape {vals.shape} does not match grid n={self.grid.n}")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def require_finite(self) -> "ScalarField":
        if not np.isfinite(self.values).all():
            raise FieldError("field contains non-finite entries")
        return self

    def require_distribution(self) -> "ScalarField":
        self.require_finite()
        if self.values.min() < 0.0:
            raise FieldError(f"distribution state has negative entries (min {self.values.min()})")
        return self

    def with_values(self, values: np.ndarray, analytic: object = None) -> "ScalarField":
        return ScalarField(self.grid, values, analytic=analytic)


# ---------------------------------------------------------------------------
# Snapshot persistence: raw little-endian float64, x fastest, plus a plain
# text sidecar `<name>.meta` with n, L, time and a sha256 checksum.
# ---------------------------------------------------------------------------

def _snapshot_bytes(f: ScalarField) -> bytes:
    # ravel order "F" makes the x index fastest in the byte stream
    return np.asarray(f.values, dtype="<f8").ravel(order="F").tobytes()


def write_snapshot(f: ScalarField, path: Path, time: float) -> None:
    path = Path(path)
    raw = _snapshot_bytes(f)
    path.write_bytes(raw)
    checksum = hashlib.sha256(raw).hexdigest()
    meta = (
        f"n={f.grid.n}\n"
        f"L={f.grid.half_width!r}\n"
        f"time={float(time)!r}\n"
        f"checksum=sha256:{checksum}\n"
    )
    path.with_suffix(path.suffix + ".meta").write_text(meta)


def read_snapshot(path: Path) -> tuple[ScalarField, float]:
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".meta")
    if not meta_path.exists():
        raise FieldError(f"missing sidecar {meta_path}")
    meta = {}
    for line in meta_path.read_text().splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
    n = int(meta["n"])
    half_width = float(meta["L"])
    time = float(meta["time"])
    raw = path.read_bytes()
    digest = "sha256:" + hashlib.sha256(raw).hexdigest()
    if meta.get("checksum") and meta["checksum"] != digest:
        raise FieldError(f"checksum mismatch for {path}")
    vals = np.frombuffer(raw, dtype="<f8").reshape((n, n, n), order="F")
    return ScalarField(VelocityGrid(n, half_width), vals), time
