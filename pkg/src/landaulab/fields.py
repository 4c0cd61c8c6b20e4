"""Field operations: moments, entropy, norms, dissipation, normalization,
initial-data generators, and level-set functionals.

All integrals are midpoint quadrature (cell value times h^3).  Entropy uses
the convention 0 log 0 = 0; negative entries are errors, never clipped here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .grid import FieldError, ScalarField, VelocityGrid

TAIL_SHELL_FACTOR = 1.25  # moment tail sensitivity compares |v| <= L against |v| <= L/1.25


# ---------------------------------------------------------------------------
# Analytic generator descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineDescriptor:
    """g(v) = amp * base(scale * v + shift) for a fixed base profile.

    Normalization composes affine maps, so re-evaluation stays exact for
    analytic initial data instead of accumulating resampling error.
    """

    base: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    amp: float = 1.0
    scale: float = 1.0
    shift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    label: str = "base"

    def evaluate(self, vx, vy, vz) -> np.ndarray:
        sx, sy, sz = self.shift
        return self.amp * self.base(self.scale * vx + sx, self.scale * vy + sy, self.scale * vz + sz)

    def sample(self, grid: VelocityGrid) -> np.ndarray:
        vx, vy, vz = grid.centers()
        return np.broadcast_to(self.evaluate(vx, vy, vz), (grid.n,) * 3).copy()

    def compose_affine(self, amp: float, scale: float, shift: np.ndarray) -> "AffineDescriptor":
        """Descriptor of v -> amp * g(scale * v + shift)."""
        sx, sy, sz = self.shift
        new_shift = (self.scale * shift[0] + sx, self.scale * shift[1] + sy, self.scale * shift[2] + sz)
        return AffineDescriptor(base=self.base, amp=self.amp * amp,
                                scale=self.scale * scale, shift=new_shift, label=self.label)


@dataclass(frozen=True)
class SumDescriptor:
    parts: tuple
    label: str = "sum"

    def evaluate(self, vx, vy, vz) -> np.ndarray:
        out = self.parts[0].evaluate(vx, vy, vz)
        for part in self.parts[1:]:
            out = out + part.evaluate(vx, vy, vz)
        return out

    def sample(self, grid: VelocityGrid) -> np.ndarray:
        vx, vy, vz = grid.centers()
        return np.broadcast_to(self.evaluate(vx, vy, vz), (grid.n,) * 3).copy()

    def compose_affine(self, amp, scale, shift) -> "SumDescriptor":
        return SumDescriptor(tuple(p.compose_affine(amp, scale, shift) for p in self.parts),
                             label=self.label)


def _gauss0(vx, vy, vz):
    return (2.0 * np.pi) ** -1.5 * np.exp(-0.5 * (vx * vx + vy * vy + vz * vz))


def standard_maxwellian(grid: VelocityGrid) -> ScalarField:
    """mu(v) = (2 pi)^{-3/2} exp(-|v|^2/2) sampled at cell centers."""
    return generate("maxwellian", {"rho": 1.0, "u": (0.0, 0.0, 0.0), "theta": 1.0}, grid)


def maxwellian_descriptor(rho: float, u, theta: float) -> AffineDescriptor:
    if rho <= 0 or theta <= 0:
        raise FieldError(f"maxwellian needs rho > 0 and theta > 0 (got rho={rho}, theta={theta})")
    s = theta ** -0.5
    shift = (-u[0] * s, -u[1] * s, -u[2] * s)
    return AffineDescriptor(base=_gauss0, amp=rho * theta ** -1.5, scale=s, shift=shift,
                            label="maxwellian")


def spike_descriptor(p: float, delta: float, center, core_radius: float) -> AffineDescriptor:
    """Power-law spike c |v - v0|^{-(3/p - delta)} supported in |v - v0| <= core_radius.

    The amplitude c makes the continuum mass equal one, so the datum lies in
    L^p but not in L^infty as the grid is refined.
    """
    if not 0.0 < delta < 3.0 / p:
        raise FieldError(f"spike needs 0 < delta < 3/p = {3.0 / p} (got delta={delta})")
    if core_radius <= 0:
        raise FieldError("spike core_radius must be positive")
    a = 3.0 / p - delta
    c = (3.0 - a) / (4.0 * np.pi * core_radius ** (3.0 - a))

    def base(vx, vy, vz, _a=a, _rc=core_radius, _c=c):
        r2 = vx * vx + vy * vy + vz * vz
        r = np.sqrt(r2)
        if np.any(r < 1e-12 * _rc):
            raise FieldError("spike center coincides with a sample point")
        return np.where(r <= _rc, _c * r ** (-_a), 0.0)

    return AffineDescriptor(base=base, amp=1.0, scale=1.0,
                            shift=(-center[0], -center[1], -center[2]), label="spike")


def generate(kind: str, params: dict, grid: VelocityGrid) -> ScalarField:
    """Build an initial datum on the grid: analytic descriptor plus samples.

    Kinds: ``maxwellian`` (rho, u, theta), ``spike`` (p, delta, center,
    core_radius), ``maxwellian_plus_spike`` (weight, maxwellian, spike).
    """
    if kind == "maxwellian":
        desc = maxwellian_descriptor(params.get("rho", 1.0),
                                     params.get("u", (0.0, 0.0, 0.0)),
                                     params.get("theta", 1.0))
    elif kind == "spike":
        center = params.get("center", (0.0, 0.0, 0.0))
        if max(abs(c) for c in center) >= grid.half_width:
            raise FieldError(f"spike center {center} outside the grid (L={grid.half_width})")
        desc = spike_descriptor(params["p"], params["delta"], center,
                                params.get("core_radius", 1.0))
    elif kind == "maxwellian_plus_spike":
        w = params["weight"]
        if not 0.0 <= w <= 1.0:
            raise FieldError(f"mixture weight must lie in [0, 1] (got {w})")
        mx = maxwellian_descriptor(**_maxwellian_args(params.get("maxwellian", {})))
        sp_params = dict(params["spike"])
        center = sp_params.get("center", (0.0, 0.0, 0.0))
        if max(abs(c) for c in center) >= grid.half_width:
            raise FieldError(f"spike center {center} outside the grid (L={grid.half_width})")
        sp = spike_descriptor(sp_params["p"], sp_params["delta"], center,
                              sp_params.get("core_radius", 1.0))
        desc = SumDescriptor((mx.compose_affine(1.0 - w, 1.0, np.zeros(3)),
                              sp.compose_affine(w, 1.0, np.zeros(3))), label="mixture")
    else:
        raise FieldError(f"unknown generator kind {kind!r}")
    return ScalarField(grid, desc.sample(grid), analytic=desc).require_distribution()


def _maxwellian_args(params: dict) -> dict:
    return {"rho": params.get("rho", 1.0), "u": params.get("u", (0.0, 0.0, 0.0)),
            "theta": params.get("theta", 1.0)}


# ---------------------------------------------------------------------------
# Quadrature, norms, diagnostics
# ---------------------------------------------------------------------------

def integrate(grid: VelocityGrid, values: np.ndarray) -> float:
    return float(values.sum() * grid.cell_volume)


def lp_norm(f: ScalarField, p: float) -> float:
    return integrate(f.grid, np.abs(f.values) ** p) ** (1.0 / p)


def weighted_l1(f: ScalarField, k: float) -> float:
    return integrate(f.grid, np.abs(f.values) * f.grid.bracket(k))


def entropy(f: ScalarField) -> float:
    v = f.values
    return integrate(f.grid, np.where(v > 0.0, v * np.log(np.where(v > 0.0, v, 1.0)), 0.0))


def gradient(grid: VelocityGrid, values: np.ndarray) -> list[np.ndarray]:
    """Second-order gradient (centered interior, one-sided at the boundary)."""
    return np.gradient(values, grid.h, edge_order=2)


def dissipation(f: ScalarField, p: float) -> float:
    """Weighted dissipation integral of <v>^{-3} |grad f^{p/2}|^2."""
    f.require_distribution()
    if p < 1:
        raise FieldError(f"dissipation needs p >= 1 (got {p})")
    gx, gy, gz = gradient(f.grid, f.values ** (p / 2.0))
    return integrate(f.grid, f.grid.bracket(-3.0) * (gx * gx + gy * gy + gz * gz))


def moment_tail_fraction(f: ScalarField, k: float) -> float:
    """Share of the L^1_k moment carried by cells with |v| > L / 1.25.

    Tail sensitivity proxy for the domain truncation: the grid cannot be
    extended outward, so the outer-shell share stands in for the L vs 1.25 L
    comparison.
    """
    total = weighted_l1(f, k)
    if total == 0.0:
        return 0.0
    outer = f.grid.speed_squared() > (f.grid.half_width / TAIL_SHELL_FACTOR) ** 2
    shell = integrate(f.grid, np.where(outer, np.abs(f.values) * f.grid.bracket(k), 0.0))
    return shell / total


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Scalar diagnostics of one distribution state."""

    time: float
    mass: float
    momentum: tuple[float, float, float]
    energy: float
    entropy: float
    lp: dict                 # p -> ||f||_p
    linf: float
    moments: dict            # k -> ||f||_{L^1_k}
    moment_tails: dict       # k -> outer-shell share of the moment
    dissipation: dict        # p -> integral <v>^{-3} |grad f^{p/2}|^2

    def temperature(self) -> float:
        u2 = sum(c * c for c in self.momentum) / self.mass ** 2
        return (self.energy / self.mass - u2) / 3.0


def diagnostics(f: ScalarField, p_list: Sequence[float], k_list: Sequence[float],
                time: float = 0.0) -> DiagnosticsRecord:
    """Full diagnostics record: conserved quantities, entropy, norms, moments.

    Rejects fields with negative or non-finite entries.
    """
    f.require_distribution()
    g = f.grid
    vals = f.values
    vx, vy, vz = g.centers()
    mass = integrate(g, vals)
    momentum = (integrate(g, vals * vx), integrate(g, vals * vy), integrate(g, vals * vz))
    energy = integrate(g, vals * g.speed_squared())
    ent = entropy(f)
    lp = {float(p): lp_norm(f, p) for p in p_list}
    moments = {float(k): weighted_l1(f, k) for k in k_list}
    tails = {float(k): moment_tail_fraction(f, k) for k in k_list}
    diss = {float(p): dissipation(f, p) for p in p_list}
    return DiagnosticsRecord(time=float(time), mass=mass, momentum=momentum, energy=energy,
                             entropy=ent, lp=lp, linf=float(np.max(np.abs(vals))),
                             moments=moments, moment_tails=tails, dissipation=diss)


# ---------------------------------------------------------------------------
# Normalization to (mass, momentum, energy) = (1, 0, 3)
# ---------------------------------------------------------------------------

def bulk_parameters(f: ScalarField) -> tuple[float, np.ndarray, float]:
    """Discrete (rho, u, theta) with theta = (energy/rho - |u|^2)/3."""
    g = f.grid
    vals = f.values
    vx, vy, vz = g.centers()
    rho = integrate(g, vals)
    if rho <= 0.0:
        raise FieldError(f"normalize needs positive mass (got {rho})")
    u = np.array([integrate(g, vals * vx), integrate(g, vals * vy), integrate(g, vals * vz)]) / rho
    energy = integrate(g, vals * g.speed_squared())
    theta = (energy / rho - float(u @ u)) / 3.0
    if theta <= 0.0:
        raise FieldError(f"normalize needs positive temperature (got {theta})")
    return rho, u, theta


def _resample_affine(f: ScalarField, amp: float, scale: float, shift: np.ndarray) -> np.ndarray:
    """Trilinear sample of amp * f(scale * v + shift); zero outside the grid."""
    g = f.grid
    a = g.axis
    pts = scale * a[:, None] + np.asarray(shift)[None, :]       # (n, 3) per-axis coordinates
    idx = (pts - a[0]) / g.h                                    # fractional cell index
    ix, iy, iz = np.meshgrid(idx[:, 0], idx[:, 1], idx[:, 2], indexing="ij")
    coords = np.stack([ix.ravel(), iy.ravel(), iz.ravel()])
    out = ndimage.map_coordinates(f.values, coords, order=1, mode="constant", cval=0.0)
    return amp * out.reshape((g.n,) * 3)


def normalize(f: ScalarField, max_iter: int = 6, tol: float = 1e-13) -> ScalarField:
    """Map f to g(v) = (theta^{3/2}/rho) f(theta^{1/2} v + u) with discrete
    moments (1, 0, 3).

    The affine map is iterated (composing, never resampling twice) until the
    discrete bulk parameters match (1, 0, 1) to ``tol``, so the result is a
    fixed point of normalization up to that tolerance.  Analytic generators
    are re-evaluated exactly; raw fields are trilinearly resampled once from
    the original samples.
    """
    f.require_distribution()
    amp, scale = 1.0, 1.0
    shift = np.zeros(3)
    current = f
    for _ in range(max_iter):
        rho, u, theta = bulk_parameters(current)
        if abs(rho - 1.0) < tol and abs(theta - 1.0) < tol and np.abs(u).max() < tol:
            break
        s = math.sqrt(theta)
        amp, scale, shift = amp * theta ** 1.5 / rho, scale * s, scale * u + shift
        if f.analytic is not None:
            desc = f.analytic.compose_affine(amp, scale, shift)
            current = ScalarField(f.grid, desc.sample(f.grid), analytic=desc)
        else:
            current = ScalarField(f.grid, _resample_affine(f, amp, scale, shift))
    return current.require_distribution()


# ---------------------------------------------------------------------------
# Level sets and their space-time functionals
# ---------------------------------------------------------------------------

def level_set_plus(f: ScalarField, level: float) -> ScalarField:
    """Pointwise positive part max(f - level, 0)."""
    if level < 0:
        raise FieldError(f"level must be >= 0 (got {level})")
    return ScalarField(f.grid, np.maximum(f.values - level, 0.0))


@dataclass(frozen=True)
class LevelFunctionals:
    """Level-set energy E and control quantity A over one time window.

    E is the sup over stored snapshots of the L^p norm^p of the truncation
    plus the time-integrated weighted dissipation; A is the time-integrated
    L^{p+1} norm^{p+1}.
    """

    level: float
    window: tuple[float, float]
    energy: float
    control: float


def level_functionals(times: Sequence[float], fields: Sequence[ScalarField],
                      level: float, t1: float, t2: float, p: float,
                      min_snapshots: int = 4) -> LevelFunctionals:
    """Evaluate (E_level, A_level) over [t1, t2] from stored snapshots only.

    Sup is over snapshots inside the window; time integrals use the trapezoid
    rule on the snapshot times.  Raises when fewer than ``min_snapshots``
    snapshots fall in the window.
    """
    times = np.asarray(times, dtype=float)
    if not t1 < t2:
        raise FieldError(f"need t1 < t2 (got {t1}, {t2})")
    sel = np.nonzero((times >= t1 - 1e-15) & (times <= t2 + 1e-15))[0]
    if sel.size < min_snapshots:
        raise FieldError(
            f"window [{t1}, {t2}] holds {sel.size} snapshots; need >= {min_snapshots}")
    lp_p = np.empty(sel.size)
    diss = np.empty(sel.size)
    ctrl = np.empty(sel.size)
    for j, idx in enumerate(sel):
        trunc = level_set_plus(fields[idx], level)
        lp_p[j] = integrate(trunc.grid, trunc.values ** p)
        diss[j] = dissipation(trunc, p)
        ctrl[j] = integrate(trunc.grid, trunc.values ** (p + 1.0))
    t_sel = times[sel]
    energy = float(lp_p.max() + np.trapz(diss, t_sel))
    control = float(np.trapz(ctrl, t_sel))
    return LevelFunctionals(level=float(level), window=(float(t1), float(t2)),
                            energy=energy, control=control)
