"""Nonlocal coefficients of the Landau-Coulomb operator by free-space FFT
convolution.

The scalar potential a[f] = (1/(4 pi |z|)) * f, the diffusion matrix
A[f] = (Pi(z)/(8 pi |z|)) * f with Pi(z) = Id - z z^T/|z|^2, and the drift
grad a[f] = (-z/(4 pi |z|^3)) * f are discrete convolutions

    (K * f)_i = h^3 sum_j K(v_i - v_j) f_j,

evaluated on a zero-padded (2n)^3 grid so the long-range kernels see no
periodic images.  The kernel value at z = 0 is replaced by its exact average
over one cell; for the tensor kernel the diagonal origin values are each one
third of twice the scalar value, which makes tr A[f] = a[f] exact by
construction.  Kernel transforms are cached per grid because the solver
refreshes coefficients every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import FieldError, ScalarField, VelocityGrid

# integral of 1/|z| over the unit centered cube (verified against quadrature)
CUBE_COULOMB_INTEGRAL = 3.0 * math.log(2.0 + math.sqrt(3.0)) - math.pi / 2.0

TENSOR_COMPONENTS = ("xx", "yy", "zz", "xy", "xz", "yz")

# refuse padded grids whose spectral workspace would be absurd
MAX_PADDED_BYTES = 4 << 30


class MemoryGuardError(MemoryError):
    pass


def _origin_scalar(h: float) -> float:
    """Cell average of 1/(4 pi |z|) over the origin cell."""
    return CUBE_COULOMB_INTEGRAL / (4.0 * math.pi * h)


def _pointwise_kernel(name: str, zx, zy, zz):
    """Kernel values at given offsets; the caller handles z = 0."""
    r2 = zx * zx + zy * zy + zz * zz
    r = np.sqrt(r2)
    if name == "a":
        with np.errstate(divide="ignore"):
            return 1.0 / (4.0 * math.pi * r)
    if name in TENSOR_COMPONENTS:
        i, j = "xyz".index(name[0]), "xyz".index(name[1])
        zi = (zx, zy, zz)[i]
        zj = (zx, zy, zz)[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            return ((1.0 if i == j else 0.0) - zi * zj / r2) / (8.0 * math.pi * r)
    if name in ("bx", "by", "bz"):
        i = "xyz".index(name[1])
        zi = (zx, zy, zz)[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            return -zi / (4.0 * math.pi * r ** 3)
    raise KeyError(name)


class KernelCache:
    """Per-grid cache of rfftn-transformed kernels on the doubled grid.

    Kernels are point-sampled at cell-center offsets; the origin value is the
    exact average of the kernel over one cell (closed form via the cube
    Coulomb integral).  The midpoint rule applied to a kernel with a Dirac
    Laplacian carries the Euler-Maclaurin error -(h^2/24) integral of
    Delta_z[K(z) f(v-z)], which evaluates to -(h^2/24) f(v) times the
    kernel's delta weight instead of telescoping away.  That bias is removed
    by adding its exact opposite to the origin weight: +1/(24 h) times the
    delta weight (1 for the scalar kernel; 1/3 per diagonal tensor component,
    because -Delta applied to the trace identity splits the delta equally;
    0 for off-diagonal and drift kernels).  The correction preserves the
    exact trace identity tr A[f] = a[f].
    """

    def __init__(self, grid: VelocityGrid):
        n = grid.n
        padded = 2 * n
        if padded ** 3 * 16 > MAX_PADDED_BYTES:
            raise MemoryGuardError(
                f"padded grid {padded}^3 exceeds the spectral memory guard")
        self.grid = grid
        self.padded = padded
        # offset k -> k*h for k < n, (k - 2n)*h for k >= n; index n itself is
        # never reached by a difference of two in-range cell indices
        off = ((np.arange(padded) + n) % padded - n) * grid.h
        self._zx = off[:, None, None]
        self._zy = off[None, :, None]
        self._zz = off[None, None, :]
        self._transforms: dict[str, np.ndarray] = {}

    def transform(self, name: str) -> np.ndarray:
        if name not in self._transforms:
            self._transforms[name] = np.fft.rfftn(self._kernel(name))
        return self._transforms[name]

    def _symmetric_box(self) -> np.ndarray:
        # offsets |k|_inf <= n-1; the k = -n layer is never reached by a
        # difference of two valid cell indices
        return np.delete(np.arange(self.padded), self.grid.n)

    def _kernel(self, name: str) -> np.ndarray:
        h = self.grid.h
        n = self.grid.n
        vol = self.grid.cell_volume
        k = _pointwise_kernel(name, self._zx, self._zy, self._zz)
        k = np.array(np.broadcast_to(k, (self.padded,) * 3))
        center = (0, 0, 0)
        keep = self._symmetric_box()
        side = (2 * n - 1) * h
        box_coulomb = side * side * CUBE_COULOMB_INTEGRAL / (4.0 * math.pi)
        if name == "a" or (name in TENSOR_COMPONENTS and name[0] == name[1]):
            delta_weight = 1.0 if name == "a" else 1.0 / 3.0
            k[center] = _origin_scalar(h) * delta_weight
            # zeroth-moment defect of the rule over the symmetric box; the
            # diagonal tensor integrals are each a third of the scalar one by
            # cube symmetry
            defect = float(k[np.ix_(keep, keep, keep)].sum()) * vol - box_coulomb * delta_weight
            k[center] += delta_weight / (24.0 * h) - defect / vol
        elif name in TENSOR_COMPONENTS:
            k[center] = 0.0   # no delta weight and no defect by odd symmetry
        else:
            # Delta b_i = -d_i delta: dipole response, handled together with
            # the first-moment defect by an antisymmetric axis-neighbor pair
            k[center] = 0.0
            axis = "xyz".index(name[1])
            zi = (self._zx, self._zy, self._zz)[axis]
            box = k[np.ix_(keep, keep, keep)] * np.broadcast_to(
                zi, k.shape)[np.ix_(keep, keep, keep)]
            defect = float(box.sum()) * vol - (-box_coulomb / 3.0)
            pair = -1.0 / (48.0 * h * h) - defect / (2.0 * h * vol)
            plus = [0, 0, 0]
            plus[axis] = 1
            minus = [0, 0, 0]
            minus[axis] = self.padded - 1
            k[tuple(plus)] += pair
            k[tuple(minus)] -= pair
        return k


_CACHES: dict[tuple[int, float], KernelCache] = {}


def kernel_cache(grid: VelocityGrid) -> KernelCache:
    key = (grid.n, grid.half_width)
    if key not in _CACHES:
        # keep at most two grids resident; the solver uses one at a time
        while len(_CACHES) >= 2:
            _CACHES.pop(next(iter(_CACHES)))
        _CACHES[key] = KernelCache(grid)
    return _CACHES[key]


def _forward(grid: VelocityGrid, values: np.ndarray, cache: KernelCache) -> np.ndarray:
    padded = np.zeros((cache.padded,) * 3)
    padded[: grid.n, : grid.n, : grid.n] = values
    return np.fft.rfftn(padded)


def _convolve(cache: KernelCache, fhat: np.ndarray, name: str) -> np.ndarray:
    n = cache.grid.n
    out = np.fft.irfftn(fhat * cache.transform(name), s=(cache.padded,) * 3,
                        axes=(0, 1, 2))
    return out[:n, :n, :n] * cache.grid.cell_volume


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric tensor field via six component arrays (xx, yy, zz, xy, xz, yz)."""

    grid: VelocityGrid
    xx: np.ndarray
    yy: np.ndarray
    zz: np.ndarray
    xy: np.ndarray
    xz: np.ndarray
    yz: np.ndarray

    def component(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def trace(self) -> np.ndarray:
        return self.xx + self.yy + self.zz

    def eigenvalue_range(self) -> tuple[np.ndarray, np.ndarray]:
        return sym3_eigenvalue_range(self.xx, self.yy, self.zz, self.xy, self.xz, self.yz)


@dataclass(frozen=True)
class VectorField:
    grid: VelocityGrid
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)


def sym3_eigenvalue_range(xx, yy, zz, xy, xz, yz) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (lambda_min, lambda_max) of symmetric 3x3 matrices.

    Trigonometric solution of the characteristic cubic; exact for diagonal
    input and stable for the nearly isotropic tensors produced here.
    """
    q = (xx + yy + zz) / 3.0
    p1 = xy ** 2 + xz ** 2 + yz ** 2
    p2 = (xx - q) ** 2 + (yy - q) ** 2 + (zz - q) ** 2 + 2.0 * p1
    p = np.sqrt(np.maximum(p2, 0.0) / 6.0)
    safe = np.where(p > 0.0, p, 1.0)
    bxx, byy, bzz = (xx - q) / safe, (yy - q) / safe, (zz - q) / safe
    bxy, bxz, byz = xy / safe, xz / safe, yz / safe
    detb = (bxx * (byy * bzz - byz ** 2)
            - bxy * (bxy * bzz - byz * bxz)
            + bxz * (bxy * byz - byy * bxz))
    r = np.clip(detb / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    lmax = q + 2.0 * p * np.cos(phi)
    lmin = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    return np.where(p2 > 0.0, lmin, q), np.where(p2 > 0.0, lmax, q)


def laplacian_residual(f: ScalarField, potential: np.ndarray) -> float:
    """Max norm of Lap_h a + f over interior cells.

    Uses the fourth-order 13-point Laplacian so the residual probes the
    accuracy of the convolved potential rather than the probe stencil's own
    h^2 truncation.
    """
    h = f.grid.h
    lap = np.zeros_like(potential)
    inner = (slice(2, -2),) * 3
    for axis in range(3):
        def shift(k, _axis=axis):
            sl = [slice(2, -2)] * 3
            sl[_axis] = slice(2 + k, potential.shape[_axis] - 2 + k or None)
            return potential[tuple(sl)]

        lap[inner] += (-shift(-2) + 16.0 * shift(-1) - 30.0 * shift(0)
                       + 16.0 * shift(1) - shift(2)) / (12.0 * h * h)
    return float(np.abs(lap[inner] + f.values[inner]).max())


def origin_value(values: np.ndarray, grid: VelocityGrid) -> float:
    """Field value at v = 0 (a cell corner): quadratic-in-|v|^2 extrapolation
    from the two innermost symmetric shells (8 cells at 3h^2/4, 24 at 11h^2/4)."""
    c = grid.n // 2
    inner = values[c - 1:c + 1, c - 1:c + 1, c - 1:c + 1].mean()
    shell = []
    for offset in (-2, 1):
        shell.append(values[c + offset, c - 1:c + 1, c - 1:c + 1].mean())
        shell.append(values[c - 1:c + 1, c + offset, c - 1:c + 1].mean())
        shell.append(values[c - 1:c + 1, c - 1:c + 1, c + offset].mean())
    outer = float(np.mean(shell))
    # radii^2 are 3h^2/4 and 11h^2/4: linear extrapolation in r^2 to zero
    return float(inner + (inner - outer) * 3.0 / 8.0)


def coulomb_potential(f: ScalarField) -> ScalarField:
    """a[f] = (1/(4 pi |z|)) * f (free-space, solves the discrete -Lap a = f)."""
    f.require_finite()
    cache = kernel_cache(f.grid)
    fhat = _forward(f.grid, f.values, cache)
    return ScalarField(f.grid, _convolve(cache, fhat, "a"))


def diffusion_matrix(f: ScalarField) -> SymTensorField:
    """A[f] = (Pi(z)/(8 pi |z|)) * f as six component convolutions."""
    f.require_finite()
    cache = kernel_cache(f.grid)
    fhat = _forward(f.grid, f.values, cache)
    comps = {name: _convolve(cache, fhat, name) for name in TENSOR_COMPONENTS}
    return SymTensorField(f.grid, **comps)


def drift_field(f: ScalarField, variant: str = "kernel") -> VectorField:
    """grad a[f], either by the exact odd kernel -z/(4 pi |z|^3) or as the
    centered-difference gradient of coulomb_potential(f) (conservation
    experiments)."""
    f.require_finite()
    if variant == "kernel":
        cache = kernel_cache(f.grid)
        fhat = _forward(f.grid, f.values, cache)
        gx, gy, gz = (_convolve(cache, fhat, name) for name in ("bx", "by", "bz"))
    elif variant == "gradient":
        a = coulomb_potential(f)
        gx, gy, gz = np.gradient(a.values, f.grid.h, edge_order=2)
    else:
        raise ValueError(f"unknown drift variant {variant!r}")
    return VectorField(f.grid, gx, gy, gz)


@dataclass(frozen=True)
class CoefficientFields:
    """a[f] and A[f] computed from a single forward transform (solver path)."""

    a: np.ndarray
    tensor: SymTensorField


def coefficient_fields(f: ScalarField) -> CoefficientFields:
    cache = kernel_cache(f.grid)
    fhat = _forward(f.grid, f.values, cache)
    a = _convolve(cache, fhat, "a")
    comps = {name: _convolve(cache, fhat, name) for name in TENSOR_COMPONENTS}
    return CoefficientFields(a=a, tensor=SymTensorField(f.grid, **comps))


def _interior(values: np.ndarray, margin: int = 2) -> np.ndarray:
    s = slice(margin, -margin)
    return values[s, s, s]


@dataclass(frozen=True)
class CoefficientReport:
    """Empirical checks of the coefficient bounds for one state."""

    c0_empirical: float        # min over cells of (1 + |v|^3) lambda_min(A[f])
    sup_A: float               # max spectral norm of A[f]
    trace_residual: float      # max |tr A[f] - a[f]|, exact by construction
    divergence_residual: float  # max |centered div A[f] - grad a[f]| (interior)
    bound_rhs_factor: float    # ||f||_1^{(2/3)(p-3/2)/(p-1)} ||f||_p^{(1/3)p/(p-1)}
    bound_ratio: float         # sup_A / bound_rhs_factor (empirical constant)
    bound_constant: float | None  # calibrated C, when supplied
    bound_ok: bool | None      # sup_A <= C * factor, when C supplied

    CSV_HEADER = ("c0_empirical,sup_A,trace_residual,divergence_residual,"
                  "bound_rhs_factor,bound_ratio,bound_constant,bound_ok")

    def csv_row(self) -> str:
        const = "" if self.bound_constant is None else repr(self.bound_constant)
        ok = "" if self.bound_ok is None else str(int(self.bound_ok))
        return ",".join([repr(self.c0_empirical), repr(self.sup_A),
                         repr(self.trace_residual), repr(self.divergence_residual),
                         repr(self.bound_rhs_factor), repr(self.bound_ratio), const, ok])


def coefficient_report(f: ScalarField, p: float,
                       bound_constant: float | None = None) -> CoefficientReport:
    """Evaluate coercivity, boundedness, and the structural identities of the
    coefficients on one nonnegative state."""
    from .fields import lp_norm  # local import to avoid a cycle

    f.require_distribution()
    g = f.grid
    cache = kernel_cache(g)
    fhat = _forward(g, f.values, cache)
    a = _convolve(cache, fhat, "a")
    tensor = SymTensorField(g, **{name: _convolve(cache, fhat, name)
                                  for name in TENSOR_COMPONENTS})
    drift = VectorField(g, *(_convolve(cache, fhat, nm) for nm in ("bx", "by", "bz")))

    lmin, lmax = tensor.eigenvalue_range()
    speed3 = g.speed_squared() ** 1.5
    c0_emp = float(((1.0 + speed3) * lmin).min())
    sup_a = float(lmax.max())
    trace_res = float(np.abs(tensor.trace() - a).max())

    h = g.h
    divx = sum(np.gradient(tensor.component(nm), h, axis=ax, edge_order=2)
               for ax, nm in enumerate(("xx", "xy", "xz")))
    divy = sum(np.gradient(tensor.component(nm), h, axis=ax, edge_order=2)
               for ax, nm in enumerate(("xy", "yy", "yz")))
    divz = sum(np.gradient(tensor.component(nm), h, axis=ax, edge_order=2)
               for ax, nm in enumerate(("xz", "yz", "zz")))
    div_res = float(max(np.abs(_interior(divx - drift.x)).max(),
                        np.abs(_interior(divy - drift.y)).max(),
                        np.abs(_interior(divz - drift.z)).max()))

    mass = float(f.values.sum() * g.cell_volume)
    factor = mass ** ((2.0 / 3.0) * (p - 1.5) / (p - 1.0)) * lp_norm(f, p) ** ((1.0 / 3.0) * p / (p - 1.0))
    ratio = sup_a / factor if factor > 0 else math.inf
    ok = None if bound_constant is None else bool(sup_a <= bound_constant * factor)
    return CoefficientReport(c0_empirical=c0_emp, sup_A=sup_a, trace_residual=trace_res,
                             divergence_residual=div_res, bound_rhs_factor=factor,
                             bound_ratio=ratio, bound_constant=bound_constant, bound_ok=ok)
