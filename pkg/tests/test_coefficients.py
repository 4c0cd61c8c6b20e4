import math

import numpy as np
import pytest

from landaulab import coefficients as co
from landaulab import fields as fl
from landaulab.grid import ScalarField, VelocityGrid

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
A_MU_ORIGIN = SQRT_2_OVER_PI / (4.0 * math.pi)   # a[mu](0) closed form


def grid(n=32, half_width=8.0):
    return VelocityGrid(n, half_width)


def a_mu_exact(r):
    r = np.maximum(r, 1e-30)
    return np.vectorize(math.erf)(r / math.sqrt(2.0)) / (4.0 * math.pi * r)


def a_mu_radial_derivative(r):
    gauss = SQRT_2_OVER_PI * np.exp(-0.5 * r * r)
    return gauss / (4.0 * math.pi * r) - np.vectorize(math.erf)(
        r / math.sqrt(2.0)) / (4.0 * math.pi * r * r)


def test_cube_coulomb_integral_constant():
    # verify the closed form 3 ln(2 + sqrt 3) - pi/2 against quadrature
    def midpoint(k):
        a = (np.arange(k) + 0.5) / k * 0.5
        x, y, z = np.meshgrid(a, a, a, indexing="ij")
        return 8.0 * float(np.sum(1.0 / np.sqrt(x * x + y * y + z * z))) * (0.5 / k) ** 3

    v1, v2 = midpoint(128), midpoint(256)
    richardson = v2 + (v2 - v1) / 3.0
    assert co.CUBE_COULOMB_INTEGRAL == pytest.approx(richardson, abs=1e-7)


def test_coulomb_potential_of_maxwellian_origin():
    g = grid(64)
    mu = fl.standard_maxwellian(g)
    a = co.coulomb_potential(mu)
    assert co.origin_value(a.values, g) == pytest.approx(A_MU_ORIGIN, abs=1e-3)
    # radial profile against the closed form at a mid-range cell
    c = g.n // 2
    r = math.sqrt(g.speed_squared()[c + 4, c, c])
    assert a.values[c + 4, c, c] == pytest.approx(float(a_mu_exact(r)), abs=1e-4)


def test_coulomb_potential_zero_field():
    g = grid(16)
    a = co.coulomb_potential(ScalarField(g, np.zeros((16,) * 3)))
    assert np.all(a.values == 0.0)


def test_laplacian_residual_convergence():
    # a[f] solves the free-space -Lap a = f; the residual (4th-order probe
    # stencil, so it measures the potential, not the probe) converges at
    # order >= 1.8 between n = 32 and n = 64
    residuals = {}
    for n in (32, 64):
        g = grid(n)
        mu = fl.standard_maxwellian(g)
        a = co.coulomb_potential(mu).values
        residuals[n] = co.laplacian_residual(mu, a)
    order = math.log2(residuals[32] / residuals[64])
    assert order >= 1.8


def test_diffusion_matrix_isotropy_at_origin():
    g = grid(64)
    mu = fl.standard_maxwellian(g)
    tensor = co.diffusion_matrix(mu)
    for name in ("xx", "yy", "zz"):
        assert co.origin_value(tensor.component(name), g) == pytest.approx(
            A_MU_ORIGIN / 3.0, abs=1e-3)
    for name in ("xy", "xz", "yz"):
        assert abs(co.origin_value(tensor.component(name), g)) < 1e-6


def test_trace_identity_random_fields():
    g = grid(16)
    rng = np.random.default_rng(11)
    for _ in range(10):
        f = ScalarField(g, rng.uniform(0.0, 1.0, size=(16,) * 3))
        cf = co.coefficient_fields(f)
        assert np.abs(cf.tensor.trace() - cf.a).max() <= 1e-12


def test_positive_semidefinite_random_fields():
    g = grid(16)
    rng = np.random.default_rng(5)
    for _ in range(5):
        f = ScalarField(g, rng.uniform(0.0, 2.0, size=(16,) * 3))
        lmin, _ = co.diffusion_matrix(f).eigenvalue_range()
        assert lmin.min() >= -1e-12


def test_linearity():
    g = grid(16)
    rng = np.random.default_rng(1)
    f = rng.uniform(0.0, 1.0, size=(16,) * 3)
    gvals = rng.uniform(0.0, 1.0, size=(16,) * 3)
    a_sum = co.coulomb_potential(ScalarField(g, f + gvals)).values
    a_f = co.coulomb_potential(ScalarField(g, f)).values
    a_g = co.coulomb_potential(ScalarField(g, gvals)).values
    assert np.abs(a_sum - a_f - a_g).max() < 1e-12
    axx = co.diffusion_matrix(ScalarField(g, 3.0 * f)).xx
    axx1 = co.diffusion_matrix(ScalarField(g, f)).xx
    assert np.abs(axx - 3.0 * axx1).max() < 1e-12


def test_translation_equivariance():
    g = grid(16)
    rng = np.random.default_rng(2)
    f = np.zeros((16,) * 3)
    f[5:9, 5:9, 5:9] = rng.uniform(0.5, 1.0, size=(4, 4, 4))
    a = co.coulomb_potential(ScalarField(g, f)).values
    shifted = np.roll(f, 1, axis=0)
    a_shifted = co.coulomb_potential(ScalarField(g, shifted)).values
    # interior cells away from the padding boundary agree exactly
    assert np.abs(a_shifted[2:-2, 2:-2, 2:-2] - np.roll(a, 1, axis=0)[2:-2, 2:-2, 2:-2]).max() < 1e-13


def test_far_field_decay():
    g = grid(32)
    spike = fl.generate("spike", {"p": 2.0, "delta": 0.1, "center": (0, 0, 0),
                                  "core_radius": 1.0}, g)
    mass = fl.integrate(g, spike.values)
    a = co.coulomb_potential(spike).values
    c = g.n // 2
    edge = a[-1, c, c]
    r_edge = math.sqrt(g.speed_squared()[-1, c, c])
    assert edge * r_edge == pytest.approx(mass / (4.0 * math.pi), rel=0.05)


def test_drift_field_radial_oracle():
    g = grid(64)
    mu = fl.standard_maxwellian(g)
    drift = co.drift_field(mu, "kernel")
    c = g.n // 2
    idx = (c + 2, c, c)   # cell nearest the x-axis at x = 0.625
    v = np.array([g.axis[c + 2], g.axis[c], g.axis[c]])
    r = float(np.linalg.norm(v))
    expected = float(a_mu_radial_derivative(np.array([r]))[0]) * v / r
    got = np.array([drift.x[idx], drift.y[idx], drift.z[idx]])
    assert np.abs(got - expected).max() < 1e-3
    # value near r = 1 against the closed form
    idx1 = (c + 3, c + 1, c)
    v1 = np.array([g.axis[c + 3], g.axis[c + 1], g.axis[c]])
    r1 = float(np.linalg.norm(v1))
    expected1 = float(a_mu_radial_derivative(np.array([r1]))[0]) * v1 / r1
    got1 = np.array([drift.x[idx1], drift.y[idx1], drift.z[idx1]])
    assert np.abs(got1 - expected1).max() < 1e-3


def test_drift_vanishes_at_origin_for_even_fields():
    g = grid(32)
    mu = fl.standard_maxwellian(g)
    drift = co.drift_field(mu, "kernel")
    assert abs(co.origin_value(drift.x, g)) < 1e-8


def test_drift_variants_consistent():
    diffs = {}
    for n in (16, 32):
        g = grid(n)
        mu = fl.standard_maxwellian(g)
        dk = co.drift_field(mu, "kernel")
        dg = co.drift_field(mu, "gradient")
        inner = slice(2, -2)
        diffs[n] = float(np.abs(dk.x - dg.x)[inner, inner, inner].max())
    assert diffs[32] < diffs[16]
    assert math.log2(diffs[16] / diffs[32]) > 1.0


def test_drift_unknown_variant():
    g = grid(16)
    with pytest.raises(ValueError):
        co.drift_field(fl.standard_maxwellian(g), "nope")


def test_eigenvalue_solver_against_lapack():
    rng = np.random.default_rng(4)
    mats = rng.normal(size=(200, 3, 3))
    mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
    lmin, lmax = co.sym3_eigenvalue_range(mats[:, 0, 0], mats[:, 1, 1], mats[:, 2, 2],
                                          mats[:, 0, 1], mats[:, 0, 2], mats[:, 1, 2])
    eigs = np.linalg.eigvalsh(mats)
    assert np.abs(lmin - eigs[:, 0]).max() < 1e-10
    assert np.abs(lmax - eigs[:, 2]).max() < 1e-10


def test_memory_guard():
    with pytest.raises(co.MemoryGuardError):
        co.KernelCache(VelocityGrid(1024, 8.0))


def test_coefficient_report_maxwellian():
    g = grid(32)
    mu = fl.standard_maxwellian(g)
    report = co.coefficient_report(mu, 2.0)
    assert report.c0_empirical > 0.0
    assert report.sup_A == pytest.approx(0.0212, abs=1e-3)
    assert report.trace_residual <= 1e-12
    assert report.bound_ok is None
    bounded = co.coefficient_report(mu, 2.0, bound_constant=report.bound_ratio * 1.01)
    assert bounded.bound_ok is True
    row = bounded.csv_row()
    assert len(row.split(",")) == len(co.CoefficientReport.CSV_HEADER.split(","))


def test_divergence_identity():
    # row divergence of A[f] equals +grad a[f] up to O(h^2) (the non-div
    # form A:D^2 f + f^2 depends on this sign)
    res = {}
    for n in (16, 32):
        g = grid(n)
        mu = fl.standard_maxwellian(g)
        rep = co.coefficient_report(mu, 2.0)
        res[n] = rep.divergence_residual
    assert res[32] < res[16]
