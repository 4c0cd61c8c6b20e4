"""Closed-form exponent algebra for the L^p theory of the Landau-Coulomb equation.

Every quantity here is a short algebraic expression in the Lebesgue exponent
``p`` and the moment weight order ``m``: the three interpolation exponents
``theta1 + theta2 + theta3 = 1`` behind the L^{p+1} bound, the Bernoulli-ODE
exponents ``alpha1, alpha2``, the level-set iteration exponents ``beta,
gamma``, the shifted-index exponent ``gamma_tilde`` and the smoothing rate
``beta_star``, plus the barrier parameters ``Q, K`` of the level-set
iteration.

The point of the module is one audited implementation with validity-domain
enforcement instead of ad-hoc expressions scattered through diagnostics code.
Rational inputs (``int`` / ``Fraction``) are propagated exactly; ``float``
inputs fall back to binary floating point and internal identities are then
re-checked at tolerance 1e-12.  Validity violations raise, never clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

import numpy as np

Num = Union[int, float, Fraction]

IDENTITY_TOL = 1e-12

CSV_HEADER = "p,m,theta1,theta2,theta3,alpha1,alpha2,beta,gamma,gamma_tilde,beta_star,m_star"


class DomainError(ValueError):
    """Parameter outside the validity region of an exponent formula."""


def _is_exact(*xs: Num) -> bool:
    return all(isinstance(x, Rational) for x in xs)


def _frac(x: Num) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


def moment_threshold(p: Num) -> Num:
    """Minimal moment order m*(p) = (9/2)(p-1)/(p-3/2); rejects p <= 3/2."""
    _check(p > 1.5, f"p must exceed 3/2 (got p={p}); m* has a pole at p=3/2")
    if _is_exact(p):
        p = _frac(p)
        return Fraction(9, 2) * (p - 1) / (p - Fraction(3, 2))
    return 4.5 * (p - 1.0) / (p - 1.5)


def interpolation_thetas(p: Num, m: Num) -> tuple[Num, Num, Num]:
    """Interpolation exponents (theta1, theta2, theta3).

    Valid for p > 3/2 and m > 9p/(2p-1); on that region each theta lies in
    (0,1) and the three defining constraints hold:

        theta1 + theta2 + theta3 = 1
        theta1/(3p) + theta2/p + theta3 = 1/(p+1)
        -(3/p) theta1 + m theta3 = 0
    """
    _check(p > 1.5, f"p must exceed 3/2 (got p={p})")
    _check(m > 9 * p / (2 * p - 1), f"need m > 9p/(2p-1) = {9 * p / (2 * p - 1)} (got m={m})")
    if _is_exact(p, m):
        p, m = _frac(p), _frac(m)
    den = (p + 1) * (2 * p * m - 9 * p + 9)
    theta1 = 3 * m * p / den
    theta2 = (2 * p * p * m - 9 * p * p - m * p) / den
    theta3 = 9 / den
    _verify_theta_identities(p, m, theta1, theta2, theta3)
    return theta1, theta2, theta3


def _verify_theta_identities(p, m, t1, t2, t3) -> None:
    if _is_exact(p, m):
        assert t1 + t2 + t3 == 1
        assert t1 / (3 * p) + t2 / p + t3 == 1 / (_frac(p) + 1)
        assert -3 * t1 / p + m * t3 == 0
    else:
        if abs(t1 + t2 + t3 - 1.0) > IDENTITY_TOL:
            raise AssertionError("theta sum identity violated beyond 1e-12")
        if abs(t1 / (3 * p) + t2 / p + t3 - 1.0 / (p + 1)) > IDENTITY_TOL:
            raise AssertionError("theta moment identity violated beyond 1e-12")
        if abs(-3 * t1 / p + m * t3) > IDENTITY_TOL:
            raise AssertionError("theta weight identity violated beyond 1e-12")


def interpolation_exponents(p: Num, m: Num) -> tuple[Num, Num, Num, Num, Num]:
    """Return (theta1, theta2, theta3, alpha1, alpha2).

    alpha1 = (p+1) theta2 / (p - (p+1) theta1) and
    alpha2 = p (p+1) theta3 / (p - (p+1) theta1).  The denominator is positive
    exactly when m > m*(p), so the alpha branch needs the stricter threshold.
    """
    t1, t2, t3 = interpolation_thetas(p, m)
    den = p - (p + 1) * t1
    if den <= 0:
        raise DomainError(
            f"alpha exponents need m > m*(p) = {moment_threshold(p)} (got m={m}): "
            "denominator p - (p+1)theta1 is nonpositive"
        )
    alpha1 = (p + 1) * t2 / den
    alpha2 = p * (p + 1) * t3 / den
    if _is_exact(p, m):
        assert alpha1 > 1
    elif not alpha1 > 1 + 0.0:
        raise AssertionError("alpha1 <= 1 inside the validity region")
    return t1, t2, t3, alpha1, alpha2


def degiorgi_exponents(p: Num, m: Num) -> tuple[Num, Num]:
    """Level-set iteration exponents (beta, gamma).

    beta = 2/3 - 3/m and gamma = (2(p-3/2)/(3m)) [m - 9(p-1)/(2(p-3/2))];
    the iteration degenerates (gamma <= 0) at m <= m*(p), which is rejected.
    """
    _check(p > 1.5, f"p must exceed 3/2 (got p={p})")
    mstar = moment_threshold(p)
    _check(m > mstar, f"need m > m*(p) = {mstar} (got m={m}); gamma <= 0 degenerates the iteration")
    if _is_exact(p, m):
        p, m = _frac(p), _frac(m)
        beta = Fraction(2, 3) - 3 / m
        gamma = (2 * (p - Fraction(3, 2)) / (3 * m)) * (m - 9 * (p - 1) / (2 * (p - Fraction(3, 2))))
    else:
        beta = 2.0 / 3.0 - 3.0 / m
        gamma = (2.0 * (p - 1.5) / (3.0 * m)) * (m - 9.0 * (p - 1.0) / (2.0 * (p - 1.5)))
    if gamma <= 0:
        raise DomainError(f"gamma = {gamma} <= 0 at (p={p}, m={m})")
    return beta, gamma


def smoothing_exponent(p: Num, m: Num) -> tuple[Num, Num]:
    """Return (gamma_tilde, beta_star).

    gamma_tilde is gamma evaluated at the shifted index p~ = p + gamma, and
    beta_star = (1 + beta)/(1 + beta + gamma_tilde).  The result satisfies
    3/(2p) < beta_star < 1 on the whole validity region, which is asserted.
    """
    beta, gamma = degiorgi_exponents(p, m)
    p_shift = p + gamma
    # m*(p) is decreasing in p, so m > m*(p) already implies m > m*(p+gamma).
    _, gamma_tilde = degiorgi_exponents(p_shift, m)
    beta_star = (1 + beta) / (1 + beta + gamma_tilde)
    lower = (Fraction(3, 2) / _frac(p)) if _is_exact(p, m) else 1.5 / p
    if not (lower < beta_star < 1):
        raise AssertionError(f"beta_star = {beta_star} outside (3/(2p), 1) at (p={p}, m={m})")
    return gamma_tilde, beta_star


def prodi_serrin_infimum(p: Num) -> Num:
    """Infimum 2p/(2p-3) of admissible time exponents r; rejects p <= 3/2."""
    _check(p > 1.5, f"p must exceed 3/2 (got p={p})")
    if _is_exact(p):
        p = _frac(p)
    return 2 * p / (2 * p - 3)


@dataclass(frozen=True)
class ProdiSerrinClassification:
    p: float
    r: float
    m: float
    criticality: float          # 2/r + 3/p
    label: str                  # subcritical / critical / supercritical
    r_infimum: float            # 2p/(2p-3)
    p_alpha1_minus_p: float     # (2mp - 9p)/(m(2p-3) - 9p + 9)
    gronwall_ok: bool           # p*alpha1 - p < r
    m_star: float

    @property
    def subcritical(self) -> bool:
        return self.label == "subcritical"


def prodi_serrin_classify(p: Num, r: Num, m: Num) -> ProdiSerrinClassification:
    """Classify a mixed space-time exponent pair (r, p) at moment order m.

    Computes 2/r + 3/p (subcritical iff < 2, equivalently r > 2p/(2p-3)),
    the Gronwall exponent p*alpha1 - p = (2mp - 9p)/(m(2p-3) - 9p + 9), and
    whether the Gronwall closure condition p*alpha1 - p < r holds.  r may be
    math.inf.
    """
    _check(p > 1.5, f"p must exceed 3/2 (got p={p})")
    _check(r > 0, f"r must be positive (got r={r})")
    mstar = moment_threshold(p)
    _check(m > mstar, f"need m > m*(p) = {mstar} (got m={m})")

    exact = _is_exact(p, r, m) and not math.isinf(float(r))
    if exact:
        p_, r_, m_ = _frac(p), _frac(r), _frac(m)
        crit = 2 / r_ + 3 / p_
    else:
        p_, m_ = float(p), float(m)
        r_ = float(r)
        crit = (0.0 if math.isinf(r_) else 2.0 / r_) + 3.0 / p_
    pa1p = (2 * m_ * p_ - 9 * p_) / (m_ * (2 * p_ - 3) - 9 * p_ + 9)
    inf_r = prodi_serrin_infimum(p_)
    if crit < 2:
        label = "subcritical"
    elif crit == 2:
        label = "critical"
    else:
        label = "supercritical"
    return ProdiSerrinClassification(
        p=float(p_), r=float(r_), m=float(m_),
        criticality=float(crit), label=label,
        r_infimum=float(inf_r), p_alpha1_minus_p=float(pa1p),
        gronwall_ok=bool(pa1p < r_), m_star=float(mstar),
    )


@dataclass(frozen=True)
class BarrierParams:
    """Geometric barrier for the level-set recurrence.

    Q is the decay ratio 2^{(gamma+1+beta)/beta}, K the level ceiling, and
    ``barrier`` the sequence A*_n = A0 Q^{-n} for n = 0..n_max.
    """

    Q: float
    K: float
    A0: float
    t: float
    beta: float
    gamma: float
    C1: float
    barrier: np.ndarray

    def reversed_recurrence_margin(self, n: int) -> float:
        """A*_{n+2} - C1 2^{n(gamma+1+beta)} (A*_n)^{1+beta} K^{-gamma} (1/(tK)+1)^{1+beta}."""
        rhs = (
            self.C1
            * 2.0 ** (n * (self.gamma + 1.0 + self.beta))
            * self.barrier[n] ** (1.0 + self.beta)
            * self.K ** (-self.gamma)
            * (1.0 / (self.t * self.K) + 1.0) ** (1.0 + self.beta)
        )
        return float(self.barrier[n + 2] - rhs)


def degiorgi_barrier(A0: float, t: float, beta: float, gamma: float, C1: float,
                     n_max: int = 12) -> BarrierParams:
    """Barrier parameters (Q, K) and the sequence A*_n = A0 Q^{-n}.

    Q = 2^{(gamma+1+beta)/beta} is the smallest admissible decay ratio and

        K = max(c^{1/gamma}, c^{1/(1+beta+gamma)})
            * max(A0^{beta/gamma}, A0^{beta/(gamma+1+beta)} t^{-(1+beta)/(1+gamma+beta)})

    with c = 2^{1+beta} C1 Q^2.  With this choice the barrier satisfies the
    reversed recurrence for every n, so A_n <= A*_n propagates by induction.
    """
    for name, val in (("A0", A0), ("t", t), ("beta", beta), ("gamma", gamma), ("C1", C1)):
        _check(val > 0, f"{name} must be positive (got {val})")
    beta, gamma, A0, t, C1 = map(float, (beta, gamma, A0, t, C1))
    Q = 2.0 ** ((gamma + 1.0 + beta) / beta)
    c = 2.0 ** (1.0 + beta) * C1 * Q * Q
    K = max(c ** (1.0 / gamma), c ** (1.0 / (1.0 + beta + gamma))) * max(
        A0 ** (beta / gamma),
        A0 ** (beta / (gamma + 1.0 + beta)) * t ** (-(1.0 + beta) / (1.0 + gamma + beta)),
    )
    barrier = A0 * Q ** (-np.arange(n_max + 3, dtype=float))
    return BarrierParams(Q=Q, K=K, A0=A0, t=t, beta=beta, gamma=gamma, C1=C1, barrier=barrier)


@dataclass(frozen=True)
class ExponentSet:
    """All exponents of the L^p smoothing theory for one (p, m) pair.

    Values are Fractions when (p, m) were rational, floats otherwise.
    """

    p: Num
    m: Num
    theta1: Num
    theta2: Num
    theta3: Num
    alpha1: Num
    alpha2: Num
    beta: Num
    gamma: Num
    gamma_tilde: Num
    beta_star: Num
    m_star: Num

    @classmethod
    def from_pm(cls, p: Num, m: Num) -> "ExponentSet":
        mstar = moment_threshold(p)
        _check(m > mstar, f"ExponentSet needs m > m*(p) = {mstar} (got m={m})")
        t1, t2, t3, a1, a2 = interpolation_exponents(p, m)
        beta, gamma = degiorgi_exponents(p, m)
        gt, bs = smoothing_exponent(p, m)
        return cls(p=p, m=m, theta1=t1, theta2=t2, theta3=t3, alpha1=a1, alpha2=a2,
                   beta=beta, gamma=gamma, gamma_tilde=gt, beta_star=bs, m_star=mstar)

    def as_floats(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in CSV_HEADER.split(",")}

    def csv_row(self) -> str:
        vals = self.as_floats()
        return ",".join(repr(vals[k]) for k in CSV_HEADER.split(","))

    def pretty(self) -> str:
        vals = self.as_floats()
        width = max(len(k) for k in vals)
        lines = []
        for k in CSV_HEADER.split(","):
            exact = getattr(self, k)
            suffix = f"  (= {exact})" if isinstance(exact, Fraction) else ""
            lines.append(f"{k:<{width}} = {vals[k]:.15g}{suffix}")
        return "\n".join(lines)
