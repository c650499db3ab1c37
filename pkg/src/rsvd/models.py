"""Closed-form reduced Hamiltonians on the two Darboux charts.

``(lambda, theta)`` chart: ``ham_phi1_red`` (the RSvD-type Hamiltonian), its
gradient, the actions ``F_l`` and the rational limit ``ham_rational``.
``(phat, qhat)`` chart: the dual Hamiltonian ``ham_f1_dual`` and the actions
``Phi_l``.  All square roots take the positive branch; a radicand that is
negative beyond rounding raises :class:`DomainViolation`.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev

from .errors import DomainViolation
from .reduction import ReducedPoint, build_params

__all__ = [
    "DualPoint",
    "phi1_potential",
    "phi1_potential_literal",
    "phi1_amplitudes",
    "ham_phi1_red",
    "grad_phi1_red",
    "actions_F_red",
    "dual_potential",
    "u1_polynomial",
    "u1_sinh",
    "ham_f1_dual",
    "grad_f1_dual",
    "dual_angles",
    "actions_phi_dual",
    "rational_potential",
    "ham_rational",
]

RADICAND_TOL = 1e-14


@dataclass(frozen=True)
class DualPoint:
    phat: np.ndarray
    qhat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phat", np.atleast_1d(np.asarray(self.phat, dtype=float)))
        object.__setattr__(self, "qhat", np.atleast_1d(np.asarray(self.qhat, dtype=float)))
        if self.phat.shape != self.qhat.shape:
            raise ValueError("phat and qhat must have the same length")


def _sqrt(r, what):
    r = np.asarray(r, dtype=float)
    if np.any(r < -RADICAND_TOL):
        raise DomainViolation(f"negative radicand in {what}: min {r.min():.3e}")
    return np.sqrt(np.clip(r, 0.0, None))


def _prod_minus_one(a):
    # prod(1 + a_k) - 1 without cancellation when the a_k are small
    acc = 0.0
    for ak in a:
        acc = acc + ak + acc * ak
    return acc


def _offdiag_prod(M):
    M = M.copy()
    np.fill_diagonal(M, 1.0)
    return M.prod(axis=1)


def _g(s, c):
    """``1 - c / sinh^2 s`` and its derivative in ``s``."""
    sh = np.sinh(s)
    return 1 - c / sh**2, 2 * c * np.cosh(s) / sh**3


def phi1_potential(lam, p):
    """Potential part ``V(lambda)`` of ``Phi_1^red``.

    Evaluated with ``cosh(v-u) = cosh v cosh u - sinh v sinh u`` folded in so the
    ``1/sinh^2 mu`` terms do not cancel catastrophically when all couplings are small.
    """
    lam = np.asarray(lam, dtype=float)
    s2 = np.sinh(p.mu) ** 2
    p1 = _prod_minus_one(-s2 / np.sinh(lam) ** 2)
    p2 = _prod_minus_one(s2 / np.cosh(lam) ** 2)
    a = np.sinh(p.v) * np.sinh(p.u) / s2
    c = np.cosh(p.v) * np.cosh(p.u) / s2
    return np.exp(p.v - p.u) * (a * p1 - c * p2) + len(lam)


def phi1_potential_literal(lam, p):
    """``V(lambda)`` term by term as printed, including the constant ``C``."""
    lam = np.asarray(lam, dtype=float)
    n = len(lam)
    s2 = np.sinh(p.mu) ** 2
    C = n * np.exp(p.u - p.v) + np.cosh(p.v - p.u) / s2
    return np.exp(p.v - p.u) * (
        np.sinh(p.v) * np.sinh(p.u) / s2 * np.prod(1 - s2 / np.sinh(lam) ** 2)
        - np.cosh(p.v) * np.cosh(p.u) / s2 * np.prod(1 + s2 / np.cosh(lam) ** 2)
        + C
    )


def _amplitude_factors(lam, p):
    lam = np.asarray(lam, dtype=float)
    s2mu = np.sinh(p.mu) ** 2
    gv, dgv = _g(lam, np.sinh(p.v) ** 2)
    gu, dgu = _g(lam, np.sinh(p.u) ** 2)
    D = lam[:, None] - lam[None, :]
    S = lam[:, None] + lam[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        gD, dgD = _g(D, s2mu)
        gS, dgS = _g(S, s2mu)
    for M in (gD, dgD, gS, dgS):
        np.fill_diagonal(M, 1.0)
    return gv, dgv, gu, dgu, gD, dgD, gS, dgS


def phi1_amplitudes(lam, p):
    """Coefficients ``f_k(lambda)`` of ``cos(theta_k)`` in ``Phi_1^red``."""
    lam = np.asarray(lam, dtype=float)
    gv, _, gu, _, gD, _, gS, _ = _amplitude_factors(lam, p)
    rad = gv * gu * _offdiag_prod(gD) * _offdiag_prod(gS)
    if np.any(gv < -RADICAND_TOL) or np.any(gu < -RADICAND_TOL) or np.any(gD < -RADICAND_TOL) or np.any(gS < -RADICAND_TOL):
        raise DomainViolation("negative radicand in Phi_1^red amplitudes; lambda outside the domain")
    return np.exp(p.v - p.u) / np.cosh(lam) ** 2 * _sqrt(rad, "Phi_1^red amplitude")


def ham_phi1_red(rp, p):
    """Reduced ``Phi_1`` in the Darboux chart ``(lambda, theta)``."""
    return float(phi1_potential(rp.lam, p) + np.dot(phi1_amplitudes(rp.lam, p), np.cos(rp.theta)))


def grad_phi1_red(rp, p):
    """Analytic ``(dH/dlambda, dH/dtheta)`` of :func:`ham_phi1_red`."""
    lam, theta = rp.lam, rp.theta
    n = len(lam)
    gv, dgv, gu, dgu, gD, dgD, gS, dgS = _amplitude_factors(lam, p)
    if np.any(gv <= 0) or np.any(gu <= 0) or np.any(gD <= 0) or np.any(gS <= 0):
        raise DomainViolation("gradient requires lambda strictly inside the domain")
    f = phi1_amplitudes(lam, p)

    # d log f_k / d lambda_j
    hD = 0.5 * dgD / gD
    hS = 0.5 * dgS / gS
    np.fill_diagonal(hD, 0.0)
    np.fill_diagonal(hS, 0.0)
    dlog = -hD + hS
    diag = -2 * np.tanh(lam) + 0.5 * dgv / gv + 0.5 * dgu / gu + hD.sum(axis=1) + hS.sum(axis=1)
    dlog[np.diag_indices(n)] = diag
    df = f[:, None] * dlog

    s2 = np.sinh(p.mu) ** 2
    a1 = -s2 / np.sinh(lam) ** 2
    a2 = s2 / np.cosh(lam) ** 2
    da1 = 2 * s2 * np.cosh(lam) / np.sinh(lam) ** 3
    da2 = -2 * s2 * np.sinh(lam) / np.cosh(lam) ** 3
    dP1 = np.array([np.prod(np.delete(1 + a1, j)) * da1[j] for j in range(n)])
    dP2 = np.array([np.prod(np.delete(1 + a2, j)) * da2[j] for j in range(n)])
    a = np.sinh(p.v) * np.sinh(p.u) / s2
    c = np.cosh(p.v) * np.cosh(p.u) / s2
    dV = np.exp(p.v - p.u) * (a * dP1 - c * dP2)

    dH_dlam = dV + np.cos(theta) @ df
    dH_dtheta = -f * np.sin(theta)
    return dH_dlam, dH_dtheta


def actions_F_red(l, lam):
    """``F_l^red = (1/l) sum_j cosh(2 l lambda_j)``."""
    return float(np.sum(np.cosh(2 * l * np.asarray(lam, dtype=float))) / l)


def dual_potential(phat, p):
    return 0.5 * (np.exp(-2 * p.u) + np.exp(2 * p.v)) * np.sum(np.exp(-2 * np.asarray(phat, dtype=float)))


def u1_polynomial(phat, p):
    e = np.exp(-2 * np.asarray(phat, dtype=float))
    c = np.exp(2 * (p.v - p.u))
    return 1 - (1 + c) * e + c * e**2


def u1_sinh(phat, p):
    phat = np.asarray(phat, dtype=float)
    return 4 * np.exp(p.v - p.u) * np.exp(-2 * phat) * np.sinh(phat) * np.sinh(phat + p.u - p.v)


def _dual_amplitudes(phat, p):
    s2mu = np.sinh(p.mu) ** 2
    D = phat[:, None] - phat[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        gD, dgD = _g(D, s2mu)
    np.fill_diagonal(gD, 1.0)
    np.fill_diagonal(dgD, 0.0)
    u1 = u1_polynomial(phat, p)
    if np.any(u1 < -RADICAND_TOL) or np.any(gD < -RADICAND_TOL):
        raise DomainViolation("negative radicand in F_1^red; phat outside the domain")
    return u1, gD, dgD


def ham_f1_dual(dp, p):
    """Reduced ``F_1`` in the dual chart ``(phat, qhat)``."""
    u1, gD, _ = _dual_amplitudes(dp.phat, p)
    amp = _sqrt(u1, "U_1") * np.sqrt(np.clip(gD, 0, None)).prod(axis=1)
    return float(dual_potential(dp.phat, p) - np.dot(np.cos(dp.qhat), amp))


def grad_f1_dual(dp, p):
    """Analytic ``(dF/dphat, dF/dqhat)`` of :func:`ham_f1_dual`."""
    phat, qhat = dp.phat, dp.qhat
    n = len(phat)
    u1, gD, dgD = _dual_amplitudes(phat, p)
    if np.any(u1 <= 0) or np.any(gD <= 0):
        raise DomainViolation("gradient requires phat strictly inside the domain")
    amp = np.sqrt(u1) * np.sqrt(gD).prod(axis=1)
    e = np.exp(-2 * phat)
    c = np.exp(2 * (p.v - p.u))
    du1 = 2 * (1 + c) * e - 4 * c * e**2
    h = 0.5 * dgD / gD
    np.fill_diagonal(h, 0.0)
    dlog = -h
    dlog[np.diag_indices(n)] = 0.5 * du1 / u1 + h.sum(axis=1)
    damp = amp[:, None] * dlog
    dU = -(np.exp(-2 * p.u) + np.exp(2 * p.v)) * e
    return dU - np.cos(qhat) @ damp, np.sin(qhat) * amp


def dual_angles(phat):
    """Principal branch ``q_j = arcsin(exp(phat_j))`` in ``(0, pi/2]``."""
    s = np.exp(np.asarray(phat, dtype=float))
    if np.any(s > 1 + 1e-15):
        raise DomainViolation("exp(phat) exceeds 1")
    return np.arcsin(np.clip(s, 0, 1))


def actions_phi_dual(l, phat):
    """``Phi_l^red = (1/l) sum_j cos(2 l q_j)`` with ``cos 2q = 1 - 2 exp(2 phat)``."""
    phat = np.asarray(phat, dtype=float)
    if np.any(phat > 0):
        raise DomainViolation("exp(phat) exceeds 1")
    c2q = 1 - 2 * np.exp(2 * phat)
    coeffs = np.zeros(l + 1)
    coeffs[l] = 1
    return float(np.sum(chebyshev.chebval(c2q, coeffs)) / l)


def rational_potential(lam, p):
    """``V_0 = (uv/mu^2) (prod_k (1 - mu^2/lambda_k^2) - 1)``."""
    lam = np.asarray(lam, dtype=float)
    # adding 0.0 turns a signed zero (u v = 0) into +0.0
    return float(p.u * p.v / p.mu**2 * _prod_minus_one(-(p.mu**2) / lam**2)) + 0.0


def _ham_rational_zero(rp, p):
    lam, theta = rp.lam, rp.theta
    D = lam[:, None] - lam[None, :]
    S = lam[:, None] + lam[None, :]
    with np.errstate(divide="ignore"):
        gD = 1 - p.mu**2 / D**2
    gS = 1 - p.mu**2 / S**2
    np.fill_diagonal(gD, 1.0)
    gv, gu = 1 - p.v**2 / lam**2, 1 - p.u**2 / lam**2
    if any(np.any(g < -RADICAND_TOL) for g in (gv, gu, gD, gS)):
        raise DomainViolation("negative radicand in H_0")
    rad = gv * gu * _offdiag_prod(gD) * _offdiag_prod(gS)
    amp = _sqrt(rad, "H_0 amplitude")
    return float(rational_potential(lam, p) + np.dot(np.cos(theta), amp))


def ham_rational(rp, p, r):
    """Scaled family ``H_r(lambda, theta) = H_1(r lambda, theta; r u, r v, r mu)``; ``r = 0`` is the limit ``H_0``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        return _ham_rational_zero(rp, p)
    pr = build_params(p.n, r * p.u, r * p.v, r * p.mu)
    return ham_phi1_red(ReducedPoint(r * rp.lam, rp.theta), pr)
