"""Constraint surface, gauge slice and the (lambda, theta) chart of the reduced space.

A reduced point ``(lambda, theta)`` is turned into a constrained observable
triple (``reconstruct_point``) and, conversely, any triple on the gauge slice
is read back into ``(lambda, theta)`` (``extract_invariants``).
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadMu, DomainViolation, NonGenericSpectrum, OffSlice, SingularCauchy
from .matgroup import ObservableTriple, involution

__all__ = [
    "CouplingParams",
    "SpectralFrame",
    "ReducedPoint",
    "Reconstruction",
    "DomainReport",
    "build_params",
    "constraint_residual",
    "main_constraint_residual",
    "relative_main_residual",
    "spectral_frame",
    "moduli_oracle",
    "moduli_closed_form",
    "moduli_split_form",
    "reconstruct",
    "reconstruct_point",
    "extract_invariants",
    "domain_check",
    "sample_domain",
    "make_rng",
]

DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class CouplingParams:
    n: int
    u: float
    v: float
    mu: float
    x: float
    y: float
    alpha: float
    v_hat: np.ndarray
    w_hat: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class SpectralFrame:
    Lambda: np.ndarray
    beta: np.ndarray
    Gamma: np.ndarray
    Sigma: np.ndarray
    rho: np.ndarray

    @property
    def Lambda_full(self):
        return np.concatenate([self.Lambda, 1.0 / self.Lambda])


@dataclass(frozen=True)
class ReducedPoint:
    lam: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", np.atleast_1d(np.asarray(self.lam, dtype=float)))
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        if self.lam.shape != self.theta.shape:
            raise ValueError("lambda and theta must have the same length")


@dataclass(frozen=True)
class Reconstruction:
    frame: SpectralFrame
    moduli: np.ndarray
    w_tilde: np.ndarray
    Q: np.ndarray
    triple: ObservableTriple


def build_params(n, u, v, mu, v_hat_direction=None):
    if mu <= 0:
        raise BadMu(f"mu must be positive, got {mu}")
    if n < 1:
        raise ValueError("n must be at least 1")
    alpha = np.exp(-mu)
    radius = alpha * np.sqrt(alpha ** (-2 * n) - 1)
    if v_hat_direction is None:
        direction = np.zeros(n, dtype=complex)
        direction[0] = 1
    else:
        direction = np.asarray(v_hat_direction, dtype=complex)
        direction = direction / np.linalg.norm(direction)
    v_hat = radius * direction
    w_hat = np.concatenate([v_hat, np.zeros(n, dtype=complex)])
    # upper-triangular factor of alpha^2 + v v^dag via Cholesky of the reversed matrix
    M = alpha**2 * np.eye(n) + np.outer(v_hat, v_hat.conj())
    J = np.eye(n)[::-1]
    sigma = J @ np.linalg.cholesky(J @ M @ J) @ J
    det = np.linalg.det(sigma)
    assert abs(det - 1) <= 1e-8, f"det(sigma) = {det}"
    return CouplingParams(n, float(u), float(v), float(mu), np.exp(-v), np.exp(-u), alpha, v_hat, w_hat, sigma)


def constraint_residual(side, g, blocks):
    """Matrix identity equivalent to prescribing the diagonal blocks of a triangular factor.

    ``side="right"``: blocks of ``b_R`` in ``g = k b_R``; ``side="left"``: blocks
    of ``b_L`` in ``g = b_L k``.  The residual vanishes iff the blocks match.
    """
    g = np.asarray(g, dtype=complex)
    n = g.shape[0] // 2
    m1, m2 = (np.asarray(b, dtype=complex) for b in blocks)
    Z = np.zeros((n, n))
    if side == "right":
        G = g.conj().T @ g
        P = np.block([[np.linalg.inv(m1.conj().T @ m1), Z], [Z, Z]])
        rhs = np.block([[Z, Z], [Z, m2.conj().T @ m2]])
    elif side == "left":
        G = g @ g.conj().T
        P = np.block([[Z, Z], [Z, np.linalg.inv(m2 @ m2.conj().T)]])
        rhs = np.block([[m1 @ m1.conj().T, Z], [Z, Z]])
    else:
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    return G - G @ P @ G - rhs


def main_constraint_residual(t, p):
    """``2y^2 Omega - Omega^2 + Omega L I Omega - alpha^2 (id + L I) - 2 w w^dag``."""
    Om, L, w = t.Omega, t.L, t.w
    I = involution(p.n)
    LI = L @ I
    a2 = p.alpha**2
    return 2 * p.y**2 * Om - Om @ Om + Om @ LI @ Om - a2 * np.eye(2 * p.n) - a2 * LI - 2 * np.outer(w, w.conj())


def relative_main_residual(t, p):
    """Max-norm of the main residual scaled by the largest term, ``|Omega|^2 |L|``."""
    r = np.abs(main_constraint_residual(t, p)).max()
    scale = np.abs(t.Omega).max() ** 2 * max(1.0, np.abs(t.L).max())
    return r / scale


def _check_generic(values, name):
    d = -np.diff(values)
    if np.any(d <= DEGENERACY_TOL):
        raise NonGenericSpectrum(f"{name} must be strictly decreasing with gaps > {DEGENERACY_TOL}: {values}")


def spectral_frame(p, beta=None, Lambda=None):
    """Diagonalizing frame of the slice matrix ``Omega(beta)`` (``Omega = rho diag(Lambda, 1/Lambda) rho``)."""
    if (beta is None) == (Lambda is None):
        raise ValueError("give exactly one of beta or Lambda")
    x2, xm2 = p.x**2, p.x**-2
    floor = max(x2, xm2)
    if beta is not None:
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        _check_generic(beta, "beta")
        if beta[-1] <= 0:
            raise DomainViolation(f"beta must be positive, got {beta}")
        s = beta**2 + x2 + xm2
        Lambda = 0.5 * (s + np.sqrt(s * s - 4))
    else:
        Lambda = np.atleast_1d(np.asarray(Lambda, dtype=float))
        _check_generic(Lambda, "Lambda")
        if Lambda[-1] <= floor:
            raise DomainViolation(f"Lambda_n = {Lambda[-1]} must exceed max(x^2, x^-2) = {floor}")
        beta = np.sqrt(Lambda + 1 / Lambda - x2 - xm2)
    spread = Lambda - 1 / Lambda
    Gamma = np.sqrt((Lambda - xm2) / spread)
    Sigma = np.sqrt((xm2 - 1 / Lambda) / spread)
    G, S = np.diag(Gamma), np.diag(Sigma)
    rho = np.block([[G, S], [S, -G]])
    return SpectralFrame(Lambda, beta, Gamma, Sigma, rho)


def _cauchy_system(Lambda_full, p):
    a2 = p.alpha**2
    C = 1.0 / (np.outer(Lambda_full, Lambda_full) - a2)
    rhs = (p.y**2 * Lambda_full - a2) / (Lambda_full**2 - a2)
    return C, rhs


def moduli_oracle(Lambda_full, p):
    """Moduli ``|w~_a|^2`` by a dense solve of the Cauchy-like system (brute-force reference)."""
    Lambda_full = np.asarray(Lambda_full, dtype=float)
    C, rhs = _cauchy_system(Lambda_full, p)
    # symmetric diagonal equilibration; the raw system spans many decades
    d = 1.0 / np.sqrt(np.abs(np.diag(C)))
    Cs = d[:, None] * C * d[None, :]
    cond = np.linalg.cond(Cs)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularCauchy(f"Cauchy system condition number {cond:.3e} exceeds 1e12")
    return d * np.linalg.solve(Cs, d * rhs)


def moduli_closed_form(Lambda_full, p, check=True):
    """``|w~_a|^2 = alpha (Lambda_a - y^2) prod_{b != a} (Lambda_a Lambda_b / alpha - alpha) / (Lambda_a - Lambda_b)``."""
    L = np.asarray(Lambda_full, dtype=float)
    a = p.alpha
    num = np.outer(L, L) / a - a
    den = L[:, None] - L[None, :]
    np.fill_diagonal(num, 1.0)
    np.fill_diagonal(den, 1.0)
    out = a * (L - p.y**2) * np.prod(num / den, axis=1)
    if check and np.any(out <= 0):
        bad = np.flatnonzero(out <= 0)
        raise DomainViolation(f"moduli {bad.tolist()} are non-positive; lambda is outside the open domain")
    return out


def moduli_split_form(lam, p):
    """Moduli in hyperbolic form, upper half ``|w~_k|^2`` then lower half ``|w~_{n+k}|^2``."""
    lam = np.asarray(lam, dtype=float)
    mu = p.mu
    pre = np.exp(-mu) * np.sinh(mu) / np.sinh(2 * lam)
    s, d = lam[:, None] + lam[None, :], lam[:, None] - lam[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.sinh(s + mu) * np.sinh(d + mu) / (np.sinh(d) * np.sinh(s))
        dn = np.sinh(s - mu) * np.sinh(d - mu) / (np.sinh(d) * np.sinh(s))
    np.fill_diagonal(up, 1.0)
    np.fill_diagonal(dn, 1.0)
    top = pre * (np.exp(2 * lam) - p.y**2) * up.prod(axis=1)
    bottom = pre * (p.y**2 - np.exp(-2 * lam)) * dn.prod(axis=1)
    return np.concatenate([top, bottom])


def reconstruct(rp, p):
    """Constrained slice triple for a reduced point, with the intermediate data."""
    lam, theta = rp.lam, rp.theta
    if len(lam) != p.n:
        raise ValueError(f"expected {p.n} lambdas, got {len(lam)}")
    frame = spectral_frame(p, Lambda=np.exp(2 * lam))
    Lf = frame.Lambda_full
    moduli = moduli_closed_form(Lf, p)
    wt = np.sqrt(moduli).astype(complex)
    wt[p.n:] *= np.exp(1j * theta)
    a2 = p.alpha**2
    Q = (np.diag(Lf**2 - 2 * p.y**2 * Lf + a2) + 2 * np.outer(wt, wt.conj())) / (np.outer(Lf, Lf) - a2)
    rho = frame.rho
    I = involution(p.n)
    triple = ObservableTriple(rho @ np.diag(Lf) @ rho + 0j, rho @ Q @ rho @ I, rho @ wt)
    return Reconstruction(frame, moduli, wt, Q, triple)


def reconstruct_point(rp, p):
    return reconstruct(rp, p).triple


def extract_invariants(t, p, slice_tol=1e-6):
    """Read ``(lambda, theta)`` off a triple whose Omega lies on the gauge slice."""
    n = p.n
    Om = t.Omega
    off = np.abs(Om[n:, n:] - p.x**-2 * np.eye(n)).max()
    if off > slice_tol:
        raise OffSlice(f"Omega_22 deviates from x^-2 id by {off:.2e}")
    B = p.x * Om[:n, n:]
    Y1, beta, Y2h = np.linalg.svd(B)
    frame = spectral_frame(p, beta=beta)
    w = np.concatenate([Y1.conj().T @ t.w[:n], Y2h @ t.w[n:]])
    wt = frame.rho @ w
    theta = np.angle(wt[:n].conj() * wt[n:])
    return ReducedPoint(0.5 * np.log(frame.Lambda), theta)


@dataclass(frozen=True)
class DomainReport:
    ok: bool
    violation: str = ""
    margin: float = np.inf

    def __bool__(self):
        return self.ok


def _facets(kind, point, p):
    """(slack, description) for every strict inequality of the domain."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    out = []
    if kind == "lambda":
        c = max(abs(p.u), abs(p.v))
        out.append((point[-1] - c, f"lambda_{len(point)} > max(|u|,|v|) = {c:.6g}"))
    elif kind == "phat":
        c = min(0.0, p.v - p.u)
        out.append((c - point[0], f"phat_1 < min(0, v-u) = {c:.6g}"))
    else:
        raise ValueError(f"kind must be 'lambda' or 'phat', got {kind!r}")
    name = "lambda" if kind == "lambda" else "phat"
    for i in range(len(point) - 1):
        out.append((point[i] - point[i + 1] - p.mu, f"{name}_{i + 1} - {name}_{i + 2} > mu = {p.mu:.6g}"))
    return out


def domain_check(kind, point, p):
    """Strict membership in the lambda domain or the phat domain, naming the first violated inequality."""
    facets = _facets(kind, point, p)
    margin = min(s for s, _ in facets)
    for slack, text in facets:
        if not slack > 0:
            return DomainReport(False, text, margin)
    return DomainReport(True, "", margin)


def make_rng(seed):
    """Counter-based generator, reproducible across platforms."""
    return np.random.Generator(np.random.Philox(seed))


def sample_domain(kind, p, rng, margin=None, width=0.75, max_tries=100000):
    """Rejection-sample a point at distance >= ``margin`` (default mu/10) from every facet."""
    n = p.n
    if margin is None:
        margin = p.mu / 10
    span = n * (p.mu + width)
    for _ in range(max_tries):
        z = np.sort(rng.uniform(0, span, n))[::-1]
        if kind == "lambda":
            pt = max(abs(p.u), abs(p.v)) + z
        else:
            pt = min(0.0, p.v - p.u) - z[::-1]
        if all(s >= margin for s, _ in _facets(kind, pt, p)):
            return pt
    raise RuntimeError("rejection sampling failed; enlarge width")
