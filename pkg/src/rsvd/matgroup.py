"""Matrix-group layer on SL(2n, C).

Iwasawa-type factorizations ``g = k b`` and ``g = b k``, the observables
(Omega, L, w), the Heisenberg-double Poisson bracket evaluated by finite
differences, the two commuting families ``F_l`` and ``Phi_l`` and their
flows on the observable triple.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import BadWHat, NonRealTrace, SingularInput, StepTooLarge
from .trajectory import Trajectory

__all__ = [
    "MasterPoint",
    "ObservableTriple",
    "TripleTangent",
    "involution",
    "random_sl",
    "decompose_kb",
    "decompose_bk",
    "dress_right",
    "observables",
    "pairing",
    "lie_project",
    "r_matrix",
    "sl_basis",
    "gradients",
    "poisson_bracket",
    "master_function",
    "free_hamiltonian",
    "triple_vector_field",
    "exact_F_flow",
    "integrate_Phi_flow",
]

DET_TOL = 1e-8


@dataclass(frozen=True)
class MasterPoint:
    k: np.ndarray
    b: np.ndarray

    @property
    def g(self):
        return self.k @ self.b


@dataclass(frozen=True)
class ObservableTriple:
    """The reduction-relevant image ``(Omega, L, w)`` of a master point."""

    Omega: np.ndarray
    L: np.ndarray
    w: np.ndarray

    @property
    def n(self):
        return self.Omega.shape[0] // 2

    def check(self, tol=1e-10):
        """Return the largest violation of the triple's structural invariants."""
        I = involution(self.n)
        herm = np.abs(self.Omega - self.Omega.conj().T).max()
        qherm = np.abs(self.L.conj().T - I @ self.L @ I).max()
        liw = np.abs(self.L @ I @ self.w - self.w).max()
        return max(herm, qherm, liw)


@dataclass(frozen=True)
class TripleTangent:
    dL: np.ndarray
    dOmega: np.ndarray
    dw: np.ndarray


@lru_cache(maxsize=None)
def _involution(n):
    I = np.diag(np.concatenate([np.ones(n), -np.ones(n)])).astype(complex)
    I.setflags(write=False)
    return I


def involution(n):
    """``I = diag(1_n, -1_n)``."""
    return _involution(n)


def random_sl(n, rng, scale=0.5):
    """Random element of SL(2n, C) as the exponential of a random traceless matrix.

    Keeps the condition number moderate so finite-difference checks stay clean.
    """
    m = 2 * n
    X = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    X -= np.trace(X) / m * np.eye(m)
    return expm(scale * X / np.sqrt(m))


def _gram_schmidt(a):
    # classical Gram-Schmidt with one re-orthogonalization pass (CGS2)
    m = a.shape[1]
    q = np.zeros(a.shape, dtype=complex)
    r = np.zeros((m, m), dtype=complex)
    scale = np.linalg.norm(a)
    for j in range(m):
        v = a[:, j].astype(complex)
        for _ in range(2):
            c = q[:, :j].conj().T @ v
            v = v - q[:, :j] @ c
            r[:j, j] += c
        nrm = np.linalg.norm(v)
        if nrm <= 1e-13 * scale:
            raise SingularInput(f"column {j} is numerically dependent on the previous ones")
        q[:, j] = v / nrm
        r[j, j] = nrm
    return q, r


def _check_sl(g):
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
        raise ValueError(f"expected a 2n x 2n matrix, got shape {g.shape}")
    d = np.linalg.det(g)
    if not np.isfinite(d) or abs(d) < 1e-300:
        raise SingularInput("matrix is singular")
    if abs(d - 1) > DET_TOL:
        raise ValueError(f"det(g) = {d:.3e} is not 1 (not an element of SL(2n, C))")
    return g


def decompose_kb(g):
    """Factor ``g = k b`` with ``k`` in SU(2n) and ``b`` upper triangular, positive diagonal."""
    g = _check_sl(g)
    k, b = _gram_schmidt(g)
    b = np.triu(b)
    return MasterPoint(k, b)


def decompose_bk(g):
    """Factor ``g = b k`` (triangular on the left); returns ``(b_L, k_R)``.

    Uses the reversal permutation J: ``J g^dag J = K B`` gives
    ``b_L = J B^dag J`` and ``k_R = J K^dag J``.
    """
    g = _check_sl(g)
    J = np.eye(g.shape[0])[::-1]
    K, B = _gram_schmidt(J @ g.conj().T @ J)
    B = np.triu(B)
    return J @ B.conj().T @ J, J @ K.conj().T @ J


def dress_right(b, f):
    """Dressing of ``b`` by a unitary ``f``: returns ``(f_tilde, b')`` with ``f_tilde b f^dag = b'``.

    For ``f`` in S(U(n) x U(n)) the result ``f_tilde`` is block diagonal too;
    this is asserted.
    """
    b = np.asarray(b, dtype=complex)
    f = np.asarray(f, dtype=complex)
    p = decompose_kb(b @ f.conj().T)
    f_tilde = p.k.conj().T
    n = b.shape[0] // 2
    if np.abs(f[:n, n:]).max() < 1e-12 and np.abs(f[n:, :n]).max() < 1e-12:
        off = max(np.abs(f_tilde[:n, n:]).max(), np.abs(f_tilde[n:, :n]).max())
        assert off < 1e-9, f"dressing left K_+ (off-block {off:.2e})"
    return f_tilde, p.b


def observables(p, w_hat=None):
    """``Omega = b b^dag``, ``L = k^dag I k I`` and ``w = k^dag w_hat``."""
    m = p.k.shape[0]
    n = m // 2
    I = involution(n)
    if w_hat is None:
        w_hat = np.zeros(m, dtype=complex)
    w_hat = np.asarray(w_hat, dtype=complex)
    if np.abs(I @ w_hat - w_hat).max() > 1e-12:
        raise BadWHat("w_hat must satisfy I w_hat = w_hat (lower half zero)")
    kh = p.k.conj().T
    return ObservableTriple(p.b @ p.b.conj().T, kh @ I @ p.k @ I, kh @ w_hat)


def pairing(X, Y):
    """Invariant inner product ``Im tr(X Y)`` on sl(2n, C)."""
    return float(np.einsum("ij,ji->", X, Y).imag)


def lie_project(X):
    """Split ``X = X_k + X_b`` with ``X_k`` anti-Hermitian and ``X_b`` upper triangular, real diagonal."""
    X = np.asarray(X, dtype=complex)
    low = np.tril(X, -1)
    Xk = low - low.conj().T + 1j * np.diag(np.diag(X).imag)
    return Xk, X - Xk


def r_matrix(X):
    """``R X = (P_k X - P_b X) / 2``."""
    Xk, Xb = lie_project(X)
    return 0.5 * (Xk - Xb)


@lru_cache(maxsize=None)
def sl_basis(m):
    """Real basis of sl(m, C) and the inverse Gram matrix of the pairing on it."""
    basis = []
    for a in range(m):
        for c in range(m):
            if a != c:
                E = np.zeros((m, m), dtype=complex)
                E[a, c] = 1
                basis.append(E)
                basis.append(1j * E)
    for j in range(m - 1):
        H = np.zeros((m, m), dtype=complex)
        H[j, j], H[j + 1, j + 1] = 1, -1
        basis.append(H)
        basis.append(1j * H)
    basis = np.array(basis)
    gram = np.einsum("aij,bji->ab", basis, basis).imag
    gram_inv = np.linalg.inv(gram)
    basis.setflags(write=False)
    gram_inv.setflags(write=False)
    return basis, gram_inv


@lru_cache(maxsize=32)
def _exp_steps(m, h):
    basis, _ = sl_basis(m)
    plus = np.array([expm(h * E) for E in basis])
    minus = np.array([expm(-h * E) for E in basis])
    return plus, minus


def gradients(f, g, h=1e-5):
    """Left and right gradients of ``f`` at ``g`` by central differences.

    ``d/dt f(exp(tX) g exp(tY)) = <X, grad> + <Y, grad'>`` is imposed on every
    basis direction and solved through the inverse Gram matrix.
    """
    g = np.asarray(g, dtype=complex)
    m = g.shape[0]
    basis, gram_inv = sl_basis(m)
    plus, minus = _exp_steps(m, h)
    cl = np.array([(f(ep @ g) - f(em @ g)) / (2 * h) for ep, em in zip(plus, minus)])
    cr = np.array([(f(g @ ep) - f(g @ em)) / (2 * h) for ep, em in zip(plus, minus)])
    left = np.tensordot(gram_inv @ cl, basis, axes=1)
    right = np.tensordot(gram_inv @ cr, basis, axes=1)
    return left, right


def bracket_from_gradients(grad_f, grad_g):
    (lf, rf), (lg, rg) = grad_f, grad_g
    return pairing(lf, r_matrix(lg)) + pairing(rf, r_matrix(rg))


def poisson_bracket(f, g_fn, p, h=1e-5):
    """Heisenberg-double bracket ``{f, g_fn}`` at the group element ``p``."""
    return bracket_from_gradients(gradients(f, p, h), gradients(g_fn, p, h))


def free_hamiltonian(family, l, t):
    """``F_l = tr(Omega^l) / 2l`` or ``Phi_l = tr(L^l) / 2l`` on a triple."""
    if l < 1:
        raise ValueError("l must be a positive integer")
    M = {"F": t.Omega, "Phi": t.L}[family]
    tr = np.trace(np.linalg.matrix_power(M, l))
    if abs(tr.imag) > 1e-8 * max(1.0, abs(tr)):
        raise NonRealTrace(f"tr {family}^{l} has imaginary part {tr.imag:.3e}")
    return tr.real / (2 * l)


def master_function(family, l):
    """``F_l`` or ``Phi_l`` as a function of the group element."""

    def fn(g):
        return free_hamiltonian(family, l, observables(decompose_kb(g)))

    fn.__name__ = f"{family}_{l}"
    return fn


def triple_vector_field(family, l, t):
    """Derivatives ``(dL, dOmega, dw)`` of the triple along the flow of ``F_l`` or ``Phi_l``."""
    m = t.Omega.shape[0]
    I = involution(m // 2)
    E = np.eye(m)
    if family == "F":
        Ol = np.linalg.matrix_power(t.Omega, l)
        nu = np.trace(Ol).real / m
        LI = t.L @ I
        dLI = LI @ (1j * Ol) - (1j * Ol) @ LI
        return TripleTangent(dLI @ I, np.zeros_like(t.Omega), -1j * (Ol - nu * E) @ t.w)
    if family == "Phi":
        Lm = np.linalg.matrix_power(t.L, l - 1)
        Ll = Lm @ t.L
        Lp = Ll @ t.L
        A = 2 * Ll - Lm - Lp
        dL = 0.5j * (A @ I - I @ A)
        dOm = 0.5j * (E + I) @ Ll @ (E - I) @ t.Omega + 0.5j * t.Omega @ (E - I) @ Ll @ (E + I)
        dw = 0.5j * (E + I) @ (Ll - Lm) @ t.w
        return TripleTangent(dL, dOm, dw)
    raise ValueError(f"unknown family {family!r}")


def exact_F_flow(t0, l, time):
    """Closed-form flow of ``F_l``: Omega fixed, ``w -> U^dag w`` and ``L I -> U^dag L I U``.

    ``U = exp(i time (Omega^l - nu_l))`` is built from the eigendecomposition of Omega.
    """
    m = t0.Omega.shape[0]
    I = involution(m // 2)
    ev, V = np.linalg.eigh(t0.Omega)
    evl = ev**l
    nu = evl.sum() / m
    U = (V * np.exp(1j * time * (evl - nu))) @ V.conj().T
    Uh = U.conj().T
    return ObservableTriple(t0.Omega.copy(), Uh @ t0.L @ I @ U @ I, Uh @ t0.w)


def _pack(t):
    return np.concatenate([t.L.ravel(), t.Omega.ravel(), t.w])


def _unpack(y, m):
    mm = m * m
    return ObservableTriple(y[mm:2 * mm].reshape(m, m), y[:mm].reshape(m, m), y[2 * mm:])


def _phi_rhs(y, m, l):
    d = triple_vector_field("Phi", l, _unpack(y, m))
    return np.concatenate([d.dL.ravel(), d.dOmega.ravel(), d.dw])


def _phi_monitors(t):
    vals = {f"Phi_{j}": free_hamiltonian("Phi", j, t) for j in (1, 2, 3)}
    vals["det_Omega"] = np.linalg.det(t.Omega).real
    return vals


def integrate_Phi_flow(t0, l, t_end, dt, drift_tol=1e-6, save_every=1):
    """Fixed-step RK4 integration of the ``Phi_l`` flow on the triple.

    Monitors ``Phi_1..3`` and ``det Omega``; raises :class:`StepTooLarge` when
    any of them drifts by more than ``drift_tol``.  No renormalization is applied.
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    m = t0.Omega.shape[0]
    nsteps = int(np.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / nsteps if nsteps else 0.0
    y = _pack(t0)
    ref = _phi_monitors(t0)
    times, states = [0.0], [t0]
    monitors = {k: [v] for k, v in ref.items()}
    for i in range(1, nsteps + 1):
        k1 = _phi_rhs(y, m, l)
        k2 = _phi_rhs(y + 0.5 * h * k1, m, l)
        k3 = _phi_rhs(y + 0.5 * h * k2, m, l)
        k4 = _phi_rhs(y + h * k3, m, l)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if i % save_every == 0 or i == nsteps:
            t = _unpack(y.copy(), m)
            vals = _phi_monitors(t)
            worst = max(abs(vals[k] - ref[k]) for k in ref)
            if worst > drift_tol:
                raise StepTooLarge(f"conserved-quantity drift {worst:.2e} exceeds {drift_tol:.1e} at t={i * h:.6g}")
            times.append(i * h)
            states.append(t)
            for k, v in vals.items():
                monitors[k].append(v)
    return Trajectory(np.array(times), states, {k: np.array(v) for k, v in monitors.items()})


def phi_flow_richardson(t0, l, t_end, dt):
    """Step-halving error estimate for :func:`integrate_Phi_flow`.

    Integrates with ``dt`` and ``dt/2`` and returns ``max|y_dt - y_dt/2| / 15``,
    the standard RK4 estimate of the error left in the ``dt/2`` endpoint.
    """
    coarse = integrate_Phi_flow(t0, l, t_end, dt, drift_tol=np.inf, save_every=10**9).final
    fine = integrate_Phi_flow(t0, l, t_end, dt / 2, drift_tol=np.inf, save_every=10**9).final
    return float(np.abs(_pack(coarse) - _pack(fine)).max()) / 15
