"""Canonical integration on the reduced chart and the two-route flow experiments.

Equations of motion follow from ``{theta_j, lambda_l} = delta_jl``::

    dlambda/dt = -dH/dtheta,    dtheta/dt = +dH/dlambda

The same orientation is used on the dual chart with ``(phat, qhat)`` in place
of ``(lambda, theta)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainExit
from .matgroup import exact_F_flow, free_hamiltonian, integrate_Phi_flow
from .models import (
    DualPoint,
    actions_F_red,
    grad_f1_dual,
    grad_phi1_red,
    ham_f1_dual,
    ham_phi1_red,
)
from .reduction import ReducedPoint, domain_check, extract_invariants, main_constraint_residual, reconstruct_point
from .trajectory import Trajectory

__all__ = [
    "Trajectory",
    "Hamiltonian",
    "phi1_hamiltonian",
    "f_action_hamiltonian",
    "f1_dual_hamiltonian",
    "canonical_rhs",
    "integrate_canonical",
    "unwrap_angles",
    "darboux_experiment",
    "duality_experiment",
    "conservation_report",
    "DarbouxReport",
    "DualityReport",
    "ConservationRow",
]

MAX_ANGLE_JUMP = np.pi / 2


@dataclass(frozen=True)
class Hamiltonian:
    """A reduced Hamiltonian on one of the Darboux charts.

    ``value(q, a)`` and ``grad(q, a) -> (dH/dq, dH/da)`` take the action-like
    coordinate ``q`` (lambda or phat) and the angle ``a`` (theta or qhat).
    """

    name: str
    value: object
    grad: object
    kind: str = "lambda"
    params: object = None

    def in_domain(self, q):
        if self.params is None:
            return True
        return bool(domain_check(self.kind, q, self.params))


def phi1_hamiltonian(p):
    return Hamiltonian(
        "Phi1_red",
        lambda lam, th: ham_phi1_red(ReducedPoint(lam, th), p),
        lambda lam, th: grad_phi1_red(ReducedPoint(lam, th), p),
        "lambda",
        p,
    )


def f_action_hamiltonian(l):
    def grad(lam, th):
        return 2 * np.sinh(2 * l * np.asarray(lam)), np.zeros(len(th))

    return Hamiltonian(f"F{l}_red", lambda lam, th: actions_F_red(l, lam), grad)


def f1_dual_hamiltonian(p):
    return Hamiltonian(
        "F1_dual",
        lambda ph, qh: ham_f1_dual(DualPoint(ph, qh), p),
        lambda ph, qh: grad_f1_dual(DualPoint(ph, qh), p),
        "phat",
        p,
    )


def canonical_rhs(H, rp, sign=1):
    """``(dlambda/dt, dtheta/dt)``; ``sign=-1`` flips the orientation (negative control only)."""
    q, a = _coords(rp)
    dq, da = H.grad(q, a)
    return -sign * np.asarray(da), sign * np.asarray(dq)


def _coords(pt):
    if isinstance(pt, DualPoint):
        return pt.phat, pt.qhat
    return pt.lam, pt.theta


def _make_point(H, q, a):
    return DualPoint(q, a) if H.kind == "phat" else ReducedPoint(q, a)


def _rk4_step(H, q, a, h, sign):
    def f(q, a):
        dq, da = H.grad(q, a)
        return -sign * np.asarray(da), sign * np.asarray(dq)

    k1q, k1a = f(q, a)
    k2q, k2a = f(q + 0.5 * h * k1q, a + 0.5 * h * k1a)
    k3q, k3a = f(q + 0.5 * h * k2q, a + 0.5 * h * k2a)
    k4q, k4a = f(q + h * k3q, a + h * k3a)
    return q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q), a + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)


def _stormer_step(H, q, a, h, sign, tol=1e-14, maxit=100):
    # generalized Stormer-Verlet with the angle as position and q as momentum;
    # the two implicit stages are solved by fixed-point iteration
    def dHda(q, a):
        return sign * np.asarray(H.grad(q, a)[1])

    def dHdq(q, a):
        return sign * np.asarray(H.grad(q, a)[0])

    q_half = q.copy()
    for _ in range(maxit):
        new = q - 0.5 * h * dHda(q_half, a)
        done = np.max(np.abs(new - q_half)) < tol
        q_half = new
        if done:
            break
    v0 = dHdq(q_half, a)
    a_new = a + h * v0
    for _ in range(maxit):
        new = a + 0.5 * h * (v0 + dHdq(q_half, a_new))
        done = np.max(np.abs(new - a_new)) < tol
        a_new = new
        if done:
            break
    q_new = q_half - 0.5 * h * dHda(q_half, a_new)
    return q_new, a_new


def integrate_canonical(H, rp0, t_end, dt, method="rk4", save_every=1, sign=1):
    """Fixed-step integration of Hamilton's equations on the reduced chart.

    Negative ``t_end`` integrates backward.  The state is checked against the
    open domain after every step; leaving it raises :class:`DomainExit`.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    step = {"rk4": _rk4_step, "stormer-split": _stormer_step}.get(method)
    if step is None:
        raise ValueError(f"unknown method {method!r}")
    nsteps = int(np.ceil(abs(t_end) / dt - 1e-9)) if t_end else 0
    h = t_end / nsteps if nsteps else 0.0
    q, a = (np.array(c, dtype=float) for c in _coords(rp0))
    if not H.in_domain(q):
        raise DomainExit(0.0, "initial point outside the domain")
    times, states, energy = [0.0], [rp0], [H.value(q, a)]
    for i in range(1, nsteps + 1):
        q, a = step(H, q, a, h, sign)
        t = i * h
        if not np.all(np.isfinite(q)) or not H.in_domain(q):
            raise DomainExit(t, domain_check(H.kind, q, H.params).violation if H.params is not None else "")
        if i % save_every == 0 or i == nsteps:
            times.append(t)
            states.append(_make_point(H, q.copy(), a.copy()))
            energy.append(H.value(q, a))
    return Trajectory(np.array(times), states, {"H": np.array(energy)})


def unwrap_angles(prev, current, max_jump=MAX_ANGLE_JUMP):
    """Shift ``current`` by multiples of 2 pi to follow ``prev``; refuse jumps above ``max_jump``."""
    d = np.angle(np.exp(1j * (current - prev)))
    if np.any(np.abs(d) > max_jump):
        raise RuntimeError(f"angle jump {np.abs(d).max():.3f} exceeds {max_jump:.3f}; step too coarse")
    return prev + d


@dataclass
class DarbouxReport:
    times: np.ndarray
    lam_unreduced: np.ndarray
    theta_unreduced: np.ndarray
    lam_canonical: np.ndarray
    theta_canonical: np.ndarray
    max_constraint_residual: float

    @property
    def deviation_lambda(self):
        return float(np.max(np.abs(self.lam_unreduced - self.lam_canonical)))

    @property
    def deviation_theta(self):
        return float(np.max(np.abs(self.theta_unreduced - self.theta_canonical)))

    @property
    def max_deviation(self):
        return max(self.deviation_lambda, self.deviation_theta)


def darboux_experiment(rp0, p, t_end=0.1, dt=1e-4, sign=1):
    """Compare the unreduced ``Phi_1`` flow, read through ``extract_invariants``, with
    the canonical flow of the closed-form ``Phi_1^red``."""
    t0 = reconstruct_point(rp0, p)
    unreduced = integrate_Phi_flow(t0, 1, t_end, dt)
    canonical = integrate_canonical(phi1_hamiltonian(p), rp0, t_end, dt, sign=sign)
    lam_u, th_u = [], []
    theta_prev = rp0.theta
    res = 0.0
    for t in unreduced.states:
        r = extract_invariants(t, p)
        theta_prev = unwrap_angles(theta_prev, r.theta)
        lam_u.append(r.lam)
        th_u.append(theta_prev)
        res = max(res, np.abs(main_constraint_residual(t, p)).max())
    return DarbouxReport(
        unreduced.times,
        np.array(lam_u),
        np.array(th_u),
        np.array([s.lam for s in canonical.states]),
        np.array([s.theta for s in canonical.states]),
        res,
    )


@dataclass
class DualityReport:
    l: int
    times: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    expected_slope: np.ndarray
    measured_slope: np.ndarray = field(default=None)

    @property
    def lambda_deviation(self):
        return float(np.max(np.abs(self.lam - self.lam[0])))

    @property
    def theta_deviation(self):
        pred = self.theta[0] + np.outer(self.times, self.expected_slope)
        return float(np.max(np.abs(np.angle(np.exp(1j * (self.theta - pred))))))


def duality_experiment(rp0, p, l=1, t_end=1.0, nsamples=21):
    """Follow the exact ``F_l`` flow of the reconstructed triple and read off ``(lambda, theta)``.

    Angles are compared modulo 2 pi against ``theta_j(0) + 2 t sinh(2 l lambda_j)``.
    """
    t0 = reconstruct_point(rp0, p)
    times = np.linspace(0.0, t_end, nsamples) if t_end > 0 else np.array([0.0])
    lam, theta = [], []
    for t in times:
        r = extract_invariants(exact_F_flow(t0, l, t), p)
        lam.append(r.lam)
        theta.append(r.theta)
    lam, theta = np.array(lam), np.array(theta)
    expected = 2 * np.sinh(2 * l * rp0.lam)
    measured = None
    if len(times) > 1:
        # short window keeps every angle increment below pi/4, so no 2 pi ambiguity
        window = min(t_end, 0.25 * np.pi / np.max(np.abs(expected)))
        fine = np.linspace(0.0, window, 9)
        th = [rp0.theta]
        for t in fine[1:]:
            th.append(unwrap_angles(th[-1], extract_invariants(exact_F_flow(t0, l, t), p).theta))
        measured = np.polyfit(fine, np.array(th), 1)[0]
    return DualityReport(l, times, lam, theta, expected, measured)


@dataclass(frozen=True)
class ConservationRow:
    name: str
    max_drift: float
    drift_rate: float


def conservation_report(traj, functions):
    """Per-function max ``|f(state_t) - f(state_0)|`` and least-squares drift rate."""
    rows = []
    for name, fn in functions.items():
        vals = np.array([fn(s) for s in traj.states], dtype=float)
        drift = vals - vals[0]
        rate = float(np.polyfit(traj.times, drift, 1)[0]) if len(vals) > 1 else 0.0
        rows.append(ConservationRow(name, float(np.max(np.abs(drift))), rate))
    return rows


def phi_monitor(l):
    """``Phi_l`` on a triple, for use with :func:`conservation_report`."""
    return lambda t: free_hamiltonian("Phi", l, t)
