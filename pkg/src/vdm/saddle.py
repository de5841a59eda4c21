"""Geometric convergence of simultaneous gradient descent-ascent on quadratic saddles.

For F(theta, omega) = 1/2 theta'A theta - 1/2 omega'B omega + theta'C omega
with A, B >= delta I, iterating pi <- pi + eta * (-grad_theta F, grad_omega F)
with eta = delta / L shrinks J(pi) = 1/2 |grad F(pi)|^2 at least by the
factor 1 - delta^2 / (2L) per step, L being the smoothness constant of J.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np


@dataclass(frozen=True)
class QuadraticSaddle:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A, B, C = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.A, self.B, self.C))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        n, m = A.shape[0], B.shape[0]
        if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
            raise ValueError(f"shape mismatch: A {A.shape}, B {B.shape}, C {C.shape}")
        if not (np.allclose(A, A.T) and np.allclose(B, B.T)):
            raise ValueError("A and B must be symmetric")
        if self.delta <= 0:
            raise ValueError("A and B must be positive definite")

    @property
    def n_theta(self):
        return self.A.shape[0]

    @property
    def n_omega(self):
        return self.B.shape[0]

    @property
    def delta(self):
        """Strong convexity/concavity constant: min eigenvalue over A and B."""
        return float(min(np.linalg.eigvalsh(self.A)[0], np.linalg.eigvalsh(self.B)[0]))

    def hessian(self):
        return np.block([[self.A, self.C], [self.C.T, -self.B]])

    def scaled(self, c):
        return QuadraticSaddle(c * self.A, c * self.B, c * self.C)

    def value(self, pi):
        th, om = self.split(pi)
        return float(0.5 * th @ self.A @ th - 0.5 * om @ self.B @ om + th @ self.C @ om)

    def split(self, pi):
        pi = np.asarray(pi, dtype=float).reshape(-1)
        if pi.size != self.n_theta + self.n_omega:
            raise ValueError(f"expected a point of size {self.n_theta + self.n_omega}, got {pi.size}")
        return pi[: self.n_theta], pi[self.n_theta:]


def grad_field(s, pi):
    """Return (grad F, tilde grad F) at ``pi``; the tilde field flips the theta block."""
    th, om = s.split(pi)
    g_th = s.A @ th + s.C @ om
    g_om = -s.B @ om + s.C.T @ th
    return np.concatenate([g_th, g_om]), np.concatenate([-g_th, g_om])


def J(s, pi):
    g, _ = grad_field(s, pi)
    return 0.5 * float(g @ g)


def grad_J(s, pi):
    """Gradient of J: Hessian(F) times grad F."""
    g, _ = grad_field(s, pi)
    return s.hessian() @ g


def power_iteration(matrix, tol=1e-10, max_iter=100_000, seed=0):
    """Largest eigenvalue of a symmetric positive semi-definite matrix."""
    n = matrix.shape[0]
    x = np.random.default_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = matrix @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x_new = y / norm
        lam_new = float(x_new @ matrix @ x_new)
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        x, lam = x_new, lam_new
    return lam


def smoothness_constant(s):
    """L = largest eigenvalue of M'M with M the Hessian of F (J is quadratic)."""
    M = s.hessian()
    return power_iteration(M.T @ M)


class RateCheck(NamedTuple):
    passed: bool
    worst_ratio: float
    violating_step: Optional[int]
    J: List[float]
    bound: List[float]


def run_algorithm(s, pi0, steps, eta):
    """Trajectory of pi <- pi + eta * tilde grad F(pi)."""
    pi = np.asarray(pi0, dtype=float).copy()
    traj = [pi.copy()]
    for _ in range(steps):
        _, tg = grad_field(s, pi)
        pi = pi + eta * tg
        traj.append(pi.copy())
    return traj


def verify_rate(s, pi0, steps, L=None, rel_slack=1e-9):
    """Check J(pi_t) <= (1 - delta^2 / 2L)^t J(pi_0) along the eta = delta/L trajectory."""
    delta = s.delta
    L = smoothness_constant(s) if L is None else L
    eta = delta / L
    rho = 1.0 - delta * delta / (2.0 * L)
    traj = run_algorithm(s, pi0, steps, eta)
    js = [J(s, pi) for pi in traj]
    bounds = [rho ** t * js[0] for t in range(len(js))]
    violating = None
    for t, (j, b) in enumerate(zip(js, bounds)):
        if j > b * (1.0 + rel_slack) + 1e-300:
            violating = t
            break
    worst = 0.0
    for j0, j1 in zip(js[:-1], js[1:]):
        # ratios are meaningless once J reaches round-off level
        if j0 > 1e-280 and j0 > 1e-24 * js[0]:
            worst = max(worst, j1 / j0)
    return RateCheck(violating is None, worst, violating, js, bounds)


def sufficient_decrease_gap(s, pi):
    """<tilde grad F, grad J> + delta |grad F|^2, which must be <= 0."""
    g, tg = grad_field(s, pi)
    return float(tg @ (s.hessian() @ g) + s.delta * (g @ g))


def _spd(rng, n, delta):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(delta, 4.0 * delta, size=n)
    lam[rng.integers(n)] = delta
    return (q * lam) @ q.T


def random_saddle(n_theta, n_omega, delta=1.0, seed=0):
    """A, B with spectra in [delta, 4 delta] (min exactly delta), |C|_2 <= delta."""
    rng = np.random.default_rng(seed)
    A = _spd(rng, n_theta, delta)
    B = _spd(rng, n_omega, delta)
    A, B = 0.5 * (A + A.T), 0.5 * (B + B.T)
    C = rng.standard_normal((n_theta, n_omega))
    C *= delta * rng.uniform(0.0, 1.0) / np.linalg.norm(C, 2)
    return QuadraticSaddle(A, B, C)


def certify(n_instances=20, steps=200, points=100, seed=0):
    """Rate and sufficient-decrease checks on random instances of dimension 1-5.

    Returns a list of dicts, one per instance.
    """
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_instances):
        n_th, n_om = (int(v) for v in rng.integers(1, 6, size=2))
        delta = float(rng.uniform(0.1, 2.0))
        s = random_saddle(n_th, n_om, delta, seed=int(rng.integers(2 ** 31)))
        L = smoothness_constant(s)
        pi0 = rng.standard_normal(n_th + n_om)
        check = verify_rate(s, pi0, steps, L)
        pts = rng.standard_normal((points, n_th + n_om)) * rng.uniform(0.1, 10.0)
        gaps = [sufficient_decrease_gap(s, p) for p in pts]
        scale = max(J(s, p) for p in pts)
        out.append({
            "instance": k, "n_theta": n_th, "n_omega": n_om, "delta": s.delta, "L": L,
            "rate_bound": 1.0 - s.delta ** 2 / (2.0 * L), "rate_passed": check.passed,
            "worst_ratio": check.worst_ratio, "max_decrease_gap": max(gaps),
            "gap_scale": scale,
        })
    return out
