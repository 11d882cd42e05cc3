"""Single bath mode on a truncated Fock basis.

The mode state is the mixture ``p_e D(+a) rho0 D(+a)^† + p_g D(-a) rho0 D(-a)^†``
of two displaced copies of the squeezed thermal state
``rho0 = S(xi) rho_th S(xi)^†``, with ``a = mu (1 - exp(i w t))``.

Operators are matrix exponentials of the truncated generators, built at a
padded dimension and cropped, so truncation leakage is measured rather
than assumed. Phase-space conventions: ``x = (b + b^†)/sqrt 2``,
``p = (b - b^†)/(i sqrt 2)``, vacuum covariance ``I/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, StepSizeError, TruncationError
from .params import ModeParams

LEAK_TOL = 1e-10
UNITARITY_TOL = 1e-8
MIN_DIM = 32
MAX_DIM = 512
EIG_ZERO = 1e-14


# --- operators ---------------------------------------------------------------

def annihilation_op(dim: int) -> np.ndarray:
    if dim < 2:
        raise DomainError("Fock dimension must be >= 2")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def expm_taylor(a: np.ndarray, order: int = 18) -> np.ndarray:
    """exp(a) by scaling and squaring with a fixed-order Taylor series."""
    norm = np.abs(a).sum(axis=0).max() if a.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = a / (2.0 ** squarings)
    eye = np.eye(a.shape[0], dtype=complex)
    # Horner evaluation of sum_k scaled^k / k!
    out = eye.copy()
    for k in range(order, 0, -1):
        out = eye + (scaled @ out) / k
    for _ in range(squarings):
        out = out @ out
    return out


def _pad(dim: int, spread: float) -> int:
    return dim + 16 + int(math.ceil(8.0 * spread))


def _displacement_raw(alpha: complex, dim: int) -> np.ndarray:
    b = annihilation_op(dim)
    return expm_taylor(alpha * b.conj().T - np.conj(alpha) * b)


def _squeeze_raw(xi: complex, dim: int) -> np.ndarray:
    b = annihilation_op(dim)
    b2 = b @ b
    return expm_taylor(0.5 * np.conj(xi) * b2 - 0.5 * xi * b2.conj().T)


def _leak_check(raw, arg, dim, spread, what):
    """Compare the vacuum column at ``dim`` with the padded construction."""
    pad = _pad(dim, spread)
    ref = raw(arg, pad)[:, 0]
    col = raw(arg, dim)[:, 0]
    outside = float(np.sum(np.abs(ref[dim:]) ** 2))
    mismatch = float(np.max(np.abs(col - ref[:dim])))
    if outside > LEAK_TOL or mismatch > math.sqrt(LEAK_TOL):
        raise TruncationError(
            f"{what} leaks out of the {dim}-level truncation (weight {outside:.2e}, mismatch {mismatch:.2e})",
            suggested_dim=2 * dim)


def unitarity_residual(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def displacement_op(alpha: complex, dim: int, check: bool = True) -> np.ndarray:
    """``exp(alpha b^† - alpha* b)`` on ``dim`` levels."""
    if dim < 2:
        raise DomainError("Fock dimension must be >= 2")
    alpha = complex(alpha)
    if check:
        _leak_check(_displacement_raw, alpha, dim, abs(alpha) ** 2, "displacement")
    return _displacement_raw(alpha, dim)


def squeeze_op(xi: complex, dim: int, check: bool = True) -> np.ndarray:
    """``exp(xi* b^2 / 2 - xi b^†2 / 2)`` on ``dim`` levels."""
    if dim < 2:
        raise DomainError("Fock dimension must be >= 2")
    xi = complex(xi)
    if check:
        _leak_check(_squeeze_raw, xi, dim, math.sinh(abs(xi)) ** 2, "squeeze")
    return _squeeze_raw(xi, dim)


# --- states ------------------------------------------------------------------

def thermal_occupation(omega: float, temperature: float) -> float:
    if temperature == 0.0:
        return 0.0
    x = omega / temperature
    # exp(-x) / (1 - exp(-x)) underflows to 0 instead of overflowing at large x
    return math.exp(-x) / -math.expm1(-x)


def thermal_state(omega: float, temperature: float, dim: int) -> np.ndarray:
    if dim < 2:
        raise DomainError("Fock dimension must be >= 2")
    if temperature < 0 or omega <= 0:
        raise DomainError("need omega > 0 and T >= 0")
    probs = np.zeros(dim)
    beta_w = omega / temperature if temperature > 0.0 else math.inf
    if math.exp(-beta_w) == 0.0:
        # T = 0, or so cold that every excited population underflows
        probs[0] = 1.0
    else:
        tail = math.exp(-dim * beta_w)
        if tail >= LEAK_TOL:
            need = int(math.ceil(-math.log(LEAK_TOL) / beta_w)) + 1
            raise TruncationError(f"thermal tail mass {tail:.2e} beyond {dim} levels", suggested_dim=need)
        probs = -math.expm1(-beta_w) * np.exp(-beta_w * np.arange(dim))
    return np.diag(probs).astype(complex)


def squeezed_thermal_state(mode: ModeParams, temperature: float, dim: int) -> np.ndarray:
    s = squeeze_op(mode.xi, dim, check=False)
    return s @ thermal_state(mode.omega_k, temperature, dim) @ s.conj().T


def _mode_spread(mode: ModeParams, temperature: float, t: float) -> float:
    return max(abs(mode.alpha(t)) ** 2, math.sinh(mode.r_k) ** 2,
               thermal_occupation(mode.omega_k, temperature))


def _mode_state_at(t, mode, temperature, p_e, dim):
    alpha = mode.alpha(t)
    pad = _pad(dim, _mode_spread(mode, temperature, t))
    try:
        rho0 = squeezed_thermal_state(mode, temperature, pad)
    except TruncationError as exc:
        raise TruncationError(str(exc), suggested_dim=2 * dim) from exc
    if alpha == 0:
        full = rho0
    else:
        d = _displacement_raw(alpha, pad)
        plus = d @ rho0 @ d.conj().T
        # D(-a) = D(a)^†
        minus = d.conj().T @ rho0 @ d
        full = p_e * plus + (1.0 - p_e) * minus
    crop = full[:dim, :dim]
    lost = float(np.real(np.trace(full) - np.trace(crop)))
    top = float(np.real(crop[-1, -1]))
    if lost > LEAK_TOL or top > LEAK_TOL:
        raise TruncationError(
            f"mode state leaks out of {dim} levels (lost trace {lost:.2e}, top population {top:.2e})",
            suggested_dim=2 * dim)
    return 0.5 * (crop + crop.conj().T)


def select_dim(t_values, mode: ModeParams, temperature: float, p_e: float = 0.5) -> int:
    """Smallest power-of-two multiple of 32 that holds the state at all given times."""
    dim = MIN_DIM
    while dim <= MAX_DIM:
        try:
            for t in np.atleast_1d(t_values):
                _mode_state_at(float(t), mode, temperature, p_e, dim)
            return dim
        except TruncationError:
            dim *= 2
    raise TruncationError(f"mode state does not fit within {MAX_DIM} levels", suggested_dim=None)


def mode_state(t: float, mode: ModeParams, temperature: float, p_e: float = 0.5,
               dim: int | None = None) -> np.ndarray:
    if not 0.0 <= p_e <= 1.0:
        raise DomainError("p_e must lie in [0, 1]")
    if temperature < 0:
        raise DomainError("temperature must be >= 0")
    if dim is None:
        dim = select_dim([t], mode, temperature, p_e)
    return _mode_state_at(t, mode, temperature, p_e, dim)


def check_state(rho: np.ndarray, herm_tol=1e-12, trace_tol=1e-8, pos_tol=1e-9):
    """Raise DomainError unless ``rho`` is a valid density matrix."""
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise DomainError("state is not Hermitian")
    if abs(np.trace(rho) - 1.0) > trace_tol:
        raise DomainError("state trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -pos_tol:
        raise DomainError("state has a negative eigenvalue")


# --- eigensolver -------------------------------------------------------------

class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray     # descending
    eigenvectors: np.ndarray    # columns


def _round_robin(n: int):
    """Orderings of range(n) (n even) that place each round's pairs side by side."""
    idx = list(range(n))
    rounds = []
    for _ in range(n - 1):
        order = []
        for i in range(n // 2):
            p, q = idx[i], idx[n - 1 - i]
            order += [min(p, q), max(p, q)]
        rounds.append(np.array(order))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def _rotations(a):
    """Per-pair 2x2 unitaries zeroing the (2i, 2i+1) entries of ``a``."""
    app = a[0::2, 0::2].diagonal().real
    aqq = a[1::2, 1::2].diagonal().real
    apq = a[0::2, 1::2].diagonal()
    mag = np.abs(apq)
    active = mag > 0
    safe = np.where(active, mag, 1.0)
    zeta = (aqq - app) / (2.0 * safe)
    az = np.abs(zeta)
    # for |zeta| > 1e150 the square would overflow; there t ~ 1/(2 zeta)
    root = np.where(az < 1e150, np.sqrt(1.0 + np.minimum(az, 1e150) ** 2), az)
    t = np.where(zeta >= 0, 1.0, -1.0) / (az + root)
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    ph = np.where(active, np.conj(apq) / safe, 1.0)     # exp(-i arg a_pq)
    return c.astype(complex), s.astype(complex), -s * ph, c * ph


def hermitian_eigen(m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi diagonalisation of a complex Hermitian matrix.

    Rounds follow a round-robin tournament, so each round rotates n/2
    disjoint pairs at once as a batch of 2x2 block updates. Converged when
    the off-diagonal Frobenius norm falls below ``tol * ||m||_F``.

    Density matrices carry a long cluster of near-zero eigenvalues in which
    the off-diagonal norm only shrinks linearly below ~1e-12, and at n = 256
    rounding alone leaves ~n * eps. The default tolerance stops there; it
    bounds every eigenvalue error by ~1e-12.
    """
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("matrix must be square")
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.conj().T)) > 1e-10 * scale:
        raise DomainError("matrix is not Hermitian")
    if n == 1:
        return EigenDecomposition(np.real(np.diag(a)).copy(), np.eye(1, dtype=complex))

    a = 0.5 * (a + a.conj().T)
    m_even = n + (n % 2)
    if m_even != n:
        # decoupled dummy level; rotations never touch it because its couplings stay zero
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(m_even, dtype=complex)
    norm = np.linalg.norm(a)
    rounds = _round_robin(m_even)
    cur = np.arange(m_even)          # cur[k] = original index at position k
    pos_of = np.empty(m_even, dtype=int)

    def off_norm(x):
        return np.linalg.norm(x - np.diag(x.diagonal()))

    converged = False
    for _ in range(max_sweeps):
        if off_norm(a) <= tol * norm:
            converged = True
            break
        for order in rounds:
            pos_of[cur] = np.arange(m_even)
            perm = pos_of[order]
            a = a[np.ix_(perm, perm)]
            v = v[:, perm]
            cur = order
            g11, g12, g21, g22 = _rotations(a)
            # columns: A <- A G, then rows: A <- G^† A
            c0, c1 = a[:, 0::2].copy(), a[:, 1::2].copy()
            a[:, 0::2] = c0 * g11 + c1 * g21
            a[:, 1::2] = c0 * g12 + c1 * g22
            r0, r1 = a[0::2, :].copy(), a[1::2, :].copy()
            a[0::2, :] = np.conj(g11)[:, None] * r0 + np.conj(g21)[:, None] * r1
            a[1::2, :] = np.conj(g12)[:, None] * r0 + np.conj(g22)[:, None] * r1
            c0, c1 = v[:, 0::2].copy(), v[:, 1::2].copy()
            v[:, 0::2] = c0 * g11 + c1 * g21
            v[:, 1::2] = c0 * g12 + c1 * g22
    if not converged and off_norm(a) > tol * norm:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps",
                               partial=np.real(a.diagonal()), last_term=float(off_norm(a)))

    # undo the working permutation
    pos_of[cur] = np.arange(m_even)
    w = np.real(a.diagonal())[pos_of]
    v = v[:, pos_of][:n, :]
    if m_even != n:
        v = v[:, :n]
        w = w[:n]
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def von_neumann_entropy(rho: np.ndarray) -> float:
    """``-tr rho ln rho`` in nats; eigenvalues <= 1e-14 contribute nothing."""
    lam = hermitian_eigen(rho).eigenvalues
    lam = lam[lam > EIG_ZERO]
    return float(-np.sum(lam * np.log(lam)))


# --- entropy rates -----------------------------------------------------------

def entropy_rate_fd(t: float, mode: ModeParams, temperature: float, p_e: float = 0.5,
                    dim: int | None = None, h: float | None = None, atol: float = 1e-9) -> float:
    """Central-difference dS/dt of the mode state, verified by step halving."""
    h = 1e-3 / mode.omega_k if h is None else h
    if h <= 0:
        raise DomainError("step must be > 0")
    if t < h:
        raise DomainError("central difference needs t >= h")
    if dim is None:
        dim = select_dim([t - h, t + h], mode, temperature, p_e)

    def entropy(tt):
        return von_neumann_entropy(_mode_state_at(tt, mode, temperature, p_e, dim))

    def diff(step):
        return (entropy(t + step) - entropy(t - step)) / (2.0 * step)

    coarse = diff(h)
    fine = diff(0.5 * h)
    if abs(coarse - fine) > max(0.01 * abs(fine), atol):
        raise StepSizeError(f"step halving changed dS/dt from {coarse:.6g} to {fine:.6g}")
    return coarse


def approx_entropy_rate_mode(t, mode: ModeParams, temperature: float):
    """Semi-Born estimate ``(w/T) d<n>/dt`` of one mode's entropy rate; diverges as 1/T."""
    if not temperature > 0:
        raise DomainError("the semi-Born mode entropy rate diverges at T = 0")
    wt = mode.omega_k * np.asarray(t, dtype=float)
    dth = mode.delta_theta
    r = mode.r_k
    osc = math.cosh(2 * r) * np.sin(wt) - math.sinh(2 * r) * (np.sin(2 * wt - dth) - np.sin(wt - dth))
    out = 2.0 * mode.g_abs ** 2 / temperature * osc
    return float(out) if np.ndim(out) == 0 else out


# --- moments and phase space -------------------------------------------------

class Moments(NamedTuple):
    n_mean: float
    a_sq: complex
    a_mean: complex


def moments(rho: np.ndarray) -> Moments:
    b = annihilation_op(rho.shape[0])
    n_mean = float(np.real(np.trace(rho @ b.conj().T @ b)))
    return Moments(n_mean, complex(np.trace(rho @ b @ b)), complex(np.trace(rho @ b)))


@dataclass(frozen=True)
class GaussianBranch:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise DomainError("branch weight must lie in [0, 1]")
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2) or abs(cov[0, 1] - cov[1, 0]) > 1e-12:
            raise DomainError("covariance must be a symmetric 2x2 matrix")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))

    def moments(self) -> Moments:
        """Fock-space moments implied by this Gaussian."""
        v = self.covariance
        x, p = self.mean
        a = complex(x, p) / math.sqrt(2.0)
        n_mean = 0.5 * (v[0, 0] + v[1, 1]) - 0.5 + abs(a) ** 2
        a_sq = 0.5 * complex(v[0, 0] - v[1, 1], 2.0 * v[0, 1]) + a * a
        return Moments(float(n_mean), a_sq, a)


def squeezed_thermal_covariance(nbar: float, r: float, theta: float) -> np.ndarray:
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    rot = np.array([[c, -s], [s, c]])
    return (nbar + 0.5) * rot @ np.diag([math.exp(-2 * r), math.exp(2 * r)]) @ rot.T


def gaussian_branch_from_params(mode: ModeParams, temperature: float, sign: int, t: float,
                                weight: float = 1.0) -> GaussianBranch:
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    a = sign * mode.alpha(t)
    nbar = thermal_occupation(mode.omega_k, temperature)
    cov = squeezed_thermal_covariance(nbar, mode.r_k, mode.theta_k)
    return GaussianBranch(weight, math.sqrt(2.0) * np.array([a.real, a.imag]), cov)


def mode_branches(mode: ModeParams, temperature: float, t: float, p_e: float = 0.5):
    return [gaussian_branch_from_params(mode, temperature, +1, t, p_e),
            gaussian_branch_from_params(mode, temperature, -1, t, 1.0 - p_e)]


def wigner_grid(branches: Sequence[GaussianBranch], x, p) -> np.ndarray:
    """Gaussian-mixture Wigner function on the lattice ``x`` (rows) by ``p`` (columns)."""
    if len(branches) == 0:
        raise DomainError("need at least one branch")
    if abs(sum(b.weight for b in branches) - 1.0) > 1e-9:
        raise DomainError("branch weights must sum to 1")
    xx, pp = np.meshgrid(np.asarray(x, float), np.asarray(p, float), indexing="ij")
    out = np.zeros_like(xx)
    for br in branches:
        cov = br.covariance
        det = float(np.linalg.det(cov))
        if det <= 0 or cov[0, 0] <= 0:
            raise DomainError("covariance is not positive definite")
        inv = np.linalg.inv(cov)
        dx, dp = xx - br.mean[0], pp - br.mean[1]
        quad = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dp + inv[1, 1] * dp * dp
        out += br.weight * np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    return out


def wigner_lattice(branches: Sequence[GaussianBranch], n: int = 201, n_sigma: float = 6.0):
    """Square lattice covering every branch to ``n_sigma`` standard deviations."""
    lo, hi = np.full(2, np.inf), np.full(2, -np.inf)
    for br in branches:
        sd = np.sqrt(np.diag(br.covariance))
        lo = np.minimum(lo, br.mean - n_sigma * sd)
        hi = np.maximum(hi, br.mean + n_sigma * sd)
    return np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)
