"""Linearized subsonic problem: energy-exact semi-discretization and diagnostics.

Unknowns are the potential perturbation Y and V = Y_t on the nodes of a
uniform grid over [x0, L].  The linear wave operator is written as

    V_t = rho * d/dx((a/rho) Y_x) - rho*Y - 2J d/dx(V/rho),   a = p' - J^2/rho^2,

which equals d/dx(a Y_x - 2u V) - E Y_x - rho Y along the steady profile
(because a*rho'/rho = E).  With trapezoid weights, a compact stiffness
matrix and a summation-by-parts first derivative, the discrete energy

    phi0 = (E/rho)(x0) Y0^2 + sum H V^2/rho + sum (a/rho)_mid (dY)^2/h + sum H Y^2

obeys d(phi0)/dt = -2J (V0^2/rho0^2 + VN^2/rhoN^2) - (viscous term) exactly
in semi-discrete form.  The viscous term is an h^2-scaled damping of V/rho
that removes spurious grid-scale modes (centered schemes for boundary-damped
waves otherwise lose uniform decay); its dissipation is tracked separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .base import SubsonicBase
from .errors import HypothesisViolation, NormDegenerate, UsageError


def sbp_derivative(w: np.ndarray, h: float) -> np.ndarray:
    """Central interior, one-sided boundary first derivative (trapezoid-norm SBP)."""
    d = np.empty_like(w)
    d[1:-1] = (w[2:] - w[:-2]) / (2.0 * h)
    d[0] = (w[1] - w[0]) / h
    d[-1] = (w[-1] - w[-2]) / h
    return d


def divergence(flux_mid: np.ndarray, left_flux: float, right_flux: float, hd: np.ndarray) -> np.ndarray:
    """H^-1 applied to the assembled node balance of a midpoint flux."""
    out = np.zeros(flux_mid.size + 1)
    out[:-1] += flux_mid
    out[1:] -= flux_mid
    out[0] -= left_flux
    out[-1] += right_flux
    return out / hd


def rk4(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class LinearOperator:
    """Frozen-coefficient generator of the linearized subsonic problem."""

    def __init__(self, base: SubsonicBase, viscosity: float = 1.0):
        if viscosity < 0.0:
            raise UsageError("viscosity must be nonnegative")
        self.base = base
        self.nu = float(viscosity)
        self.n = base.n
        self.h = base.h
        self.hd = np.full(self.n + 1, self.h)
        self.hd[0] = self.hd[-1] = 0.5 * self.h
        rc = base.response_coefficients()
        self.d1, self.e1 = rc.d1_0, rc.e1_0
        self.rho = base.rho
        self.J = base.J
        self.boundary_weight = float(base.E[0] / base.rho[0])

    @property
    def size(self) -> int:
        return 2 * (self.n + 1)

    def split(self, x):
        return x[: self.n + 1], x[self.n + 1:]

    def boundary_slope(self, Y, V) -> float:
        return self.d1 * V[0] + self.e1 * Y[0]

    def apply(self, Y, V, beta: float | None = None):
        """(Y_t, V_t); ``beta`` overrides the boundary slope Y_x(x0)."""
        b = self.base
        if beta is None:
            beta = self.boundary_slope(Y, V)
        h = self.h
        w = V / self.rho
        flux = b.A_mid * np.diff(Y) / h
        Vt = self.rho * divergence(flux, b.A[0] * beta, 0.0, self.hd) - self.rho * Y \
            - 2.0 * self.J * sbp_derivative(w, h)
        if self.nu:
            Vt += divergence(self.nu * h * np.diff(w), 0.0, 0.0, self.hd)
        return V.copy(), Vt

    def rhs(self, x):
        Yt, Vt = self.apply(*self.split(x))
        return np.concatenate([Yt, Vt])

    def energy(self, Y, V) -> float:
        b = self.base
        return float(self.boundary_weight * Y[0] ** 2 + np.sum(self.hd * V ** 2 / self.rho)
                     + np.sum(b.A_mid * np.diff(Y) ** 2) / self.h + np.sum(self.hd * Y ** 2))

    def dissipation_rates(self, Y, V) -> tuple[float, float]:
        """(boundary rate, viscous rate) of energy loss."""
        bnd = 2.0 * self.J * (V[0] ** 2 / self.rho[0] ** 2 + V[-1] ** 2 / self.rho[-1] ** 2)
        visc = 2.0 * self.nu * self.h * float(np.sum(np.diff(V / self.rho) ** 2))
        return float(bnd), visc

    def energy_matrix(self) -> np.ndarray:
        """Symmetric Q with phi0 = x^T Q x."""
        n1 = self.n + 1
        Q = np.zeros((2 * n1, 2 * n1))
        A = self.base.A_mid / self.h
        idx = np.arange(self.n)
        Q[idx, idx] += A
        Q[idx + 1, idx + 1] += A
        Q[idx, idx + 1] -= A
        Q[idx + 1, idx] -= A
        Q[np.arange(n1), np.arange(n1)] += self.hd
        Q[0, 0] += self.boundary_weight
        Q[n1 + np.arange(n1), n1 + np.arange(n1)] = self.hd / self.rho
        return Q

    def matrix(self) -> np.ndarray:
        """Dense generator matrix (column j = image of the j-th unit vector)."""
        m = self.size
        M = np.empty((m, m))
        e = np.zeros(m)
        for j in range(m):
            e[j] = 1.0
            M[:, j] = self.rhs(e)
            e[j] = 0.0
        return M

    def stable_dt(self, cfl: float) -> float:
        if not 0.0 < cfl <= 1.0:
            raise UsageError(f"cfl={cfl} outside (0, 1]")
        return cfl * self.h / self.base.wave_speed

    def trace_constant(self) -> float:
        """Smallest C with Y0^2 <= C (sum H Y^2 + sum A (dY)^2/h) on the grid."""
        Q = self.energy_matrix()[: self.n + 1, : self.n + 1].copy()
        Q[0, 0] -= self.boundary_weight
        z = np.linalg.solve(Q, np.eye(self.n + 1)[:, 0])
        return float(z[0])


# ---------------------------------------------------------------------------
# evolution and ledger


@dataclass
class LinearOptions:
    cfl: float = 0.5
    sample_dt: float = 0.05
    m_max: int = 2
    keep_states: bool = False


@dataclass
class EnergyLedger:
    times: np.ndarray
    phi: list  # phi[m][j] at times[j]
    D0_cumulative: np.ndarray
    Dvisc_cumulative: np.ndarray
    identity_residual: np.ndarray

    def phi_hat(self, k: int = 1) -> np.ndarray:
        return np.sum(np.asarray(self.phi[: k + 1]), axis=0)

    def to_rows(self) -> np.ndarray:
        return np.column_stack([self.times, *self.phi, self.D0_cumulative, self.Dvisc_cumulative,
                                self.identity_residual])

    def header(self) -> list[str]:
        return (["t"] + [f"phi{m}" for m in range(len(self.phi))]
                + ["D0", "D_visc", "identity_residual"])


@dataclass
class LinearRun:
    dt: float
    ledger: EnergyLedger
    # per-step boundary traces at x0 and energy, used by the observability check
    step_times: np.ndarray
    trace_Y: np.ndarray
    trace_Yt: np.ndarray
    trace_Yx: np.ndarray
    step_phi0: np.ndarray
    states: list = field(default_factory=list)
    final: np.ndarray | None = None


def project_initial(op: LinearOperator, h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """Correct h1 near both ends so its one-sided slopes satisfy the boundary relations."""
    xs, h = op.base.xs, op.h
    ell = xs[-1] - xs[0]
    w = 0.1 * ell
    h1 = np.asarray(h1, dtype=float).copy()
    h2 = np.asarray(h2, dtype=float)
    s = (xs - xs[0]) / w
    left_bump = w * s * np.exp(-s * s)  # value 0, slope 1 at x0
    r = (xs[-1] - xs) / w
    right_bump = -w * r * np.exp(-r * r)  # value 0, slope 1 at L
    # divide by the discrete slopes of the bumps so each correction is exact
    unit0 = _slope_left(left_bump, h)
    unitL = _slope_right(right_bump, h)
    for _ in range(2):
        target0 = op.d1 * h2[0] + op.e1 * h1[0]
        h1 += (target0 - _slope_left(h1, h)) / unit0 * left_bump - _slope_right(h1, h) / unitL * right_bump
    return h1


def _slope_left(y, h):
    return (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)


def _slope_right(y, h):
    return (3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * h)


def evolve_linear(op: LinearOperator, h1, h2, T_final: float, opts: LinearOptions | None = None,
                  dt: float | None = None) -> LinearRun:
    """RK4 evolution with an energy ledger sampled every ``opts.sample_dt``."""
    opts = opts or LinearOptions()
    n1 = op.n + 1
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if h1.shape != (n1,) or h2.shape != (n1,):
        raise UsageError(f"initial data must have {n1} grid values")
    dt_max = op.stable_dt(opts.cfl)
    if dt is not None and dt > dt_max * (1.0 + 1e-12):
        raise UsageError(f"dt={dt} violates the CFL bound {dt_max}")
    sample_dt = min(opts.sample_dt, T_final)
    per_sample = max(1, int(math.ceil(sample_dt / (dt if dt is not None else dt_max) - 1e-9)))
    dt = sample_dt / per_sample
    n_samples = int(round(T_final / sample_dt))
    if abs(n_samples * sample_dt - T_final) > 1e-9 * max(1.0, T_final):
        raise UsageError("T_final must be a multiple of sample_dt")

    x = np.concatenate([h1, h2])
    times, phis, d0s, dvs, res, states = [], [[] for _ in range(opts.m_max + 1)], [], [], [], []

    def record(t, x, D0, Dv, phi0_init):
        y = x
        for m in range(opts.m_max + 1):
            phis[m].append(op.energy(*op.split(y)))
            if m < opts.m_max:
                y = op.rhs(y)
        times.append(t)
        d0s.append(D0)
        dvs.append(Dv)
        res.append(phis[0][-1] + D0 + Dv - phi0_init)
        if opts.keep_states:
            states.append(x.copy())

    n_steps = n_samples * per_sample
    step_t = np.empty(n_steps + 1)
    tY = np.empty(n_steps + 1)
    tYt = np.empty(n_steps + 1)
    tYx = np.empty(n_steps + 1)
    sphi = np.empty(n_steps + 1)

    def traces(j, t, x):
        Y, V = op.split(x)
        step_t[j], tY[j], tYt[j], tYx[j] = t, Y[0], V[0], op.boundary_slope(Y, V)
        sphi[j] = op.energy(Y, V)

    traces(0, 0.0, x)
    phi0_init = sphi[0]
    D0 = Dv = 0.0
    rates = op.dissipation_rates(*op.split(x))
    record(0.0, x, D0, Dv, phi0_init)
    for j in range(1, n_steps + 1):
        x = rk4(op.rhs, x, dt)
        new_rates = op.dissipation_rates(*op.split(x))
        D0 += 0.5 * dt * (rates[0] + new_rates[0])
        Dv += 0.5 * dt * (rates[1] + new_rates[1])
        rates = new_rates
        t = j * dt
        traces(j, t, x)
        if j % per_sample == 0:
            record(t, x, D0, Dv, phi0_init)
    ledger = EnergyLedger(np.asarray(times), [np.asarray(p) for p in phis], np.asarray(d0s),
                          np.asarray(dvs), np.asarray(res))
    return LinearRun(dt, ledger, step_t, tY, tYt, tYx, sphi, states, x)


# ---------------------------------------------------------------------------
# decay rate and contraction windows


@dataclass
class DecayFit:
    lambda0: float
    alpha0_per_window: list
    r_squared: float
    unstable: bool
    window: float | None = None


def fit_decay_rate(ledger: EnergyLedger, window: float | None = None, k: int = 1,
                   tail: float = 0.5, t_start: float = 0.0) -> DecayFit:
    """Exponential rate of phi_hat_k: log phi_hat ~ c - lambda0 t over the tail.

    With ``window`` given, samples are taken at t_start + j*window, the
    per-window ratios are reported, and the fit uses those aligned samples.
    """
    t = np.asarray(ledger.times, dtype=float)
    y = ledger.phi_hat(min(k, len(ledger.phi) - 1))
    ratios = []
    if window is not None:
        if window <= 0.0:
            raise UsageError("window must be positive")
        n_win = int(math.floor((t[-1] - t_start) / window + 1e-9))
        if n_win < 1:
            raise UsageError("ledger shorter than one window")
        idx = [int(np.argmin(np.abs(t - (t_start + j * window)))) for j in range(n_win + 1)]
        if np.max(np.abs(t[idx] - (t_start + np.arange(n_win + 1) * window))) > 1e-6 * window:
            raise UsageError("ledger samples are not aligned with the window")
        t, y = t[idx], y[idx]
        ratios = [float(y[j + 1] / y[j]) for j in range(n_win)]
    keep = t >= t[0] + (1.0 - tail) * (t[-1] - t[0]) - 1e-12
    t, y = t[keep], y[keep]
    if np.any(y <= 0.0):
        raise HypothesisViolation("phi_hat is not positive; the energy is indefinite")
    if t.size < 2:
        raise UsageError("too few samples in the fitting tail")
    logy = np.log(y)
    slope, icpt = np.polyfit(t, logy, 1)
    fitted = slope * t + icpt
    ss_res = float(np.sum((logy - fitted) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return DecayFit(float(-slope), ratios, r2, bool(slope > 0.0), window)


# ---------------------------------------------------------------------------
# solution-operator spectrum


def generator_eigenvalues(op: LinearOperator) -> np.ndarray:
    """Eigenvalues of the semi-discrete generator, sorted by decreasing real part."""
    ev = np.linalg.eigvals(op.matrix())
    return ev[np.lexsort((-np.abs(ev.imag), -ev.real))]


def contraction_window(op: LinearOperator) -> float:
    """Window T = pi/omega of the slowest oscillating pair lambda = -mu +- i omega.

    Over this window S_T maps the dominant pair to a real double eigenvalue,
    so energy ratios between aligned windows settle quickly and power
    iteration converges.  A real dominant eigenvalue gives one e-fold instead.
    """
    lam = generator_eigenvalues(op)[0]
    if abs(lam.imag) > 1e-8 * max(1.0, abs(lam.real)):
        return float(math.pi / abs(lam.imag))
    return float(1.0 / max(abs(lam.real), 1e-3))


@dataclass
class SpectrumReport:
    dominant_modulus: float
    ritz_values: np.ndarray
    history: list
    residual: float
    T: float
    shifted: bool
    iterations: int


class SolutionOperator:
    """The map (Y, Y_t)(0) -> (Y, Y_t)(T) realized by RK4 steps."""

    def __init__(self, op: LinearOperator, T: float, cfl: float = 0.5):
        if T <= 0.0:
            raise UsageError("T must be positive")
        self.op, self.T = op, float(T)
        self.steps = max(1, int(math.ceil(T / op.stable_dt(cfl) - 1e-9)))
        self.dt = self.T / self.steps

    def __call__(self, x):
        for _ in range(self.steps):
            x = rk4(self.op.rhs, x, self.dt)
        return x


def x_norm_matrix(op: LinearOperator, shift: bool = False) -> tuple[np.ndarray, bool]:
    """Gram matrix of the X inner product; flips an indefinite boundary term if ``shift``."""
    Q = op.energy_matrix()
    try:
        np.linalg.cholesky(Q)
        return Q, False
    except np.linalg.LinAlgError:
        if not shift:
            raise NormDegenerate(
                f"X-norm is indefinite (boundary weight E/rho = {op.boundary_weight:.4g}); "
                "pass shift=True for the equivalent positive form")
    Q = Q.copy()
    Q[0, 0] += 2.0 * abs(op.boundary_weight)
    np.linalg.cholesky(Q)
    return Q, True


def smooth_random_data(op: LinearOperator, seed: int, n_modes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Seeded random combination of low cosine modes for (Y, Y_t)."""
    rng = np.random.default_rng(seed)
    s = (op.base.xs - op.base.xs[0]) / (op.base.xs[-1] - op.base.xs[0])
    k = np.arange(n_modes)
    basis = np.cos(np.pi * np.outer(s, k)) / (1.0 + k) ** 2
    return basis @ rng.standard_normal(n_modes), basis @ rng.standard_normal(n_modes)


def solution_operator_spectrum(op: LinearOperator, T: float, n_modes: int = 1, seed: int = 0,
                               max_iter: int = 60, tol: float = 1e-6, shift: bool = False,
                               krylov_dim: int | None = None, cfl: float = 0.5) -> SpectrumReport:
    """Dominant |eigenvalue| of S_T by power iteration (n_modes = 1) or Arnoldi.

    Both iterations use the X inner product x^T Q x.
    """
    Q, shifted = x_norm_matrix(op, shift)
    S = SolutionOperator(op, T, cfl)
    h1, h2 = smooth_random_data(op, seed)
    x = np.concatenate([h1, h2])

    def norm(v):
        return math.sqrt(max(float(v @ Q @ v), 0.0))

    x /= norm(x)
    history = []
    if n_modes <= 1:
        est = math.nan
        for it in range(1, max_iter + 1):
            y = S(x)
            new = norm(y)
            history.append(new)
            if new == 0.0:
                return SpectrumReport(0.0, np.array([0.0]), history, 0.0, T, shifted, it)
            # two consecutive steps resolve a complex pair of equal modulus
            if len(history) >= 2:
                est_new = math.sqrt(history[-1] * history[-2])
                if abs(est_new - est) <= tol * est_new:
                    est = est_new
                    x = y / new
                    break
                est = est_new
            x = y / new
        res = abs(history[-1] - history[-2]) / history[-1] if len(history) > 1 else math.inf
        return SpectrumReport(float(est if math.isfinite(est) else history[-1]), np.array([est]),
                              history, float(res), T, shifted, len(history))

    # Arnoldi in the Q inner product, after a few filtering steps
    for _ in range(2):
        x = S(x)
        x /= norm(x)
    m = krylov_dim or max(2 * n_modes, n_modes + 8)
    Vb = [x]
    H = np.zeros((m + 1, m))
    for j in range(m):
        w = S(Vb[j])
        for _ in range(2):  # re-orthogonalize
            for i in range(j + 1):
                c = float(Vb[i] @ Q @ w)
                H[i, j] += c
                w = w - c * Vb[i]
        H[j + 1, j] = norm(w)
        if H[j + 1, j] <= 1e-14 * np.max(np.abs(H[: j + 1, : j + 1])):
            m = j + 1
            break
        Vb.append(w / H[j + 1, j])
        ritz = np.linalg.eigvals(H[: j + 1, : j + 1])
        history.append(float(np.max(np.abs(ritz))))
    Hm = H[:m, :m]
    evals, evecs = np.linalg.eig(Hm)
    order = np.argsort(-np.abs(evals))
    evals, evecs = evals[order], evecs[:, order]
    residual = float(abs(H[m, m - 1]) * abs(evecs[-1, 0])) if m < H.shape[0] else 0.0
    return SpectrumReport(float(abs(evals[0])), evals[:n_modes], history, residual, T, shifted, m)


# ---------------------------------------------------------------------------
# characteristic frame and boundary observability


@dataclass
class CharacteristicFrame:
    x: np.ndarray
    zeta: np.ndarray
    theta_offset: np.ndarray  # theta = t - theta_offset(x)
    zeta_L: float
    M: np.ndarray
    N: np.ndarray
    k_weight: int
    zeta_L_refined: float

    def theta(self, t, x_index):
        return t - self.theta_offset[x_index]

    def conditions(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.k_weight
        return 2.0 * k - self.M, k * k - k * self.M - self.N


def _cumulative_simpson(y, x):
    """Cumulative Simpson on an even number of uniform cells (values at every node)."""
    out = np.zeros_like(y)
    h = x[1] - x[0]
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))  # trapezoid, corrected below at even nodes
    ev = np.arange(2, y.size, 2)
    simp = np.cumsum(h / 3.0 * (y[ev - 2] + 4.0 * y[ev - 1] + y[ev]))
    out[ev] = simp
    # odd nodes: Simpson to the previous even node plus a 3-point quadratic panel
    od = np.arange(1, y.size, 2)
    prev = np.where(od - 1 >= 2, out[od - 1], 0.0)
    nxt = np.minimum(od + 1, y.size - 1)
    out[od] = prev + h / 12.0 * (5.0 * y[od - 1] + 8.0 * y[od] - y[nxt])
    return out


def characteristic_transform(base: SubsonicBase, n_quad: int | None = None) -> CharacteristicFrame:
    law = base.law
    n = n_quad or 4 * base.n
    n += n % 2

    def tables(n):
        x = np.linspace(base.x0, base.L, n + 1)
        rho, _, rp = base.profile(x)
        u = base.J / rho
        c = np.sqrt(law.dp(rho))
        return x, rho, rp, u, c

    x, rho, rp, u, c = tables(n)
    zeta_integrand = 0.5 * (1.0 / (u + c) + 1.0 / (c - u))
    offset_integrand = 0.5 * (1.0 / (u + c) - 1.0 / (c - u))
    zeta = _cumulative_simpson(zeta_integrand, x)
    offset = _cumulative_simpson(offset_integrand, x)
    x2, rho2, _, u2, c2 = tables(2 * n)
    zeta_L_fine = float(simpson(0.5 * (1.0 / (u2 + c2) + 1.0 / (c2 - u2)), x=x2))
    dp, d2p = law.dp(rho), law.d2p(rho)
    a = dp - u * u
    M = a * (2.0 * dp - d2p * rho) / (2.0 * c ** 3 * rho) * rp
    N = a / dp * rho
    k = 1
    while not (np.all(2.0 * k > 1.1 * M) and np.all(k * k - k * M > 1.1 * N)):
        k += 1
    return CharacteristicFrame(x, zeta, offset, float(zeta[-1]), M, N, k, zeta_L_fine)


@dataclass
class ObservabilityResult:
    lhs: float
    rhs: float
    ratio: float
    zero_data: bool
    T_obs: float
    delta: float


def observability_check(run: LinearRun, frame: CharacteristicFrame, T_obs: float,
                        delta: float | None = None) -> ObservabilityResult:
    """Boundary trace energy over [0, T] against the interior energy near T/2.

    lhs = int_0^T (Y_t^2 + Y_x^2 + Y^2)(t, x0) dt and
    rhs = int_{T/2-delta}^{T/2+delta} phi0 dt; the zero-order boundary term
    is kept on the left so the ratio is a single positive constant.
    """
    if T_obs < 2.0 * frame.zeta_L:
        raise UsageError(f"T_obs={T_obs:.6g} shorter than twice the travel time {2 * frame.zeta_L:.6g}")
    if run.step_times[-1] < T_obs * (1.0 - 1e-12):
        raise UsageError("run is shorter than T_obs")
    delta = T_obs / 8.0 if delta is None else float(delta)
    if not 0.0 < delta < T_obs / 4.0:
        raise UsageError("delta must lie in (0, T_obs/4)")
    t = run.step_times
    inside = t <= T_obs * (1.0 + 1e-12)
    dens = run.trace_Yt ** 2 + run.trace_Yx ** 2 + run.trace_Y ** 2
    lhs = float(np.trapezoid(dens[inside], t[inside]))
    win = (t >= T_obs / 2 - delta - 1e-12) & (t <= T_obs / 2 + delta + 1e-12)
    rhs = float(np.trapezoid(run.step_phi0[win], t[win]))
    if rhs == 0.0 and lhs == 0.0:
        return ObservabilityResult(0.0, 0.0, 1.0, True, T_obs, delta)
    return ObservabilityResult(lhs, rhs, lhs / rhs if rhs > 0 else math.inf, False, T_obs, delta)
