#!/usr/bin/env python

"""
    Integrators and steady state solvers for the covariance equations
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.

    Every deterministic flow handled here has the form

        dX/dt = A1 X + X A1^T + Q - X R X

    R = 0 is a Lyapunov flow, the conditional covariance has A1 = A + E B^T,
    Q = D - E E^T, R = B B^T and the control Riccati equation is the same flow
    run in reversed time.
"""

from __future__ import absolute_import, print_function
import math, logging
from dataclasses import dataclass, replace
import numpy as np
import pandas as pd
from scipy import linalg
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from .exceptions import Divergence, Unphysical, NotHurwitz, NoConvergence, \
                        NotConverged, NonStabilizing
from .utilities import symmetrize, frobenius, spectral_abscissa, spectral_radius, \
                        psd_factor, min_eigenvalue, is_psd
from . import gaussian

log = logging.getLogger(__name__)

OVERFLOW_GUARD = 1e12
HURWITZ_TOL = 1e-12
#spectral radius above this means the periodic map is not contracting
MARGINAL_RADIUS = 1 - 1e-10
kinds = ['lyapunov', 'conditional_riccati']
methods = ['shooting', 'iterate']


@dataclass(frozen=True)
class Numerics:
    """Numerical controls shared by every solver. dt and dt_sde left as None
       are chosen from the rates of the problem."""

    dt: float = None
    dt_sde: float = None
    tol_period: float = 1e-9
    max_periods: int = 1000000
    method: str = 'shooting'
    n_traj: int = 5000
    base_seed: int = 12345
    t_end: float = None
    burn_in: float = None
    n_batches: int = 20
    threads: int = 1


class Constant(object):
    """Time independent coefficient, callable like the periodic ones"""

    is_constant = True

    def __init__(self, value):
        self.value = np.array(value, dtype=float)
        self.value.setflags(write=False)

    def __call__(self, t):
        return self.value

    def __repr__(self):
        return 'Constant(%s)' %np.array2string(self.value, precision=4)


def coefficient(m):
    """Wrap a matrix as a Constant, callables are returned unchanged"""

    if m is None or callable(m):
        return m
    return Constant(m)

def is_constant(*coeffs):
    """True when none of the coefficients depend on time"""

    for c in coeffs:
        if c is None:
            continue
        if callable(c) and not getattr(c, 'is_constant', False):
            return False
    return True

def choose_dt(omega_m=1.0, kappa=None, gain=None):
    """Step size min(2pi 1e-3/omega_m, 0.05/kappa, 0.05/gain)"""

    dt = 2*np.pi*1e-3/omega_m
    if kappa:
        dt = min(dt, 0.05/kappa)
    if gain:
        dt = min(dt, 0.05/gain)
    return dt

def with_dt(numerics=None, omega_m=1.0, kappa=None, gain=None):
    """Numerics with dt filled in from the rates when it was left unset"""

    numerics = numerics or Numerics()
    if numerics.dt is not None:
        return numerics
    return replace(numerics, dt=choose_dt(omega_m, kappa, gain))

def grid_steps(span, dt):
    """Number of steps and step size such that the step divides the span"""

    n = max(1, int(math.ceil(span/dt - 1e-9)))
    return n, span/n

def check_hurwitz(A, period=None, dt=None, name='drift'):
    """
    Raise NotHurwitz unless A is stable. Constant matrices are tested on
    their eigenvalues, periodic ones on the one-period monodromy.
    Returns:
        the spectral abscissa or, for periodic A, the largest Floquet exponent
    """

    A = coefficient(A)
    if is_constant(A):
        a, ev = spectral_abscissa(A(0))
        if a >= -HURWITZ_TOL:
            raise NotHurwitz('%s is not Hurwitz, eigenvalue %s' %(name, ev), eigenvalue=ev)
        return a
    if dt is None:
        dt = choose_dt()
    phi = monodromy(A, period, dt)
    ev = np.linalg.eigvals(phi)
    mu = ev[np.argmax(np.abs(ev))]
    rho = abs(mu)
    if rho >= 1 - HURWITZ_TOL:
        raise NotHurwitz('%s has Floquet multiplier %s outside the unit circle'
                         %(name, mu), eigenvalue=np.log(mu + 0j)/period)
    return np.log(rho)/period

def monodromy(A, period, dt):
    """One-period state transition matrix of dx/dt = A(t) x (RK4)"""

    A = coefficient(A)
    n, h = grid_steps(period, dt)
    phi = np.eye(A(0).shape[0])
    if is_constant(A):
        return linalg.expm(A(0)*period)
    for k in range(n):
        t = k*h
        a1, a2, a3 = A(t), A(t+h/2), A(t+h)
        k1 = a1 @ phi
        k2 = a2 @ (phi + h/2*k1)
        k3 = a2 @ (phi + h/2*k2)
        k4 = a3 @ (phi + h*k3)
        phi = phi + h/6*(k1 + 2*k2 + 2*k3 + k4)
    return phi

def rk4_step(f, t, x, h):
    """Classical fourth order Runge-Kutta step of dx/dt = f(t, x)"""

    k1 = f(t, x)
    k2 = f(t + h/2, x + h/2*k1)
    k3 = f(t + h/2, x + h/2*k2)
    k4 = f(t + h, x + h*k3)
    return x + h/6*(k1 + 2*k2 + 2*k3 + k4)


class MatrixFlowProblem(object):
    """Drift, diffusion and measurement matrices of a monitored linear system.
       A may be a callable of time, in which case period gives its period."""

    def __init__(self, A, D, E=None, B=None, kind='conditional_riccati', period=None):
        if kind not in kinds:
            raise ValueError('kind must be one of %s' %', '.join(kinds))
        self.A = coefficient(A)
        n = self.A(0).shape[0]
        self.D = symmetrize(D)
        self.E = np.zeros((n,n)) if E is None else np.asarray(E, dtype=float)
        self.B = np.zeros((n,n)) if B is None else np.asarray(B, dtype=float)
        self.kind = kind
        self.period = period
        if min_eigenvalue(self.D) < -1e-12*max(1.0, np.abs(self.D).max()):
            raise ValueError('diffusion matrix D is not positive semidefinite')
        return

    @property
    def size(self):
        return self.D.shape[0]

    @property
    def is_constant(self):
        return is_constant(self.A)

    def as_lyapunov(self):
        """Same system with the measurement switched off"""

        return MatrixFlowProblem(self.A, self.D, kind='lyapunov', period=self.period)

    def flow(self, kind=None):
        """RiccatiFlow for the unconditional or the conditional covariance"""

        kind = kind or self.kind
        if kind == 'lyapunov':
            return RiccatiFlow(self.A, self.D, None, period=self.period)
        E, B = self.E, self.B
        EB = E @ B.T
        A = self.A
        if is_constant(A):
            A1 = A(0) + EB
        else:
            A1 = lambda t: A(t) + EB
        return RiccatiFlow(A1, self.D - E @ E.T, B @ B.T, period=self.period)

    def innovation(self, sigma):
        """E - sigma B, the noise coefficient of the conditional mean"""

        return self.E - np.asarray(sigma) @ self.B

    def __repr__(self):
        return 'MatrixFlowProblem(kind=%s, constant=%s, period=%s)' %(self.kind,
                    self.is_constant, self.period)


class MatrixTrajectory(object):
    """Matrices stored at selected times of an integration"""

    def __init__(self, times, values):
        self.times = np.asarray(times)
        self.values = np.asarray(values)

    @property
    def final(self):
        return self.values[-1]

    def __len__(self):
        return len(self.times)

    def entry(self, i, j):
        """Time series of one matrix entry"""

        return pd.Series(self.values[:,i,j], index=self.times)


class PeriodicTrajectory(object):
    """
    Matrix valued function over one period, sampled on a uniform grid that
    includes both ends (values[-1] is values[0] one period later). Calling
    the object evaluates a periodic cubic spline at any time.
    """

    def __init__(self, period, grid, values, converged=True, residual=0.0,
                 periods=0, constant=False):
        self.period = float(period)
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.converged = converged
        self.residual = residual
        self.periods = periods
        self.is_constant = constant
        self._spline = None

    @classmethod
    def constant(cls, value, period=np.pi):
        value = np.asarray(value, dtype=float)
        return cls(period, [0.0, period], np.array([value, value]), converged=True,
                   residual=0.0, periods=0, constant=True)

    def __call__(self, t):
        if self.is_constant:
            return self.values[0]
        if self._spline is None:
            v = self.values.copy()
            v[-1] = v[0]
            self._spline = CubicSpline(self.grid, v, axis=0, bc_type='periodic')
        return self._spline(np.mod(t, self.period))

    def __len__(self):
        return len(self.grid)

    def __repr__(self):
        return 'PeriodicTrajectory(period=%.6g, samples=%s, converged=%s, residual=%.3g)' \
                %(self.period, len(self.grid), self.converged, self.residual)

    def map(self, func):
        """Apply a matrix function to every sample"""

        vals = np.array([func(v) for v in self.values])
        return PeriodicTrajectory(self.period, self.grid, vals, self.converged,
                                  self.residual, self.periods, self.is_constant)

    def resample(self, grid):
        """Evaluate on another grid over the same period"""

        return np.array([self(t) for t in grid])

    def mean(self):
        """Period average of the matrix"""

        if self.is_constant:
            return self.values[0]
        return trapezoid(self.values, self.grid, axis=0)/self.period

    def reversed(self):
        """Trajectory of X(T - t), used for flows integrated backwards"""

        return PeriodicTrajectory(self.period, self.grid, self.values[::-1].copy(),
                                  self.converged, self.residual, self.periods,
                                  self.is_constant)


def add_trajectories(a, b):
    """Sum of two periodic trajectories on the finer of their grids"""

    if a.is_constant and b.is_constant:
        return PeriodicTrajectory.constant(a(0) + b(0), a.period)
    if b.is_constant or (not a.is_constant and len(a) >= len(b)):
        a, b = b, a
    #b is now periodic and carries the grid
    vals = b.values + (a.resample(b.grid) if not a.is_constant else a(0))
    return PeriodicTrajectory(b.period, b.grid, vals, a.converged and b.converged,
                              max(a.residual, b.residual), b.periods)


class RiccatiFlow(object):
    """
    The flow dX/dt = A1 X + X A1^T + Q - X R X. R=None gives a Lyapunov flow.
    For periodic coefficients the coefficient tables are cached on the
    half-step grid of one period so repeated periods cost only the RK4
    arithmetic.
    """

    def __init__(self, A1, Q, R=None, period=None, dt=None):
        self.A1 = coefficient(A1)
        self.Q = coefficient(Q)
        self.R = coefficient(R)
        self.period = period
        self.dt = dt if dt is not None else choose_dt()
        self._tables = None

    @property
    def is_constant(self):
        return is_constant(self.A1, self.Q, self.R)

    @property
    def size(self):
        return self.A1(0).shape[0]

    def coefficients(self, t):
        r = self.R(t) if self.R is not None else None
        return self.A1(t), self.Q(t), r

    def rhs(self, X, a1, q, r):
        d = a1 @ X
        d = d + d.T + q
        if r is not None:
            d = d - X @ r @ X
        return d

    def closed_loop(self, X, a1, r):
        """Linearization of the flow around X acts as M d + d M^T with this M"""

        if r is None:
            return a1
        return a1 - X @ r

    def integrate(self, X0, t_end, dt=None, stride=1, t0=0.0, check=None):
        """
        Fixed step RK4 from t0 to t0+t_end, symmetrizing after each step.
        Args:
            X0: initial matrix
            stride: keep every stride-th step
            check: optional callable run on every kept sample
        Returns:
            MatrixTrajectory
        """

        if dt is None:
            dt = self.dt
        if dt <= 0:
            raise ValueError('dt must be positive')
        n, h = grid_steps(t_end, dt)
        X = symmetrize(X0)
        times = [t0]
        values = [X]
        if self.is_constant:
            a1, q, r = self.coefficients(0)
            f = lambda t, x: self.rhs(x, a1, q, r)
        else:
            f = lambda t, x: self.rhs(x, *self.coefficients(t))
        for k in range(n):
            t = t0 + k*h
            X = symmetrize(rk4_step(f, t, X, h))
            self._guard(X, t + h)
            if (k+1) % stride == 0 or k == n-1:
                times.append(t + h)
                values.append(X)
                if check is not None:
                    check(X, t + h)
        return MatrixTrajectory(times, values)

    def _guard(self, X, t):
        m = np.abs(X).max()
        if not m < OVERFLOW_GUARD:
            raise Divergence('integration diverged at t=%.6g (max entry %g)' %(t, m))

    def _build_tables(self):
        n, h = grid_steps(self.period, self.dt)
        times = np.arange(2*n+1)*h/2
        if self.is_constant:
            times = times[:1]
        a1 =np.array([self.A1(t) for t in times])
        q = np.array([self.Q(t) for t in times])
        if self.R is not None:
            r = np.array([self.R(t) for t in times])
        else:
            r = [None]*len(times)
        self._tables = (n, h, a1, q, r)
        log.debug('cached coefficient tables, %s steps per period' %n)
        return self._tables

    def propagate(self, X0, monodromy=True):
        """
        Integrate exactly one period from X0.
        Returns:
            grid, samples on the grid (n+1 of them), the monodromy of the
            linearized flow (None unless requested)
        """

        if self._tables is None:
            self._build_tables()
        n, h, a1, q, r = self._tables
        size = self.size
        X = symmetrize(X0)
        phi = np.eye(size) if monodromy else None
        samples = np.empty((n+1, size, size))
        samples[0] = X
        const = self.is_constant
        for k in range(n):
            if const:
                j0 = j1 = j2 = 0
            else:
                j0, j1, j2 = 2*k, 2*k+1, 2*k+2
            k1 = self.rhs(X, a1[j0], q[j0], r[j0])
            X2 = X + h/2*k1
            k2 = self.rhs(X2, a1[j1], q[j1], r[j1])
            X3 = X + h/2*k2
            k3 = self.rhs(X3, a1[j1], q[j1], r[j1])
            X4 = X + h*k3
            k4 = self.rhs(X4, a1[j2], q[j2], r[j2])
            if monodromy:
                p1 = self.closed_loop(X, a1[j0], r[j0]) @ phi
                p2 = self.closed_loop(X2, a1[j1], r[j1]) @ (phi + h/2*p1)
                p3 = self.closed_loop(X3, a1[j1], r[j1]) @ (phi + h/2*p2)
                p4 = self.closed_loop(X4, a1[j2], r[j2]) @ (phi + h*p3)
                phi = phi + h/6*(p1 + 2*p2 + 2*p3 + p4)
            X = symmetrize(X + h/6*(k1 + 2*k2 + 2*k3 + k4))
            self._guard(X, (k+1)*h)
            samples[k+1] = X
        grid = np.arange(n+1)*h
        return grid, samples, phi

    def initial_guess(self):
        """Steady state of the period averaged coefficients, zeros if that
           fails or is not positive semidefinite"""

        if self._tables is None and not self.is_constant:
            self._build_tables()
        if self.is_constant:
            a1, q, r = self.coefficients(0)
        else:
            n, h, A1t, Qt, Rt = self._tables
            w = np.ones(2*n+1)
            w[0] = w[-1] = 0.5
            w = w/w.sum()
            a1 = np.tensordot(w, A1t, axes=1)
            q = np.tensordot(w, Qt, axes=1)
            r = np.tensordot(w, np.array(Rt), axes=1) if self.R is not None else None
        zero = np.zeros((self.size, self.size))
        try:
            X = steady_state_riccati(a1, q, r)
        except (NotHurwitz, NonStabilizing, np.linalg.LinAlgError, ValueError) as e:
            log.debug('averaged steady state failed (%s), starting from zero' %e)
            return zero
        if not is_psd(X):
            log.debug('averaged steady state is not positive semidefinite (min eigenvalue '
                      '%.3g), starting from zero' %min_eigenvalue(X))
            return zero
        return X


def steady_state_lyapunov(A, N, refine=2):
    """
    Solve A X + X A^T + N = 0 for Hurwitz A.
    Args:
        A: constant drift
        N: constant symmetric source term
        refine: number of residual correction passes
    Returns:
        symmetric X
    """

    A = np.asarray(A, dtype=float)
    N = symmetrize(N)
    check_hurwitz(A)
    X = symmetrize(linalg.solve_continuous_lyapunov(A, -N))
    scale = max(frobenius(N), np.finfo(float).tiny)
    for i in range(refine):
        res = A @ X + X @ A.T + N
        if frobenius(res) <= 1e-12*scale:
            break
        X = symmetrize(X + linalg.solve_continuous_lyapunov(A, -res))
    res = frobenius(A @ X + X @ A.T + N)
    if res > 1e-10*scale:
        log.warning('Lyapunov residual %.3g relative to |N| = %.3g' %(res, scale))
    return X

def steady_state_riccati(A1, Q, R=None):
    """
    Stabilizing solution of A1 X + X A1^T + Q - X R X = 0 with constant
    coefficients. R PSD, a zero or missing R reduces to a Lyapunov solve.
    """

    A1 = np.asarray(A1, dtype=float)
    Q = symmetrize(Q)
    if R is None or not np.any(R):
        return steady_state_lyapunov(A1, Q)
    L = psd_factor(R)
    n = A1.shape[0]
    X = linalg.solve_continuous_are(A1.T, L, Q, np.eye(n))
    X = symmetrize(X)
    a, ev = spectral_abscissa(A1 - X @ symmetrize(R))
    if a >= -HURWITZ_TOL:
        raise NonStabilizing('Riccati solution does not stabilize the closed loop, '
                             'eigenvalue %s' %ev)
    return X

def steady_state_conditional(problem):
    """Algebraic steady state of the conditional Riccati flow (constant A)"""

    E, B = problem.E, problem.B
    return steady_state_riccati(problem.A(0) + E @ B.T, problem.D - E @ E.T, B @ B.T)

def integrate_lyapunov(problem, sigma0, t_end, dt, stride=1):
    """
    Integrate d sigma/dt = A sigma + sigma A^T + D with RK4.
    Returns:
        MatrixTrajectory of sigma
    """

    flow = problem.flow('lyapunov')
    return flow.integrate(sigma0, t_end, dt, stride=stride)

def integrate_conditional_riccati(problem, sigma0, t_end, dt, stride=1, tol_psd=gaussian.TOL_PSD):
    """
    Integrate the conditional covariance
    d sigma/dt = A sigma + sigma A^T + D - (E - sigma B)(E - sigma B)^T.
    Kept samples are checked against the uncertainty relation when the
    initial state satisfies it.
    """

    flow = problem.flow('conditional_riccati')
    check = None
    if problem.size % 2 == 0 and gaussian.check_physicality(symmetrize(sigma0), tol_psd)['physical']:
        def check(X, t):
            rep = gaussian.check_physicality(X, tol_psd)
            if not rep['physical']:
                raise Unphysical('conditional covariance unphysical at t=%.6g '
                                 '(min eigenvalue %.3g)' %(t, rep['min_eigenvalue']))
    return flow.integrate(sigma0, t_end, dt, stride=stride, check=check)

def periodic_steady_state(flow, period=None, tol_period=1e-9, max_periods=1000000,
                          method='shooting', X0=None):
    """
    Iterate whole periods of a flow until successive periods agree.
    The shooting method replaces plain iteration by a Newton step on the
    period map, solving d - Phi d Phi^T = X(T) - X(0) with Phi the monodromy
    of the linearized flow. A plain period replaces the step while the
    monodromy of a Riccati flow is not contracting, or when the previous
    step diverged or increased the periodicity defect.
    Args:
        flow: RiccatiFlow
        tol_period: tolerance on the largest Frobenius distance between the
            samples of two successive periods, relative to max(1, |X|)
        max_periods: number of periods after which NoConvergence is raised
        method: 'shooting' or 'iterate'
        X0: starting matrix, defaults to the averaged steady state
    Returns:
        PeriodicTrajectory
    """

    if method not in methods:
        raise ValueError('method must be one of %s' %', '.join(methods))
    if period is not None:
        flow.period = period
    if flow.period is None or flow.period <= 0:
        raise ValueError('period must be positive')
    X = flow.initial_guess() if X0 is None else symmetrize(X0)
    prev = None
    last_defect = np.inf
    residual = np.inf
    fallback = None
    for it in range(1, int(max_periods)+1):
        try:
            grid, samples, phi = flow.propagate(X, monodromy=(method == 'shooting'))
        except Divergence:
            if fallback is None:
                raise
            log.debug('shooting step diverged, taking a plain period')
            X, fallback = fallback, None
            continue
        fallback = None
        XT = samples[-1]
        scale = max(1.0, frobenius(XT))
        defect = frobenius(XT, X)
        if prev is not None:
            residual = np.sqrt(((samples - prev)**2).sum(axis=(1,2))).max()
        log.debug('period %s: residual %.3g defect %.3g' %(it, residual, defect))
        if residual < tol_period*scale and defect < tol_period*scale:
            log.debug('periodic steady state after %s periods' %it)
            return PeriodicTrajectory(flow.period, grid, samples, converged=True,
                                      residual=residual, periods=it,
                                      constant=flow.is_constant)
        prev = samples
        if method == 'iterate':
            X = XT
            continue
        rho = spectral_radius(phi)
        if rho >= MARGINAL_RADIUS:
            #a Riccati linearization moves with X, a Lyapunov one does not
            if flow.R is None or defect < np.sqrt(tol_period)*scale:
                raise NoConvergence('period map is not contracting, monodromy spectral '
                                    'radius %.12g' %rho, periods=it, residual=residual)
            log.debug('monodromy spectral radius %.6g away from the periodic state, '
                      'taking a plain period' %rho)
            X = XT
        elif defect > last_defect:
            log.debug('shooting step increased the defect, taking a plain period')
            X = XT
        else:
            step = linalg.solve_discrete_lyapunov(phi, XT - X)
            Xn = symmetrize(X + step)
            if flow.R is not None and min_eigenvalue(Xn) < -tol_period*scale:
                Xn = XT
            else:
                fallback = XT
            X = Xn
        last_defect = defect
    raise NoConvergence('no periodic steady state after %s periods (residual %.3g)'
                        %(max_periods, residual), periods=max_periods, residual=residual)

def solve_control_riccati(A, F, S, Xi, period, dt=None, tol_period=1e-9,
                          max_periods=1000000, method='shooting'):
    """
    Stabilizing (periodic) solution Y of the control Riccati equation
    -dY/dt = A^T Y + Y A + S - Y F Xi^-1 F^T Y.
    Constant A, F use the algebraic solver, otherwise the equation is run
    backwards in time to its periodic steady state.
    Returns:
        PeriodicTrajectory of Y
    """

    A = coefficient(A)
    F = coefficient(F)
    S = symmetrize(S)
    Xi = np.asarray(Xi, dtype=float)
    Xi_inv = np.linalg.inv(Xi)
    if is_constant(A, F):
        a, f = A(0), F(0)
        if not np.any(S):
            Y = np.zeros_like(S)
        else:
            Y = symmetrize(linalg.solve_continuous_are(a, f, S, Xi))
        closed = a - f @ Xi_inv @ f.T @ Y
        abscissa, ev = spectral_abscissa(closed)
        if abscissa >= -HURWITZ_TOL:
            raise NonStabilizing('control Riccati closed loop is not Hurwitz, '
                                 'eigenvalue %s' %ev)
        return PeriodicTrajectory.constant(Y, period)
    T = period
    A1 = lambda s: A(T - s).T
    R = lambda s: F(T - s) @ Xi_inv @ F(T - s).T
    flow = RiccatiFlow(A1, S, R, period=period, dt=dt)
    traj = periodic_steady_state(flow, period, tol_period=tol_period,
                                 max_periods=max_periods, method=method)
    return traj.reversed()

def excess_noise(A_tilde, V, period, numerics=None):
    """
    Steady (or periodic steady) solution of the excess noise equation
    dS/dt = At S + S At^T + V V^T for a closed-loop drift At and noise
    coefficient V.
    """

    numerics = numerics or Numerics()
    A_tilde = coefficient(A_tilde)
    V = coefficient(V)
    if is_constant(A_tilde, V):
        v = V(0)
        S = steady_state_lyapunov(A_tilde(0), v @ v.T)
        return PeriodicTrajectory.constant(S, period)
    dt = numerics.dt or choose_dt()
    check_hurwitz(A_tilde, period, dt, name='closed-loop drift')
    def source(t):
        v = V(t)
        return v @ v.T
    flow = RiccatiFlow(A_tilde, source, None, period=period, dt=dt)
    return periodic_steady_state(flow, period, tol_period=numerics.tol_period,
                                 max_periods=numerics.max_periods, method=numerics.method)

def time_average(traj, functional=None):
    """
    Trapezoidal period average and extrema of a scalar functional of the
    samples.
    Returns:
        dict with mean, min and max
    """

    if not traj.converged:
        raise NotConverged('trajectory has not reached its periodic steady state')
    if functional is None:
        functional = lambda m: m
    v = np.array([functional(m) for m in traj.values], dtype=float)
    if traj.is_constant:
        mean = v[0]
    else:
        mean = trapezoid(v, traj.grid)/traj.period
    return {'mean': float(mean), 'min': float(v.min()), 'max': float(v.max())}
