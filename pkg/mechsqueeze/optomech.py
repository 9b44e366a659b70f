#!/usr/bin/env python

"""
    Two-tone back-action evading optomechanical model
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.

    All rates are in units of the mechanical frequency omega_m. The cavity
    Y quadrature is measured, its signal carries the mechanical Q quadrature.
"""

from __future__ import absolute_import, print_function
import logging
from dataclasses import dataclass, replace, asdict
import numpy as np
from scipy.optimize import minimize_scalar
from .exceptions import ValidationError, ZeroCoupling, NumericalError
from .gaussian import X, Y, Q, P, check_physicality
from . import dynamics
from .dynamics import MatrixFlowProblem, PeriodicTrajectory
from .utilities import grid

log = logging.getLogger(__name__)

#default kappa grid used to locate the optimal sideband parameter
kappa_grid = (1e-3, 1e2, 60)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters, rates in units of omega_m"""

    omega_m: float = 1.0
    g: float = 0.05
    kappa: float = 1.0
    gamma: float = 1e-4
    nbar: float = 10.0
    eta: float = 1.0
    rwa: bool = True

    def __post_init__(self):
        errors = []
        for name in ['omega_m','kappa','gamma']:
            if not getattr(self, name) > 0:
                errors.append('%s must be positive, got %s' %(name, getattr(self, name)))
        if not self.g >= 0:
            errors.append('g must be non-negative, got %s' %self.g)
        if not self.nbar >= 0:
            errors.append('nbar must be non-negative, got %s' %self.nbar)
        if not 0 < self.eta <= 1:
            errors.append('eta must lie in (0,1], got %s' %self.eta)
        if errors:
            raise ValidationError(errors)

    @property
    def cooperativity(self):
        return 4*self.g**2/(self.kappa*self.gamma)

    @property
    def q_factor(self):
        return self.omega_m/self.gamma

    @property
    def period(self):
        """Period of the counter-rotating terms, pi/omega_m"""
        return np.pi/self.omega_m

    def replace(self, **kwargs):
        return replace(self, **kwargs)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DerivedScales:
    """Combinations of SystemParams that set the closed form results"""

    zeta: float
    cooperativity: float
    q_factor: float


class ModelDrift(object):
    """Drift matrix of the full model, periodic with period pi/omega_m"""

    is_constant = False

    def __init__(self, params):
        self.base = rwa_drift(params.replace(g=0))
        self.g = params.g
        self.omega_m = params.omega_m

    def __call__(self, t):
        g = self.g
        c, s = np.cos(2*self.omega_m*t), np.sin(2*self.omega_m*t)
        A = self.base.copy()
        A[Y,Q] = g*(1 + c)
        A[Y,P] = g*s
        A[Q,X] = -g*s
        A[P,X] = g*(1 + c)
        return A


def rwa_drift(params):
    kappa, gamma, g = params.kappa, params.gamma, params.g
    A = np.diag([-kappa/2, -kappa/2, -gamma/2, -gamma/2])
    A[Y,Q] = g
    A[P,X] = g
    return A

def diffusion(params):
    m = 2*params.nbar + 1
    return np.diag([params.kappa, params.kappa, params.gamma*m, params.gamma*m])

def measurement(params):
    """E = B, a single entry sqrt(eta kappa) on the measured Y quadrature"""

    B = np.zeros((4,4))
    B[Y,Y] = np.sqrt(params.eta*params.kappa)
    return B

def build_matrices(params):
    """
    Drift, diffusion and measurement matrices of the monitored system.
    Under the RWA (or at g=0) the drift is constant, otherwise it is a
    ModelDrift of period pi/omega_m.
    """

    if params.rwa or params.g == 0:
        A = rwa_drift(params)
    else:
        A = ModelDrift(params)
    B = measurement(params)
    return MatrixFlowProblem(A, diffusion(params), E=B, B=B.copy(),
                             kind='conditional_riccati', period=params.period)

def zeta(params):
    gk = params.gamma*params.kappa
    return np.sqrt(gk*(16*params.g**2*params.eta*(1 + 2*params.nbar) + gk))

def derived_scales(params):
    return DerivedScales(zeta=zeta(params), cooperativity=params.cooperativity,
                         q_factor=params.q_factor)

def conditional_variance_analytic(params):
    """Closed form steady conditional variance of Q under the RWA"""

    if params.g == 0:
        raise ZeroCoupling('closed form conditional variance is singular at g=0, '
                           'use the thermal value (2nbar+1)/2')
    g, kappa, gamma, eta = params.g, params.kappa, params.gamma, params.eta
    z = derived_scales(params).zeta
    root = np.sqrt(gamma**2 + kappa**2 + 2*z)
    return root/(16*g**2*eta*kappa)*(z + gamma**2 - gamma*root)

def adiabatic_variance(params):
    """Bad cavity limit of the conditional variance in terms of C = 4g^2/(kappa gamma)"""

    if params.g == 0:
        raise ZeroCoupling('adiabatic variance is singular at g=0')
    C, eta = derived_scales(params).cooperativity, params.eta
    m = 2*params.nbar + 1
    if C < 1e-6:
        return m/2 - eta*C*m**2/2
    return (np.sqrt(1 + 4*eta*C*m) - 1)/(4*C*eta)

def squeezing_threshold(params):
    """Lowest variance reachable with mechanical-limited Markovian feedback
       and the sideband region where it never drops below 1/2"""

    m = 2*params.nbar + 1
    scales = derived_scales(params)
    return {'threshold': params.gamma*m/(params.gamma + params.kappa),
            'excluded_kappa_bound': 2*params.nbar/scales.q_factor}

def thermal_variance(params):
    return (2*params.nbar + 1)/2.0

def seed_covariance(params):
    """
    Starting covariance for the periodic solvers of the full model: the RWA
    conditional steady state, or the RWA unconditional one when that is not
    a physical state.
    """

    rwa = build_matrices(params.replace(rwa=True))
    try:
        sigma = dynamics.steady_state_conditional(rwa)
        rep = check_physicality(sigma)
        if rep['physical']:
            return sigma
        log.debug('RWA conditional state unphysical (min eigenvalue %.3g)' %rep['min_eigenvalue'])
    except (NumericalError, np.linalg.LinAlgError, ValueError) as e:
        log.debug('RWA conditional state failed: %s' %e)
    return dynamics.steady_state_lyapunov(rwa.A(0), rwa.D)

def conditional_steady_state(params, numerics=None):
    """
    Steady conditional covariance sigma_c, algebraic under the RWA and
    periodic for the full model.
    Returns:
        PeriodicTrajectory
    """

    problem = build_matrices(params)
    if problem.is_constant:
        sigma = dynamics.steady_state_conditional(problem)
        return PeriodicTrajectory.constant(sigma, params.period)
    numerics = dynamics.with_dt(numerics, params.omega_m, params.kappa)
    flow = problem.flow('conditional_riccati')
    flow.dt = numerics.dt
    traj = dynamics.periodic_steady_state(flow, params.period, tol_period=numerics.tol_period,
                                          max_periods=numerics.max_periods,
                                          method=numerics.method, X0=seed_covariance(params))
    log.debug('conditional steady state g=%s kappa=%s: %s' %(params.g, params.kappa, traj))
    return traj

def innovation(params, sigma_c):
    """L(t) = E - sigma_c(t) B as a coefficient function"""

    problem = build_matrices(params)
    if sigma_c.is_constant:
        return problem.innovation(sigma_c(0))
    return lambda t: problem.innovation(sigma_c(t))

def open_loop_excess(params, sigma_c=None, numerics=None):
    """Excess noise without feedback, drift A and noise E - sigma_c B"""

    if sigma_c is None:
        sigma_c = conditional_steady_state(params, numerics)
    problem = build_matrices(params)
    numerics = dynamics.with_dt(numerics, params.omega_m, params.kappa)
    return dynamics.excess_noise(problem.A, innovation(params, sigma_c),
                                 params.period, numerics)

def unconditional_steady_state(params, numerics=None):
    """Covariance without measurement or feedback (Lyapunov steady state)"""

    problem = build_matrices(params)
    if problem.is_constant:
        return PeriodicTrajectory.constant(
                    dynamics.steady_state_lyapunov(problem.A(0), problem.D), params.period)
    numerics = dynamics.with_dt(numerics, params.omega_m, params.kappa)
    return dynamics.excess_noise(problem.A, np.linalg.cholesky(problem.D),
                                 params.period, numerics)

def optimal_kappa(params, kappas=None):
    """
    Sideband parameter minimising the RWA conditional variance: the best
    point of a log grid refined with a bounded scalar search between its
    neighbours.
    """

    if kappas is None:
        kappas = grid(*kappa_grid, log=True)
    kappas = np.sort(np.asarray(kappas, dtype=float))
    f = lambda k: conditional_variance_analytic(params.replace(kappa=k, rwa=True))
    vals = np.array([f(k) for k in kappas])
    i = int(np.argmin(vals))
    if len(kappas) < 3:
        return kappas[i]
    lo = np.log10(kappas[max(i-1, 0)])
    hi = np.log10(kappas[min(i+1, len(kappas)-1)])
    res = minimize_scalar(lambda x: f(10**x), bounds=(lo, hi), method='bounded',
                          options={'xatol': 1e-10})
    best = 10**res.x
    if f(best) > vals[i]:
        best = kappas[i]
    log.debug('optimal kappa for g=%s: %.6g' %(params.g, best))
    return float(best)
