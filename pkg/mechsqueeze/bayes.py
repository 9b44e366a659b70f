#!/usr/bin/env python

"""
    Bayesian (state based, linear quadratic Gaussian) feedback
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.

    The feedback force is u = -K r_c, linear in the filtered mean, with
    K = Xi^-1 F^T Y and Y the stabilizing solution of the control Riccati
    equation for the cost E[<r S r>_c + u Xi u].
"""

from __future__ import absolute_import, print_function
import logging
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from .exceptions import SingularXi, ValidationError, NotConverged, ZeroCoupling
from .gaussian import X, Q, squeezing_db
from . import dynamics, optomech
from .dynamics import Constant, PeriodicTrajectory, coefficient, is_constant, time_average
from .base import FeedbackLaw
from .markov import ForceDirection
from .utilities import min_eigenvalue

log = logging.getLogger(__name__)

variants = ['ideal', 'mechanical_limited', 'force_limited']


def default_cost_matrix():
    return np.diag([0, 0, 1.0, 0])


@dataclass(frozen=True)
class CostSpec:
    """State cost S and actuation cost Xi = chi I"""

    S: np.ndarray = field(default_factory=default_cost_matrix)
    chi: float = 0.1

    def __post_init__(self):
        errors = []
        S = np.asarray(self.S, dtype=float)
        if S.shape != (4,4) or not np.allclose(S, S.T):
            errors.append('S must be a symmetric 4x4 matrix')
        elif min_eigenvalue(S) < -1e-12:
            errors.append('S must be positive semidefinite')
        if not self.chi > 0:
            errors.append('chi must be positive, got %s' %self.chi)
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, 'S', S)

    @property
    def Xi(self):
        return self.chi*np.eye(4)


@dataclass(frozen=True)
class Units:
    """Conversion of the dimensionless feedback to a force"""

    hbar_over_xzpf: float = 1e-20
    omega_m_si: float = 2*np.pi*1e6


def direction_matrix(variant, omega_m=1.0):
    if variant == 'ideal':
        return Constant(np.eye(4))
    elif variant == 'mechanical_limited':
        return Constant(np.diag([0, 0, 1.0, 1.0]))
    elif variant == 'force_limited':
        return ForceDirection(1.0, omega_m)
    raise ValueError('unknown Bayesian variant %s, use one of %s' %(variant, ', '.join(variants)))

def lqg_gain(Y, F, Xi):
    """
    Optimal gain K = Xi^-1 F^T Y, pointwise in time.
    Returns:
        coefficient function of K
    """

    Xi = np.asarray(Xi, dtype=float)
    if np.linalg.matrix_rank(Xi) < Xi.shape[0]:
        raise SingularXi('actuation cost Xi is singular')
    Xi_inv = np.linalg.inv(Xi)
    Y = coefficient(Y)
    F = coefficient(F)
    if is_constant(Y, F):
        return Constant(Xi_inv @ F(0).T @ Y(0))
    return lambda t: Xi_inv @ F(t).T @ Y(t)

def bayes_gain_analytic_rwa(gamma, chi):
    """beta = (sqrt(4/chi + gamma^2) - gamma)/2"""

    return (np.sqrt(4.0/chi + gamma**2) - gamma)/2

def excess_noise_analytic_rwa(params, chi):
    """Closed form steady excess noise entry Sigma_QQ for ideal RWA
       feedback with S = diag(0,0,1,0)"""

    if params.g == 0:
        raise ZeroCoupling('closed form excess noise is singular at g=0')
    g, kappa, gamma, eta = params.g, params.kappa, params.gamma, params.eta
    z = optomech.zeta(params)
    root = np.sqrt(kappa**2 + gamma**2 + 2*z)
    return (np.sqrt(chi)/np.sqrt(4 + gamma**2*chi)*
            (gamma**2 + z - gamma*root)**2/(16*g**2*eta*kappa))

def excess_noise_bayes(A_tilde_b, L, period, numerics=None):
    """Excess noise for the closed-loop drift A - F K, noise L = E - sigma_c B"""

    return dynamics.excess_noise(A_tilde_b, L, period, numerics)

def _samples(traj_like, grid):
    c = coefficient(traj_like)
    if is_constant(c):
        return np.array([c(0)]*len(grid))
    return np.array([c(t) for t in grid])

def average_feedback(F, K, excess, units=None):
    """
    Period averaged magnitude E[(Fu)^T Fu] = Tr[F K S K^T F^T] of the
    feedback and the corresponding force in newton.
    """

    units = units or Units()
    if not excess.converged:
        raise NotConverged('excess noise has not converged')
    F = coefficient(F)
    K = coefficient(K)
    if excess.is_constant and is_constant(F, K):
        fk = F(0) @ K(0)
        dim = float(np.trace(fk @ excess(0) @ fk.T))
    else:
        grid = excess.grid
        fk = np.einsum('tij,tjk->tik', _samples(F, grid), _samples(K, grid))
        vals = np.einsum('tij,tjk,tik->t', fk, excess.values, fk)
        dim = time_average(PeriodicTrajectory(excess.period, grid, vals), None)['mean']
    dim = max(dim, 0.0)
    return {'dimensionless': dim,
            'force_newton': units.hbar_over_xzpf*np.sqrt(dim)*units.omega_m_si}

def lab_frame_gains(K, period, grid=None, omega_m=1.0):
    """
    Gains of the lab frame force Hamiltonian -(beta_Q <Q> + beta_X <X>) Q0,
    the projection of the mechanical rows of K on the force direction
    (sin omega_m t, cos omega_m t).
    Returns:
        dataframe with columns t, beta_Q, beta_X
    """

    if grid is None:
        grid = np.linspace(0, period, 201)
    Ks = _samples(K, grid)
    v = np.stack([np.sin(omega_m*grid), np.cos(omega_m*grid)], axis=1)
    mech = Ks[:,2:,:]
    beta = np.einsum('ti,tij->tj', v, mech)
    return pd.DataFrame({'t': grid, 'beta_Q': beta[:,Q], 'beta_X': beta[:,X]})

def steady_cost(cost, sigma_c, excess, K):
    """h_ss = Tr[S (sigma_c + Sigma)]/2 + Tr[Xi K Sigma K^T]/2, period averaged"""

    total = dynamics.add_trajectories(sigma_c, excess)
    state = time_average(total, lambda m: np.trace(cost.S @ m)/2)['mean']
    K = coefficient(K)
    if excess.is_constant and is_constant(K):
        k = K(0)
        act = np.trace(cost.Xi @ k @ excess(0) @ k.T)/2
    else:
        Ks = _samples(K, excess.grid)
        vals = np.einsum('ij,tjk,tkl,til->t', cost.Xi, Ks, excess.values, Ks)/2
        act = time_average(PeriodicTrajectory(excess.period, excess.grid, vals), None)['mean']
    return float(state + act)


class BayesLaw(FeedbackLaw):
    """LQG feedback for a cost and a direction matrix variant"""

    kind = 'bayes'

    def __init__(self, params, cost=None, variant='ideal', sigma_c=None, numerics=None):
        if variant not in variants:
            raise ValueError('unknown Bayesian variant %s' %variant)
        self.cost = cost or CostSpec()
        self.variant = variant
        gain = bayes_gain_analytic_rwa(params.gamma, self.cost.chi)
        FeedbackLaw.__init__(self, params, sigma_c, numerics, gain)
        problem = self.problem
        sigma_c = self.sigma_c
        self.F = direction_matrix(variant, params.omega_m)
        n = self.numerics
        self.Y = dynamics.solve_control_riccati(problem.A, self.F, self.cost.S, self.cost.Xi,
                                                params.period, dt=n.dt, tol_period=n.tol_period,
                                                max_periods=n.max_periods, method=n.method)
        self.K = lqg_gain(self.Y, self.F, self.cost.Xi)
        A, F, K = problem.A, self.F, self.K
        if is_constant(A, F, K):
            self.A_tilde = Constant(A(0) - F(0) @ K(0))
        else:
            self.A_tilde = lambda t: A(t) - F(t) @ K(t)
        self.V = optomech.innovation(params, sigma_c)

    @property
    def name(self):
        return 'bayes_%s(chi=%s)' %(self.variant.split('_')[0], self.cost.chi)

    def excess(self):
        if self._excess is None:
            self._excess = excess_noise_bayes(self.A_tilde, self.V, self.params.period,
                                              self.numerics)
        return self._excess


def bayes_report(params, cost=None, variant='ideal', numerics=None, sigma_c=None,
                 convention='paper_absolute', units=None):
    """
    Full Bayesian pipeline for one parameter point: conditional steady
    state, control Riccati, gain, excess noise and the variance of Q.
    Returns:
        dict with var_c, var_fb (mean/min/max), db, avg_force, gains,
        excess_Q, steady_cost and the trajectories used
    """

    law = BayesLaw(params, cost, variant, sigma_c=sigma_c, numerics=numerics)
    sigma_c = law.sigma_c
    excess = law.excess()
    total = dynamics.add_trajectories(sigma_c, excess)
    var_c = time_average(sigma_c, lambda m: m[Q,Q]/2)
    var_fb = time_average(total, lambda m: m[Q,Q]/2)
    if var_fb['mean'] < var_c['mean'] - 1e-9:
        log.warning('averaged variance below the conditional one (%s < %s)'
                    %(var_fb['mean'], var_c['mean']))
    gains = lab_frame_gains(law.K, params.period, omega_m=params.omega_m)
    if variant == 'force_limited':
        if not (gains.beta_Q > gains.beta_X).all() or not (gains.beta_X > 0).all():
            log.info('beta_Q > beta_X > 0 does not hold everywhere for %s' %law)
    return {'var_c': var_c['mean'], 'var_c_range': var_c,
            'var_fb': var_fb,
            'db': squeezing_db(var_fb['mean'], convention),
            'avg_force': average_feedback(law.F, law.K, excess, units),
            'gains': gains,
            'excess_Q': time_average(excess, lambda m: m[Q,Q]/2)['mean'],
            'steady_cost': steady_cost(law.cost, sigma_c, excess, law.K),
            'sigma_c': sigma_c, 'excess': excess, 'law': law}
