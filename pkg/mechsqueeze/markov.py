#!/usr/bin/env python

"""
    Markovian (direct photocurrent) feedback
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.
"""

from __future__ import absolute_import, print_function
import logging
from dataclasses import dataclass
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from .exceptions import SingularF, ZeroCoupling, NumericalError
from .gaussian import Q, squeezing_db
from . import dynamics, optomech
from .base import FeedbackLaw
from .dynamics import Constant, coefficient, is_constant, time_average
from .utilities import loewner_leq

log = logging.getLogger(__name__)

variants = ['ideal', 'cavity_limited', 'mechanical_limited', 'force_limited']
SQRT2 = np.sqrt(2)
lambda_grid = np.round(np.arange(0, 1.5 + 1e-9, 0.05), 10)


@dataclass(frozen=True)
class XiCoefficients:
    """Weights of the feedback Hamiltonian (xi_m P + xi_f X) I_Y"""

    xi_m: float
    xi_f: float


def force_projector(omega_m, t):
    """W(t) = R diag(0,1) R^T, rank one projector on the lab frame force
       direction"""

    s, c = np.sin(omega_m*t), np.cos(omega_m*t)
    return np.array([[s*s, s*c], [s*c, c*c]])


class ForceDirection(object):
    """F(t) = scale * (0 + W(t)), periodic with period pi/omega_m"""

    is_constant = False

    def __init__(self, scale, omega_m=1.0):
        self.scale = scale
        self.omega_m = omega_m

    def __call__(self, t):
        F = np.zeros((4,4))
        F[2:,2:] = self.scale*force_projector(self.omega_m, t)
        return F

    def __repr__(self):
        return 'ForceDirection(scale=%s)' %self.scale


def direction_matrix(variant, omega_m=1.0, lam=None):
    """
    Feedback direction matrix F for a Markovian variant.
    Args:
        variant: one of ideal, cavity_limited, mechanical_limited, force_limited
        lam: force feedback parameter, F = 2 lam (0 + W(t))
    """

    if variant == 'ideal':
        return Constant(np.eye(4))
    elif variant == 'cavity_limited':
        return Constant(np.diag([1.0, 1.0, 0, 0]))
    elif variant == 'mechanical_limited':
        return Constant(np.diag([0, 0, 1.0, 1.0]))
    elif variant == 'force_limited':
        if lam is None:
            raise ValueError('force_limited feedback needs lambda')
        return ForceDirection(2*lam, omega_m)
    raise ValueError('unknown Markovian variant %s, use one of %s' %(variant, ', '.join(variants)))

def optimal_markov_gain(F, E, B, sigma_c):
    """
    Gain that cancels the noise of the conditional mean at steady state,
    M = -F^-1 (E - sigma_c B)/sqrt(2).
    """

    F = np.asarray(F, dtype=float)
    if np.linalg.matrix_rank(F) < F.shape[0]:
        raise SingularF('direction matrix F is not invertible')
    L = np.asarray(E) - np.asarray(sigma_c) @ np.asarray(B)
    return -np.linalg.solve(F, L)/SQRT2

def xi_coefficients(params):
    """Closed form feedback weights of P and X for the ideal RWA gain"""

    if params.g == 0:
        raise ZeroCoupling('feedback weights are undefined at g=0')
    g, kappa, gamma, eta = params.g, params.kappa, params.gamma, params.eta
    z = optomech.zeta(params)
    root = np.sqrt(kappa**2 + gamma**2 + 2*z)
    xi_m = (gamma**2 + z - gamma*root)/(4*g*np.sqrt(2*kappa*eta))
    xi_f = (kappa + gamma - root)/(2*np.sqrt(2*kappa*eta))
    return XiCoefficients(xi_m, xi_f)

def closed_loop(A, F, M, B, E, sigma_c):
    """
    Feedback modified drift and noise coefficient,
    At = A - sqrt(2) F M B^T and Z = (E - sigma_c B) + sqrt(2) F M.
    All arguments may be time dependent.
    Returns:
        dict with A_tilde and Z coefficient functions
    """

    A, F, M, sigma_c = [coefficient(i) for i in (A, F, M, sigma_c)]
    B = np.asarray(B, dtype=float)
    E = np.asarray(E, dtype=float)
    if is_constant(A, F, M, sigma_c):
        fm = SQRT2*F(0) @ M(0)
        return {'A_tilde': Constant(A(0) - fm @ B.T),
                'Z': Constant(E - sigma_c(0) @ B + fm)}
    def A_tilde(t):
        return A(t) - SQRT2*F(t) @ M(t) @ B.T
    def Z(t):
        return E - sigma_c(t) @ B + SQRT2*F(t) @ M(t)
    return {'A_tilde': A_tilde, 'Z': Z}

def excess_noise_markov(A_tilde, Z, period, numerics=None):
    """Steady or periodic excess noise of the conditional mean under
       Markovian feedback"""

    return dynamics.excess_noise(A_tilde, Z, period, numerics)


class MarkovLaw(FeedbackLaw):
    """Markovian feedback with the ideal gain composed with a direction
       matrix F"""

    kind = 'markov'

    def __init__(self, params, variant='ideal', lam=None, sigma_c=None, numerics=None):
        if variant not in variants:
            raise ValueError('unknown Markovian variant %s' %variant)
        if (variant == 'force_limited') != (lam is not None):
            raise ValueError('lambda is required for, and only for, force_limited feedback')
        self.variant = variant
        self.lam = lam
        FeedbackLaw.__init__(self, params, sigma_c, numerics)
        problem = self.problem
        sigma_c = self.sigma_c
        self.F = direction_matrix(variant, params.omega_m, lam)
        E, B = problem.E, problem.B
        if sigma_c.is_constant:
            self.M = Constant(optimal_markov_gain(np.eye(4), E, B, sigma_c(0)))
        else:
            self.M = lambda t: optimal_markov_gain(np.eye(4), E, B, sigma_c(t))
        cl = closed_loop(problem.A, self.F, self.M, B, E, sigma_c)
        self.A_tilde = cl['A_tilde']
        self.V = cl['Z']

    @property
    def name(self):
        if self.variant == 'force_limited':
            return 'markov_force(lambda=%s)' %self.lam
        return 'markov_%s' %self.variant.split('_')[0]

    def excess(self):
        if self._excess is None:
            self._excess = excess_noise_markov(self.A_tilde, self.V, self.params.period,
                                               self.numerics)
        return self._excess


def markov_report(params, variant='ideal', lam=None, numerics=None, sigma_c=None,
                  convention='paper_absolute', check_sandwich=False):
    """
    Conditional steady state, gain, excess noise and resulting variance of
    Q for one Markovian variant.
    Returns:
        dict with var_c, var_fb (mean/min/max), db, threshold, excess_Q and
        the trajectories used
    """

    law = MarkovLaw(params, variant, lam, sigma_c=sigma_c, numerics=numerics)
    sigma_c = law.sigma_c
    excess = law.excess()
    total = dynamics.add_trajectories(sigma_c, excess)
    var_c = time_average(sigma_c, lambda m: m[Q,Q]/2)
    var_fb = time_average(total, lambda m: m[Q,Q]/2)
    report = {'var_c': var_c['mean'], 'var_c_range': var_c,
              'var_fb': var_fb,
              'db': squeezing_db(var_fb['mean'], convention),
              'threshold': optomech.squeezing_threshold(params)['threshold'],
              'excess_Q': time_average(excess, lambda m: m[Q,Q]/2)['mean'],
              #white noise in the fed back current makes the average force infinite
              'avg_force': None,
              'sigma_c': sigma_c, 'excess': excess, 'law': law}
    if var_fb['mean'] < var_c['mean'] - 1e-9:
        log.warning('averaged variance below the conditional one (%s < %s)'
                    %(var_fb['mean'], var_c['mean']))
    if check_sandwich:
        ref = optomech.open_loop_excess(params, sigma_c, law.numerics)
        ok = all(loewner_leq(excess(t), ref(t)) for t in excess.grid)
        report['sandwich'] = ok
        if not ok:
            log.warning('excess noise not below the open loop one for %s' %law.name)
    return report

def _scan_point(params, lam, sigma_c, numerics):
    try:
        r = markov_report(params, 'force_limited', lam, numerics, sigma_c=sigma_c)
        v = r['var_fb']
        return {'lambda': lam, 'var_fb_mean': v['mean'], 'var_fb_min': v['min'],
                'var_fb_max': v['max'], 'status': 'ok'}
    except NumericalError as e:
        return {'lambda': lam, 'var_fb_mean': np.nan, 'var_fb_min': np.nan,
                'var_fb_max': np.nan, 'status': '%s: %s' %(type(e).__name__, e)}

def lambda_scan(params, lams=None, refine=True, numerics=None, threads=None):
    """
    Force limited Markovian variance as a function of lambda.
    The default grid covers [0, 1.5] in steps of 0.05 and is refined once
    around the best point with ten times finer steps.
    Returns:
        dataframe of the scan sorted by lambda, best lambda
    """

    numerics = dynamics.with_dt(numerics, params.omega_m, params.kappa)
    if threads is None:
        threads = numerics.threads
    sigma_c = optomech.conditional_steady_state(params, numerics)
    if lams is None:
        lams = lambda_grid
    lams = np.asarray(lams, dtype=float)

    def run(points):
        rows = Parallel(n_jobs=threads)(delayed(_scan_point)(params, l, sigma_c, numerics)
                                        for l in points)
        return pd.DataFrame(rows)

    df = run(lams)
    if df.var_fb_mean.isnull().all():
        raise NumericalError('lambda scan failed at every point')
    best = df.loc[df.var_fb_mean.idxmin(), 'lambda']
    if refine == True and len(lams) > 1:
        step = np.min(np.diff(np.sort(lams)))
        fine = np.linspace(best - step, best + step, 21)
        fine = fine[(fine >= 0) & ~np.isin(np.round(fine, 12), np.round(lams, 12))]
        if len(fine) > 0:
            df = pd.concat([df, run(fine)], ignore_index=True)
            best = df.loc[df.var_fb_mean.idxmin(), 'lambda']
    df = df.sort_values('lambda').reset_index(drop=True)
    log.info('lambda scan g=%s kappa=%s: best lambda %.4f' %(params.g, params.kappa, best))
    return df, float(best)
