#!/usr/bin/env python

"""
    mechsqueeze base module for feedback laws and the per point pipeline
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.
"""

from __future__ import absolute_import, print_function
import time, logging
import numpy as np
import pandas as pd
from .exceptions import NumericalError, ZeroCoupling
from .gaussian import Q, squeezing_db
from . import dynamics, optomech

log = logging.getLogger(__name__)

feedbacks = ['none','markov_ideal','markov_cavity','markov_mechanical','markov_force',
             'bayes_ideal','bayes_mechanical','bayes_force']
markov_variants = {'markov_ideal': 'ideal', 'markov_cavity': 'cavity_limited',
                   'markov_mechanical': 'mechanical_limited', 'markov_force': 'force_limited'}
bayes_variants = {'bayes_ideal': 'ideal', 'bayes_mechanical': 'mechanical_limited',
                  'bayes_force': 'force_limited'}
COLUMNS = ['feedback','g','kappa','lambda','chi','sweep_value','var_c','var_fb_mean',
           'var_fb_min','var_fb_max','db_c','db_fb','threshold','adiabatic','var_unc',
           'excess_Q','steady_cost','avg_force_dimensionless','avg_force_newton',
           'converged','status','runtime_s']


class FeedbackLaw(object):
    """
    Base class for feedback laws. A law holds the steady conditional
    covariance it was built on, a closed-loop drift A_tilde and the noise
    coefficient V of the conditional mean, dr = A_tilde r dt + V dw/sqrt(2).
    """

    kind = None

    def __init__(self, params, sigma_c=None, numerics=None, gain=None):
        self.params = params
        self.numerics = dynamics.with_dt(numerics, params.omega_m, params.kappa, gain)
        if sigma_c is None:
            sigma_c = optomech.conditional_steady_state(params, self.numerics)
        self.sigma_c = sigma_c
        self.problem = optomech.build_matrices(params)
        self.F = None
        self.M = None
        self.K = None
        self._excess = None
        return

    @classmethod
    def _get_name(cls):
        return cls.kind

    @property
    def name(self):
        return self.kind

    def __repr__(self):
        return '%s law, g=%s, kappa=%s, rwa=%s' %(self.name, self.params.g,
                    self.params.kappa, self.params.rwa)

    def excess(self):
        """Steady excess noise of the conditional mean, cached"""

        if self._excess is None:
            self._excess = dynamics.excess_noise(self.A_tilde, self.V, self.params.period,
                                                 self.numerics)
        return self._excess

    def covariance(self):
        """Unconditional covariance sigma_c + Sigma"""

        return dynamics.add_trajectories(self.sigma_c, self.excess())


class NoFeedback(FeedbackLaw):
    """Open loop, the excess noise is that of the bare measurement"""

    kind = 'none'

    def __init__(self, params, sigma_c=None, numerics=None):
        FeedbackLaw.__init__(self, params, sigma_c, numerics)
        self.A_tilde = self.problem.A
        self.V = optomech.innovation(params, self.sigma_c)
        return


def get_law_classes():
    """Feedback law classes keyed by kind"""

    from . import markov, bayes
    cl = {}
    for o in FeedbackLaw.__subclasses__():
        cl[o._get_name()] = o
    return cl

def get_feedback_law(name='none', params=None, lam=None, chi=None, **kwargs):
    """
    Get a feedback law object from its command line name, one of the
    values in feedbacks.
    """

    if params is None:
        params = optomech.SystemParams()
    cl = get_law_classes()
    if name == 'none':
        return cl['none'](params, **kwargs)
    elif name in markov_variants:
        return cl['markov'](params, markov_variants[name], lam, **kwargs)
    elif name in bayes_variants:
        from .bayes import CostSpec
        cost = CostSpec(chi=chi) if chi is not None else CostSpec()
        return cl['bayes'](params, cost, bayes_variants[name], **kwargs)
    raise ValueError('no such feedback %s, valid names are %s' %(name, ', '.join(feedbacks)))

def empty_row(feedback, params, lam=None, chi=None, sweep_value=None):
    row = dict((c, None) for c in COLUMNS)
    row.update({'feedback': feedback, 'g': params.g, 'kappa': params.kappa,
                'lambda': lam, 'chi': chi, 'sweep_value': sweep_value,
                'converged': False, 'status': 'ok'})
    return row

def run_point(params, feedback='none', lam=None, chi=None, sweep_value=None,
              numerics=None, convention='paper_absolute', units=None, timing=False):
    """
    Run the pipeline for one parameter point and return a result row.
    Numerical failures are recorded in the status column instead of being
    raised. Inapplicable columns are None.
    """

    st = time.time()
    row = empty_row(feedback, params, lam, chi, sweep_value)
    try:
        row['threshold'] = optomech.squeezing_threshold(params)['threshold']
        try:
            row['adiabatic'] = optomech.adiabatic_variance(params)
        except ZeroCoupling:
            row['adiabatic'] = optomech.thermal_variance(params)
        if feedback in markov_variants:
            from .markov import markov_report
            r = markov_report(params, markov_variants[feedback], lam, numerics,
                              convention=convention)
        elif feedback in bayes_variants:
            from .bayes import bayes_report, CostSpec
            cost = CostSpec(chi=chi) if chi is not None else CostSpec()
            r = bayes_report(params, cost, bayes_variants[feedback], numerics,
                             convention=convention, units=units)
            row['avg_force_dimensionless'] = r['avg_force']['dimensionless']
            row['avg_force_newton'] = r['avg_force']['force_newton']
            row['steady_cost'] = r['steady_cost']
        elif feedback == 'none':
            r = no_feedback_report(params, numerics, convention)
        else:
            raise ValueError('no such feedback %s' %feedback)
        row['var_c'] = r['var_c']
        row['var_fb_mean'] = r['var_fb']['mean']
        row['var_fb_min'] = r['var_fb']['min']
        row['var_fb_max'] = r['var_fb']['max']
        row['db_c'] = squeezing_db(r['var_c'], convention)
        row['db_fb'] = r['db']
        row['excess_Q'] = r['excess_Q']
        row['converged'] = bool(r['sigma_c'].converged and r['excess'].converged)
        row['var_unc'] = r['var_fb']['mean'] if feedback == 'none' else \
                         unconditional_variance(params, numerics)
    except NumericalError as e:
        log.warning('point g=%s kappa=%s failed: %s' %(params.g, params.kappa, e))
        row['status'] = '%s: %s' %(type(e).__name__, e)
        row['converged'] = False
    if timing == True:
        row['runtime_s'] = time.time() - st
    return row

def unconditional_variance(params, numerics=None):
    """Period averaged variance of Q without measurement, None if the solver
       fails"""

    try:
        unc = optomech.unconditional_steady_state(params, dynamics.with_dt(numerics,
                                                  params.omega_m, params.kappa))
    except NumericalError as e:
        log.warning('no unconditional state for g=%s kappa=%s: %s' %(params.g, params.kappa, e))
        return None
    return dynamics.time_average(unc, lambda m: m[Q,Q]/2)['mean']

def no_feedback_report(params, numerics=None, convention='paper_absolute'):
    """Conditional variance and the open loop unconditional variance"""

    law = NoFeedback(params, numerics=numerics)
    excess = law.excess()
    var_c = dynamics.time_average(law.sigma_c, lambda m: m[Q,Q]/2)
    var_fb = dynamics.time_average(law.covariance(), lambda m: m[Q,Q]/2)
    return {'var_c': var_c['mean'], 'var_c_range': var_c, 'var_fb': var_fb,
            'db': squeezing_db(var_fb['mean'], convention),
            'excess_Q': dynamics.time_average(excess, lambda m: m[Q,Q]/2)['mean'],
            'avg_force': None, 'sigma_c': law.sigma_c, 'excess': excess, 'law': law}

def results_table(rows):
    """Dataframe of result rows with the fixed column order"""

    df = pd.DataFrame(list(rows), columns=COLUMNS)
    return df
