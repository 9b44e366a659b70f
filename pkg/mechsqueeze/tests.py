#!/usr/bin/env python

"""
    mechsqueeze unit tests
    Created October 2026
"""

from __future__ import absolute_import, print_function
import os, json, shutil, tempfile
import unittest
from unittest import mock
import numpy as np
import pandas as pd
from . import gaussian, dynamics, optomech, markov, bayes, trajectories, base, config, app
from .exceptions import *
from .gaussian import X, Y, Q, P
from .optomech import SystemParams
from .utilities import frobenius, grid, spectral_abscissa, is_psd

#acceptance scale checks take minutes to hours
SLOW = os.environ.get('MECHSQUEEZE_SLOW') == '1'
kappas = [1e-2, 1e-1, 1.0, 10.0, 1e2]
couplings = [0.01, 0.05, 0.3]


class GaussianTests(unittest.TestCase):
    """Tests for the covariance conventions"""

    def test_symplectic_form(self):

        omega = gaussian.symplectic_form(2).matrix
        expected = np.array([[0,1,0,0],[-1,0,0,0],[0,0,0,1],[0,0,-1,0]])
        np.testing.assert_array_equal(omega, expected)
        self.assertRaises(ValueError, gaussian.symplectic_form, 0)
        return

    def test_physicality(self):

        vac = gaussian.GaussianState.vacuum()
        self.assertTrue(gaussian.check_physicality(vac)['physical'])
        th = gaussian.GaussianState.thermal(10)
        self.assertEqual(gaussian.variance_Q(th), 10.5)
        self.assertFalse(gaussian.check_physicality(0.5*np.eye(4))['physical'])
        #squeezed but pure: var_Q var_P = 1/4
        sq = np.diag([1, 1, 0.1, 10.0])
        rep = gaussian.check_physicality(sq)
        self.assertTrue(rep['physical'])
        self.assertAlmostEqual(rep['min_eigenvalue'], 0, places=9)
        return

    def test_nonsymmetric(self):

        m = np.eye(4)
        m[0,1] = 0.5
        self.assertRaises(NonSymmetric, gaussian.GaussianState, None, m)
        self.assertRaises(NonSymmetric, gaussian.check_physicality, m)
        return

    def test_squeezing_db(self):

        self.assertAlmostEqual(gaussian.squeezing_db(0.5), 3.0103, places=4)
        self.assertAlmostEqual(gaussian.squeezing_db(0.5, 'relative_to_vacuum'), 0.0)
        self.assertAlmostEqual(gaussian.squeezing_db(0.25, 'vacuum'), 3.0103, places=4)
        self.assertIsInstance(gaussian.squeezing_db(0.1), float)
        self.assertRaises(NonPositiveVariance, gaussian.squeezing_db, 0.0)
        self.assertRaises(ValueError, gaussian.squeezing_db, 0.5, 'bogus')
        return

    def test_unconditional_covariance(self):

        s = gaussian.unconditional_covariance(np.eye(4), 2*np.eye(4))
        np.testing.assert_array_equal(s, 3*np.eye(4))
        return


class DynamicsTests(unittest.TestCase):
    """Tests for the matrix flow solvers"""

    def test_steady_lyapunov(self):

        X = dynamics.steady_state_lyapunov(-np.eye(3), 2*np.eye(3))
        np.testing.assert_allclose(X, np.eye(3), atol=1e-12)
        return

    def test_hurwitz(self):

        self.assertRaises(NotHurwitz, dynamics.check_hurwitz, np.diag([1.0, -1.0]))
        a = dynamics.check_hurwitz(np.diag([-1.0, -2.0]))
        self.assertAlmostEqual(a, -1.0)
        A = lambda t: -np.eye(2) + 0.5*np.cos(2*t)*np.array([[0, 1], [1, 0]])
        mu = dynamics.check_hurwitz(A, period=np.pi, dt=0.01)
        self.assertLess(mu, 0)
        A = lambda t: 0.1*np.eye(2) + np.sin(2*t)*np.eye(2)
        self.assertRaises(NotHurwitz, dynamics.check_hurwitz, A, np.pi, 0.01)
        return

    def test_monodromy(self):

        A = np.array([[-1.0, 2.0], [0, -0.5]])
        phi = dynamics.monodromy(A, 1.0, 0.01)
        periodic = dynamics.monodromy(lambda t: A, 1.0, 0.01)
        np.testing.assert_allclose(periodic, phi, rtol=1e-7, atol=1e-9)
        return

    def test_integrate_lyapunov(self):

        problem = dynamics.MatrixFlowProblem(-np.eye(4), 2*np.eye(4), kind='lyapunov')
        traj = dynamics.integrate_lyapunov(problem, np.zeros((4,4)), 20.0, 0.01, stride=100)
        np.testing.assert_allclose(traj.final, np.eye(4), atol=1e-9)
        self.assertAlmostEqual(traj.times[-1], 20.0)
        s = traj.entry(0, 0)
        self.assertIsInstance(s, pd.Series)
        return

    def test_integrate_conditional_riccati(self):

        params = SystemParams(g=0.2, kappa=1.0, gamma=0.1, nbar=2)
        problem = optomech.build_matrices(params)
        sigma0 = gaussian.GaussianState.thermal(params.nbar).cov
        traj = dynamics.integrate_conditional_riccati(problem, sigma0, 200.0, 0.01, stride=1000)
        steady = dynamics.steady_state_conditional(problem)
        np.testing.assert_allclose(traj.final, steady, atol=1e-6)
        return

    def test_bad_diffusion(self):

        self.assertRaises(ValueError, dynamics.MatrixFlowProblem, -np.eye(2),
                          np.diag([1.0, -1.0]))
        return

    def test_periodic_steady_state(self):

        A1 = lambda t: -(1 + 0.5*np.cos(2*t))*np.eye(2)
        res = {}
        for m in dynamics.methods:
            flow = dynamics.RiccatiFlow(A1, 2*np.eye(2), None, period=np.pi, dt=0.01)
            res[m] = dynamics.periodic_steady_state(flow, method=m, tol_period=1e-10)
            self.assertTrue(res[m].converged)
        t = res['shooting']
        self.assertLess(frobenius(t.values[-1], t.values[0]), 1e-8)
        np.testing.assert_allclose(res['shooting'].values, res['iterate'].values, atol=1e-8)
        np.testing.assert_allclose(t(0.3 + np.pi), t(0.3), atol=1e-12)
        flow = dynamics.RiccatiFlow(A1, 2*np.eye(2), None, period=np.pi, dt=0.01)
        self.assertRaises(ValueError, dynamics.periodic_steady_state, flow, method='newton')
        return

    def test_lyapunov_random_hurwitz(self):
        """Algebraic Lyapunov solution is the end point of the integration"""

        rng = np.random.default_rng(11)
        M = rng.standard_normal((4,4))
        A = M - (spectral_abscissa(M)[0] + 0.5)*np.eye(4)
        G = rng.standard_normal((4,2))
        X = dynamics.steady_state_lyapunov(A, G @ G.T)
        problem = dynamics.MatrixFlowProblem(A, G @ G.T, kind='lyapunov')
        traj = dynamics.integrate_lyapunov(problem, np.zeros((4,4)), 60.0, 0.005, stride=1000)
        np.testing.assert_allclose(traj.final, X, rtol=1e-8, atol=1e-10*np.abs(X).max())
        return

    def test_guess_not_psd(self):

        flow = dynamics.RiccatiFlow(np.array([[-1.0]]), np.array([[-0.5]]),
                                    np.array([[1.0]]), period=1.0)
        np.testing.assert_array_equal(flow.initial_guess(), np.zeros((1,1)))
        return

    def test_non_contracting_start(self):
        """Plain periods carry a Riccati flow out of a region where its
           linearization grows"""

        flow = dynamics.RiccatiFlow(np.array([[1.0]]), np.array([[1.0]]),
                                    np.array([[1.0]]), period=0.1, dt=0.01)
        traj = dynamics.periodic_steady_state(flow, X0=np.array([[0.1]]), tol_period=1e-10)
        self.assertTrue(traj.converged)
        self.assertAlmostEqual(traj(0)[0,0], 1 + np.sqrt(2), places=8)
        lyap = dynamics.RiccatiFlow(np.array([[0.1]]), np.array([[1.0]]), None,
                                    period=0.1, dt=0.01)
        self.assertRaises(NoConvergence, dynamics.periodic_steady_state, lyap,
                          X0=np.array([[0.0]]))
        return

    def test_grid_refinement(self):
        """Periodic steady state converges at fourth order in the step"""

        A1 = lambda t: np.array([[-0.5 + 0.3*np.cos(2*t), 1.0],
                                 [-1.0, -0.2 + 0.3*np.sin(2*t)]])
        X = []
        for n in [32, 64, 128]:
            flow = dynamics.RiccatiFlow(A1, np.eye(2), np.diag([1.0, 0]), period=np.pi,
                                        dt=np.pi/n)
            traj = dynamics.periodic_steady_state(flow, tol_period=1e-12, max_periods=500)
            self.assertTrue(traj.converged)
            self.assertEqual(len(traj), n+1)
            X.append(traj.values[0])
        e1 = frobenius(X[0], X[1])
        e2 = frobenius(X[1], X[2])
        self.assertLess(e2, e1)
        self.assertGreater(e1/e2, 8)
        return

    def test_time_average(self):

        tr = dynamics.PeriodicTrajectory(np.pi, [0, np.pi/2, np.pi], np.ones((3,2,2)),
                                         converged=False)
        self.assertRaises(NotConverged, dynamics.time_average, tr)
        c = dynamics.PeriodicTrajectory.constant(np.eye(2))
        avg = dynamics.time_average(c, lambda m: m[0,0])
        self.assertEqual(avg, {'mean': 1.0, 'min': 1.0, 'max': 1.0})
        return

    def test_excess_noise_zero_source(self):

        S = dynamics.excess_noise(-np.eye(4), np.zeros((4,4)), np.pi)
        self.assertTrue(S.is_constant)
        np.testing.assert_allclose(S(0), np.zeros((4,4)), atol=1e-15)
        return


class OptomechTests(unittest.TestCase):
    """Tests for the optomechanical model"""

    def setUp(self):
        self.params = SystemParams()
        return

    def test_params_validation(self):

        with self.assertRaises(ValidationError) as cm:
            SystemParams(kappa=-1, eta=2)
        self.assertEqual(len(cm.exception.violations), 2)
        p = self.params
        self.assertAlmostEqual(p.cooperativity, 4*0.05**2/1e-4)
        self.assertAlmostEqual(p.q_factor, 1e4)
        return

    def test_derived_scales(self):

        s = optomech.derived_scales(self.params)
        self.assertAlmostEqual(s.zeta, 9.1657e-3, places=7)
        self.assertEqual(s.cooperativity, self.params.cooperativity)
        self.assertEqual(s.q_factor, self.params.q_factor)
        gk = self.params.gamma*self.params.kappa
        self.assertAlmostEqual(optomech.derived_scales(self.params.replace(g=0)).zeta, gk, places=15)
        for g in couplings:
            self.assertGreater(optomech.derived_scales(self.params.replace(g=g)).zeta, gk)
        return

    def test_matrices(self):

        g = 0.05
        rwa = optomech.build_matrices(self.params)
        self.assertTrue(rwa.is_constant)
        full = optomech.build_matrices(self.params.replace(rwa=False))
        self.assertFalse(full.is_constant)
        self.assertAlmostEqual(full.A(0)[Y,Q], 2*g)
        self.assertAlmostEqual(full.A(np.pi/4)[Y,P], g)
        self.assertAlmostEqual(full.A(np.pi/4)[Q,X], -g)
        np.testing.assert_allclose(full.A(0.7), full.A(0.7 + np.pi), atol=1e-12)
        self.assertEqual(full.period, np.pi)
        self.assertEqual(rwa.B[Y,Y], np.sqrt(self.params.kappa))
        return

    def test_conditional_closed_form(self):
        """Riccati steady state against the closed form variance"""

        for g in couplings:
            for k in kappas:
                p = self.params.replace(g=g, kappa=k)
                sigma = optomech.conditional_steady_state(p)
                v = sigma(0)[Q,Q]/2
                ref = optomech.conditional_variance_analytic(p)
                self.assertLess(abs(v - ref)/ref, 1e-6, msg='g=%s kappa=%s' %(g, k))
                self.assertTrue(gaussian.check_physicality(sigma(0))['physical'])
        return

    def test_zero_coupling(self):

        p = self.params.replace(g=0)
        self.assertRaises(ZeroCoupling, optomech.conditional_variance_analytic, p)
        self.assertRaises(ZeroCoupling, optomech.adiabatic_variance, p)
        sigma = optomech.conditional_steady_state(p)
        self.assertAlmostEqual(sigma(0)[Q,Q]/2, optomech.thermal_variance(p), places=8)
        return

    def test_adiabatic_limit(self):

        p = self.params.replace(g=0.01, kappa=100.0)
        v = optomech.conditional_variance_analytic(p)
        self.assertLess(abs(v - optomech.adiabatic_variance(p))/v, 0.05)
        return

    def test_threshold(self):

        t = optomech.squeezing_threshold(self.params)
        self.assertAlmostEqual(t['threshold'], 1e-4*21/(1e-4 + 1.0))
        self.assertAlmostEqual(t['excluded_kappa_bound'], 2e-3)
        return

    def test_unconditional(self):
        """Conditional covariance plus open loop excess is the unconditional one"""

        p = self.params.replace(g=0.3, kappa=0.5)
        unc = optomech.unconditional_steady_state(p)
        self.assertAlmostEqual(unc(0)[Q,Q]/2, 10.5, places=8)
        sigma = optomech.conditional_steady_state(p)
        excess = optomech.open_loop_excess(p, sigma)
        np.testing.assert_allclose(sigma(0) + excess(0), unc(0), rtol=1e-7, atol=1e-9)
        return

    def test_optimal_kappa(self):

        for g in couplings:
            p = self.params.replace(g=g)
            k = optomech.optimal_kappa(p)
            best = optomech.conditional_variance_analytic(p.replace(kappa=k))
            ks = grid(1e-3, 1e2, 60, log=True)
            vals = [optomech.conditional_variance_analytic(p.replace(kappa=i)) for i in ks]
            self.assertLessEqual(best, min(vals) + 1e-15)
            self.assertTrue(1e-3 <= k <= 1e2)
        return

    def test_full_model_rwa_limit(self):
        """Full model conditional state is periodic and close to the RWA one
           at weak coupling"""

        p = self.params.replace(g=1e-3, rwa=False)
        n = dynamics.Numerics(tol_period=1e-10)
        sigma = optomech.conditional_steady_state(p, n)
        self.assertTrue(sigma.converged)
        self.assertLess(frobenius(sigma.values[-1], sigma.values[0]), 1e-8)
        avg = dynamics.time_average(sigma, lambda m: m[Q,Q]/2)['mean']
        ref = optomech.conditional_variance_analytic(p)
        self.assertLess(abs(avg - ref)/ref, 0.01)
        return

    def test_seed_covariance(self):

        p = self.params.replace(rwa=False)
        seed = optomech.seed_covariance(p)
        rwa = optomech.conditional_steady_state(self.params)(0)
        np.testing.assert_allclose(seed, rwa)
        self.assertTrue(gaussian.check_physicality(seed)['physical'])
        self.assertGreater(seed[P,P], 1)
        return

    def _check_full_model(self, p):
        sigma = optomech.conditional_steady_state(p)
        msg = 'g=%s kappa=%s' %(p.g, p.kappa)
        self.assertTrue(sigma.converged, msg=msg)
        self.assertLess(frobenius(sigma.values[-1], sigma.values[0]),
                        1e-6*max(1, frobenius(sigma.values[0])), msg=msg)
        for m in sigma.values[::10]:
            self.assertTrue(gaussian.check_physicality(m)['physical'], msg=msg)
        v = dynamics.time_average(sigma, lambda m: m[Q,Q]/2)['mean']
        self.assertLess(v, optomech.thermal_variance(p), msg=msg)
        return v

    def test_full_model_point(self):
        """Full model at a point where the averaged starting guess is
           unphysical"""

        self._check_full_model(self.params.replace(g=0.05, kappa=1.0, rwa=False))
        return

    @unittest.skipUnless(SLOW, 'set MECHSQUEEZE_SLOW=1')
    def test_full_model_kappa_grid(self):

        for g in couplings:
            for k in grid(0.03, 30, 13, log=True):
                self._check_full_model(self.params.replace(g=g, kappa=k, rwa=False))
        return


class MarkovTests(unittest.TestCase):
    """Tests for Markovian feedback"""

    def setUp(self):
        self.params = SystemParams()
        return

    def test_ideal_cancels_noise(self):

        for k in kappas:
            p = self.params.replace(kappa=k)
            law = markov.MarkovLaw(p, 'ideal')
            self.assertLess(frobenius(law.excess()(0)), 1e-8)
            np.testing.assert_allclose(law.V(0), np.zeros((4,4)), atol=1e-12)
        return

    def test_ideal_full_model(self):

        p = self.params.replace(rwa=False)
        r = markov.markov_report(p, 'ideal')
        self.assertLess(np.abs(r['excess'].values).max(), 1e-8)
        self.assertAlmostEqual(r['var_fb']['mean'], r['var_c'], places=8)
        return

    def test_direction_matrix(self):

        self.assertRaises(ValueError, markov.direction_matrix, 'force_limited')
        self.assertRaises(ValueError, markov.direction_matrix, 'bogus')
        F = markov.direction_matrix('force_limited', lam=0.5)
        t = 0.3
        W = F(t)[2:,2:]
        np.testing.assert_allclose(W @ W, W, atol=1e-12)
        np.testing.assert_allclose(F(t), F(t + np.pi), atol=1e-12)
        self.assertRaises(ValueError, markov.MarkovLaw, self.params, 'ideal', 0.5)
        return

    def test_singular_gain(self):

        B = optomech.measurement(self.params)
        self.assertRaises(SingularF, markov.optimal_markov_gain, np.diag([1, 1, 0, 0.0]),
                          B, B, np.eye(4))
        return

    def test_bad_cavity(self):
        """Mechanical-limited feedback reaches the conditional variance when
           the cavity is fast"""

        p = self.params.replace(g=0.01, kappa=100.0)
        r = markov.markov_report(p, 'mechanical_limited')
        vfb, vc = r['var_fb']['mean'], r['var_c']
        self.assertLess(abs(vfb - vc)/vc, 1e-2)
        ad = optomech.adiabatic_variance(p)
        self.assertLess(abs(vfb - ad)/ad, 0.05)
        self.assertLess(abs(vc - ad)/ad, 0.05)
        return

    def test_excluded_region(self):

        for g in couplings:
            p = self.params.replace(g=g, kappa=1e-3)
            r = markov.markov_report(p, 'mechanical_limited')
            self.assertGreaterEqual(r['var_fb']['mean'], 0.5)
            self.assertGreaterEqual(r['var_fb']['mean'], r['var_c'] - 1e-9)
        return

    def test_cavity_limited(self):
        """Feedback on the cavity alone leaves the mechanics thermal"""

        for g in couplings:
            for k in grid(1e-3, 1e2, 12, log=True):
                p = self.params.replace(g=g, kappa=k)
                r = markov.markov_report(p, 'cavity_limited')
                self.assertGreaterEqual(r['var_fb']['mean'], 0.5)
                self.assertLess(abs(r['var_fb']['mean'] - 10.5)/10.5, 1e-6)
        return

    def test_sandwich(self):

        r = markov.markov_report(self.params, 'ideal', check_sandwich=True)
        self.assertTrue(r['sandwich'])
        self.assertIsNone(r['avg_force'])
        return

    def test_xi_coefficients(self):

        xi = markov.xi_coefficients(self.params)
        self.assertGreater(xi.xi_m, 0)
        self.assertLess(xi.xi_f, 0)
        self.assertRaises(ZeroCoupling, markov.xi_coefficients, self.params.replace(g=0))
        return

    def test_xi_from_gain(self):
        """The optimal RWA gain carries the closed form feedback weights"""

        M = markov.MarkovLaw(self.params, 'ideal').M(0)
        xi = markov.xi_coefficients(self.params)
        self.assertLess(abs(M[Q,Y] - xi.xi_m), 1e-10)
        self.assertLess(abs(M[Y,Y] + xi.xi_f), 1e-10)
        for g in couplings:
            for k in kappas:
                p = self.params.replace(g=g, kappa=k)
                M = markov.MarkovLaw(p, 'ideal').M(0)
                xi = markov.xi_coefficients(p)
                np.testing.assert_allclose([M[Q,Y], -M[Y,Y]], [xi.xi_m, xi.xi_f], rtol=1e-6)
        return

    def test_invariants(self):
        """Covariances stay physical and feedback never beats the
           conditional variance"""

        reports = []
        for g in couplings:
            for k in [1e-2, 1.0, 1e2]:
                p = self.params.replace(g=g, kappa=k)
                for v in ['ideal', 'cavity_limited', 'mechanical_limited']:
                    reports.append(markov.markov_report(p, v))
                for v in ['ideal', 'mechanical_limited']:
                    reports.append(bayes.bayes_report(p, variant=v))
        reports.append(markov.markov_report(self.params, 'force_limited', 0.5))
        for r in reports:
            name = r['law'].name
            total = dynamics.add_trajectories(r['sigma_c'], r['excess'])
            for m in total.values:
                self.assertTrue(gaussian.check_physicality(m)['physical'], msg=name)
            for m in r['excess'].values:
                self.assertTrue(is_psd(m), msg=name)
            self.assertGreaterEqual(r['var_fb']['mean'], r['var_c'] - 1e-9, msg=name)
        return

    def test_lambda_continuity(self):
        """Under the RWA the force feedback variance is a parabola in lambda"""

        lams = np.linspace(0, 1.5, 7)
        df, best = markov.lambda_scan(self.params, lams=lams, refine=False, threads=1)
        v = df.var_fb_mean.values
        fit = np.polyval(np.polyfit(lams, v, 2), lams)
        self.assertLess(np.abs(fit - v).max(), 1e-6*max(1, np.abs(v).max()))
        return

    def test_lambda_scan(self):

        df, best = markov.lambda_scan(self.params, lams=[0.25, 0.5, 0.75], refine=False,
                                      threads=1)
        self.assertEqual(list(df['lambda']), [0.25, 0.5, 0.75])
        self.assertIn(best, [0.25, 0.5, 0.75])
        self.assertTrue((df.status == 'ok').all())
        self.assertTrue((df.var_fb_min <= df.var_fb_mean + 1e-12).all())
        self.assertTrue((df.var_fb_mean <= df.var_fb_max + 1e-12).all())
        return

    @unittest.skipUnless(SLOW, 'set MECHSQUEEZE_SLOW=1')
    def test_lambda_interior_optimum(self):

        p = self.params.replace(g=0.3, rwa=False)
        p = p.replace(kappa=optomech.optimal_kappa(p))
        df, best = markov.lambda_scan(p)
        print (df)
        self.assertGreater(best, 0.05)
        self.assertGreater(abs(best - 0.5), 0.05)
        self.assertGreater(abs(best - 1.0), 0.05)
        return


class BayesTests(unittest.TestCase):
    """Tests for LQG feedback"""

    def setUp(self):
        self.params = SystemParams()
        self.chis = [1e-3, 1e-1, 10.0]
        return

    def test_cost_validation(self):

        self.assertRaises(ValidationError, bayes.CostSpec, chi=0)
        S = np.zeros((4,4))
        S[0,1] = 1
        self.assertRaises(ValidationError, bayes.CostSpec, S=S)
        self.assertRaises(SingularXi, bayes.lqg_gain, np.eye(4), np.eye(4), np.zeros((4,4)))
        return

    def test_gain_closed_form(self):

        for chi in self.chis:
            law = bayes.BayesLaw(self.params, bayes.CostSpec(chi=chi))
            K = np.array(law.K(0))
            beta = bayes.bayes_gain_analytic_rwa(self.params.gamma, chi)
            self.assertLess(abs(K[Q,Q] - beta)/beta, 1e-8)
            K[Q,Q] = 0
            self.assertLess(np.abs(K).max(), 1e-8*beta)
        return

    def test_excess_closed_form(self):

        for chi in self.chis:
            for k in [0.1, 1.0, 10.0]:
                p = self.params.replace(kappa=k)
                law = bayes.BayesLaw(p, bayes.CostSpec(chi=chi))
                S = law.excess()(0)
                ref = bayes.excess_noise_analytic_rwa(p, chi)
                self.assertLess(abs(S[Q,Q] - ref)/ref, 1e-7)
        self.assertRaises(ZeroCoupling, bayes.excess_noise_analytic_rwa,
                          self.params.replace(g=0), 0.1)
        return

    def test_excess_monotone_in_chi(self):

        vals = []
        for chi in np.logspace(-4, 2, 9):
            law = bayes.BayesLaw(self.params, bayes.CostSpec(chi=chi))
            vals.append(law.excess()(0)[Q,Q])
        vals = np.array(vals)
        self.assertTrue((np.diff(vals) >= -1e-12*vals[1:]).all(), msg=str(vals))
        self.assertGreater(vals[-1], vals[0])
        return

    def test_zero_cost_limit(self):

        r = bayes.bayes_report(self.params, bayes.CostSpec(chi=1e-6))
        vc = r['var_c']
        self.assertLess(r['var_fb']['mean'] - vc, 1e-4*vc)
        return

    def test_report_quantities(self):

        chi = 0.1
        cost = bayes.CostSpec(chi=chi)
        r = bayes.bayes_report(self.params, cost)
        law = r['law']
        S = r['excess'](0)
        sigma = r['sigma_c'](0)
        beta = law.K(0)[Q,Q]
        self.assertAlmostEqual(r['avg_force']['dimensionless'], beta**2*S[Q,Q], places=12)
        u = bayes.Units()
        self.assertAlmostEqual(r['avg_force']['force_newton'],
                               u.hbar_over_xzpf*beta*np.sqrt(S[Q,Q])*u.omega_m_si, places=25)
        h = 0.5*(sigma[Q,Q] + S[Q,Q]) + 0.5*chi*beta**2*S[Q,Q]
        self.assertAlmostEqual(r['steady_cost'], h, places=10)
        self.assertAlmostEqual(r['excess_Q'], S[Q,Q]/2)
        gains = r['gains']
        self.assertEqual(list(gains.columns), ['t', 'beta_Q', 'beta_X'])
        self.assertAlmostEqual(np.abs(gains.beta_X).max(), 0.0, places=10)
        self.assertLessEqual(gains.beta_Q.max(), beta + 1e-12)
        return

    def test_mechanical_limited(self):

        ideal = bayes.bayes_report(self.params, variant='ideal')
        mech = bayes.bayes_report(self.params, variant='mechanical_limited')
        self.assertAlmostEqual(mech['var_fb']['mean'], ideal['var_fb']['mean'], places=10)
        return

    @unittest.skipUnless(SLOW, 'set MECHSQUEEZE_SLOW=1')
    def test_force_limited_full_model(self):
        """Force limited feedback with counter-rotating terms adds little noise
           to the conditional state and keeps the RWA squeezing where the
           sidebands are resolved"""

        db = gaussian.squeezing_db
        for k in grid(0.03, 30, 7, log=True):
            p = self.params.replace(kappa=k, rwa=False)
            r = bayes.bayes_report(p, bayes.CostSpec(chi=0.1), 'force_limited')
            msg = 'kappa=%s' %k
            vfb = r['var_fb']['mean']
            self.assertLess(db(r['var_c']) - db(vfb), 0.5, msg=msg)
            rwa = db(optomech.conditional_variance_analytic(p))
            self.assertGreater(db(vfb) - rwa, -0.5, msg=msg)
            if k <= 10:
                self.assertLess(abs(db(vfb) - rwa), 0.5, msg=msg)
            self.assertLessEqual(r['var_fb']['min'], vfb)
            self.assertGreater(r['avg_force']['force_newton'], 0)
        return


class TrajectoryTests(unittest.TestCase):
    """Tests for the Monte-Carlo ensembles"""

    def setUp(self):
        self.params = SystemParams(g=0.05, kappa=1.0, gamma=0.05, nbar=1)
        return

    def test_ensemble_settings(self):

        self.assertRaises(ValueError, trajectories.EnsembleSpec, n_traj=0)
        self.assertRaises(ValueError, trajectories.EnsembleSpec, dt_sde=-1)
        self.assertRaises(ValueError, trajectories.EnsembleSpec, t_end=10, burn_in=20)
        s = trajectories.EnsembleSpec.from_numerics(self.params, dynamics.Numerics(dt_sde=0.02))
        self.assertEqual(s.burn_in, 200.0)
        self.assertEqual(s.t_end, 400.0)
        return

    def test_rng_streams(self):

        a = trajectories.trajectory_rng(7, 3).standard_normal(5)
        b = trajectories.trajectory_rng(7, 3).standard_normal(5)
        c = trajectories.trajectory_rng(7, 4).standard_normal(5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.allclose(a, c))
        return

    def test_reproducible_paths(self):

        law = base.NoFeedback(self.params)
        spec = trajectories.EnsembleSpec(dt_sde=0.01, t_end=5.0, burn_in=0.0)
        t1, p1 = trajectories.simulate_trajectory(law.A_tilde, law.V, spec, 2)
        t2, p2 = trajectories.simulate_trajectory(law.A_tilde, law.V, spec, 2)
        np.testing.assert_array_equal(p1, p2)
        self.assertEqual(p1.shape, (501, 4))
        return

    def test_raw_current(self):
        """Feeding back the simulated current gives the same path as the
           closed-loop equation"""

        law = markov.MarkovLaw(self.params, 'mechanical_limited')
        spec = trajectories.EnsembleSpec(dt_sde=0.01, t_end=5.0, burn_in=0.0)
        t1, p1 = trajectories.simulate_trajectory(law.A_tilde, law.V, spec, 0)
        raw = trajectories._raw_pieces(law)
        t2, p2 = trajectories.simulate_trajectory(law.A_tilde, law.V, spec, 0, raw=raw)
        np.testing.assert_allclose(p2, p1, rtol=1e-8, atol=1e-10)
        self.assertRaises(ValueError, trajectories._raw_pieces, base.NoFeedback(self.params))
        return

    def test_insufficient(self):

        law = base.NoFeedback(self.params)
        spec = trajectories.EnsembleSpec(n_traj=1, t_end=10.0, burn_in=1.0)
        self.assertRaises(InsufficientEnsemble, trajectories.ensemble_excess_noise,
                          law, self.params, spec)
        return

    def test_validate(self):

        est = trajectories.EnsembleEstimate(np.eye(4), 0.1*np.ones((4,4)))
        res = trajectories.validate_against_reference(est, np.eye(4))
        self.assertTrue(res['pass'])
        res = trajectories.validate_against_reference(est, np.eye(4) + 1)
        self.assertFalse(res['pass'])
        self.assertAlmostEqual(res['worst_z'], 10.0)
        est = trajectories.EnsembleEstimate(np.zeros((4,4)), np.zeros((4,4)))
        self.assertTrue(trajectories.validate_against_reference(est, np.zeros((4,4)))['pass'])
        ref = np.zeros((4,4))
        ref[Q,Q] = 1e-3
        self.assertFalse(trajectories.validate_against_reference(est, ref)['pass'])
        self.assertRaises(ValueError, trajectories.validate_against_reference, est, np.eye(2))
        return

    def test_ensemble_no_feedback(self):

        law = base.NoFeedback(self.params)
        spec = trajectories.EnsembleSpec(n_traj=200, dt_sde=0.02, t_end=300.0,
                                         burn_in=100.0, n_batches=10, base_seed=2024)
        est = trajectories.ensemble_excess_noise(law, self.params, spec, threads=1)
        res = trajectories.validate_against_reference(est, law.excess(), z_max=6.0)
        print (est.table())
        self.assertTrue(res['pass'])
        self.assertEqual(len(est.batch_estimates), 10)
        bad = app.mismatched_reference(law.excess().mean(), est)
        self.assertFalse(trajectories.validate_against_reference(est, bad)['pass'])
        return

    def test_ensemble_deterministic(self):

        law = base.NoFeedback(self.params)
        spec = trajectories.EnsembleSpec(n_traj=20, dt_sde=0.05, t_end=20.0, burn_in=5.0,
                                         n_batches=4, base_seed=99)
        a = trajectories.ensemble_excess_noise(law, self.params, spec, threads=1)
        b = trajectories.ensemble_excess_noise(law, self.params, spec, threads=1)
        np.testing.assert_array_equal(a.sigma_hat, b.sigma_hat)
        np.testing.assert_array_equal(a.stderr, b.stderr)
        spec = trajectories.EnsembleSpec(n_traj=20, dt_sde=0.05, t_end=20.0, burn_in=5.0,
                                         n_batches=4, base_seed=100)
        c = trajectories.ensemble_excess_noise(law, self.params, spec, threads=1)
        self.assertFalse(np.allclose(a.sigma_hat, c.sigma_hat))
        return

    def _z(self, a, b, floor=1e-12):
        #unmeasured quadratures keep a zero mean and no spread
        diff = np.abs(a.sigma_hat - b.sigma_hat)
        se = np.sqrt(a.stderr**2 + b.stderr**2)
        z = np.where(diff > floor, np.inf, 0.0)
        mask = se > floor
        z[mask] = diff[mask]/se[mask]
        return z

    def test_burn_in_doubling(self):
        """Estimates are stationary once the burn in has passed"""

        law = base.NoFeedback(self.params)
        est = []
        for burn in [50.0, 100.0]:
            spec = trajectories.EnsembleSpec(n_traj=200, dt_sde=0.02, t_end=400.0,
                                             burn_in=burn, n_batches=10, base_seed=7)
            est.append(trajectories.ensemble_excess_noise(law, self.params, spec))
        z = self._z(*est)
        self.assertLess(z.max(), 2, msg=str(z))
        return

    def test_dt_sde_halving(self):

        law = base.NoFeedback(self.params)
        est = []
        for dt in [0.02, 0.01]:
            spec = trajectories.EnsembleSpec(n_traj=200, dt_sde=dt, t_end=250.0,
                                             burn_in=50.0, n_batches=20, base_seed=7)
            est.append(trajectories.ensemble_excess_noise(law, self.params, spec))
        z = self._z(*est)
        self.assertLess(max(z[Q,Q], z[Y,Y]), 3, msg=str(z))
        return

    def test_ensemble_markov_ideal(self):

        law = markov.MarkovLaw(self.params, 'ideal')
        spec = trajectories.EnsembleSpec(n_traj=20, dt_sde=0.05, t_end=20.0,
                                         burn_in=5.0, n_batches=4)
        est = trajectories.ensemble_excess_noise(law, self.params, spec)
        self.assertLess(np.abs(est.sigma_hat).max(), 1e-12)
        self.assertTrue(trajectories.validate_against_reference(est, law.excess())['pass'])
        return

    @unittest.skipUnless(SLOW, 'set MECHSQUEEZE_SLOW=1')
    def test_ensemble_oracle(self):

        p = SystemParams(g=0.05, kappa=1.0, gamma=1e-2)
        n = dynamics.Numerics(n_traj=5000, dt_sde=0.005, burn_in=500.0, t_end=1500.0)
        for name in ['none', 'markov_mechanical', 'bayes_ideal']:
            law = base.get_feedback_law(name, p, chi=0.1, numerics=n)
            spec = trajectories.EnsembleSpec.from_numerics(p, n)
            est = trajectories.ensemble_excess_noise(law, p, spec, threads=-1)
            res = trajectories.validate_against_reference(est, law.excess())
            self.assertTrue(res['pass'], msg='%s worst %s' %(name, res['worst_entry']))
        return


class BaseTests(unittest.TestCase):
    """Tests for the feedback law registry and point pipeline"""

    def setUp(self):
        self.params = SystemParams()
        return

    def test_classes(self):

        cl = base.get_law_classes()
        self.assertEqual(sorted(cl.keys()), ['bayes', 'markov', 'none'])
        for name in ['none', 'markov_ideal', 'markov_mechanical', 'bayes_ideal']:
            law = base.get_feedback_law(name, self.params)
            print (law)
            self.assertIsInstance(law, base.FeedbackLaw)
        law = base.get_feedback_law('markov_force', self.params, lam=0.5)
        self.assertEqual(law.name, 'markov_force(lambda=0.5)')
        self.assertRaises(ValueError, base.get_feedback_law, 'bogus', self.params)
        return

    def test_run_point(self):

        row = base.run_point(self.params, 'bayes_ideal', chi=0.1)
        self.assertEqual(list(row.keys()), base.COLUMNS)
        self.assertEqual(row['status'], 'ok')
        self.assertTrue(row['converged'])
        self.assertLessEqual(row['var_fb_min'], row['var_fb_mean'])
        self.assertLessEqual(row['var_fb_mean'], row['var_fb_max'])
        self.assertIsNone(row['runtime_s'])
        self.assertIsNone(row['lambda'])
        row = base.run_point(self.params, 'none', timing=True)
        self.assertIsNone(row['avg_force_newton'])
        self.assertAlmostEqual(row['var_fb_mean'], row['var_unc'], places=6)
        self.assertGreaterEqual(row['runtime_s'], 0)
        row = base.run_point(self.params.replace(g=0), 'none')
        self.assertEqual(row['adiabatic'], 10.5)
        return

    def test_failed_point(self):

        with mock.patch.object(optomech, 'squeezing_threshold',
                               side_effect=NoConvergence('forced')):
            row = base.run_point(self.params, 'markov_ideal')
        self.assertTrue(row['status'].startswith('NoConvergence'))
        self.assertFalse(row['converged'])
        self.assertIsNone(row['var_fb_mean'])
        return

    def test_unconditional_failure(self):
        """A failed open loop solve only blanks its own column"""

        with mock.patch.object(optomech, 'unconditional_steady_state',
                               side_effect=NoConvergence('forced')):
            row = base.run_point(self.params, 'markov_ideal')
            none = base.run_point(self.params, 'none')
        self.assertEqual(row['status'], 'ok')
        self.assertIsNone(row['var_unc'])
        self.assertIsNotNone(row['var_fb_mean'])
        self.assertEqual(none['status'], 'ok')
        self.assertEqual(none['var_unc'], none['var_fb_mean'])
        return


class ConfigTests(unittest.TestCase):
    """Tests for config parsing and presets"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        return

    def tearDown(self):
        shutil.rmtree(self.tmp)
        return

    def test_defaults(self):

        c = config.parse_config('feedback = none\nparams.g = 0.05\n')
        p = c.params
        self.assertTrue(p.rwa)
        self.assertEqual((p.gamma, p.eta, p.nbar), (1e-4, 1.0, 10.0))
        self.assertEqual(c.g, (0.05,))
        self.assertIsNone(c.sweep)
        self.assertEqual(c, config.parse_config(''))
        return

    def test_formats_agree(self):

        flat = 'feedback = bayes_ideal\nchi = 0.1\nparams.g = 0.3\nparams.rwa = no\n'
        ini = '[run]\nfeedback = bayes_ideal\nchi = 0.1\n[params]\ng = 0.3\nrwa = no\n'
        self.assertEqual(config.parse_config(flat), config.parse_config(ini))
        c = config.parse_config('feedback = bayes_force')
        self.assertEqual(c.chi, (0.1,))
        return

    def test_parse_errors(self):

        with self.assertRaises(ParseError) as cm:
            config.parse_config('feedback = none\nparams.bogus = 1\n')
        self.assertEqual(cm.exception.line, 2)
        self.assertEqual(cm.exception.key, 'params.bogus')
        with self.assertRaises(ParseError) as cm:
            config.parse_config('feedback none')
        self.assertEqual(cm.exception.line, 1)
        self.assertRaises(ParseError, config.parse_config, '[params]\nbogus = 1\n')
        self.assertRaises(ParseError, config.parse_config, 'foo.bar = 1')
        self.assertRaises(ParseError, config.parse_config, 'units.x_zpf = 1e-14')
        return

    def test_validation(self):

        self.assertRaises(ValidationError, config.parse_config, 'feedback = markov_force')
        self.assertRaises(ValidationError, config.parse_config, 'feedback = none\nchi = 0.1')
        self.assertRaises(ValidationError, config.parse_config,
                          'feedback = none\nlambda = 0.5')
        with self.assertRaises(ValidationError) as cm:
            config.parse_config('params.gamma = -1\nnumerics.method = foo\n'
                                'feedback = markov_force\nsweep.variable = kappa\n'
                                'sweep.values = 0,1')
        self.assertGreaterEqual(len(cm.exception.violations), 4)
        return

    def test_threads_env(self):

        with mock.patch.dict(os.environ, {'MECHSQUEEZE_THREADS': '3'}):
            c = config.parse_config('')
        self.assertEqual(c.numerics.threads, 3)
        return

    def test_presets(self):

        c = config.preset('fig1a')
        self.assertEqual((c.params.gamma, c.params.eta, c.params.nbar), (1e-4, 1.0, 10.0))
        self.assertEqual(c.g, (0.01, 0.05, 0.3))
        self.assertEqual(c.sweep.variable, 'kappa')
        self.assertEqual(len(c.sweep.values), 60)
        self.assertAlmostEqual(c.sweep.values[0], 1e-3)
        self.assertAlmostEqual(c.sweep.values[-1], 1e2)
        self.assertIn(0.1, config.preset('fig4').chi)
        self.assertEqual(config.preset('fig2_top').sweep.variable, 'lambda')
        self.assertTrue(config.preset('fig2_top').kappa_optimal)
        self.assertEqual(config.preset('fig2_bottom').lam, 'optimal')
        self.assertEqual(len(list(config.points(config.preset('fig3')))), 2*3*60)
        self.assertRaises(UnknownPreset, config.preset, 'fig9')
        c = config.parse_config('preset = fig3\nparams.g = 0.05')
        self.assertEqual(c.g, (0.05,))
        self.assertEqual(c.feedback, 'bayes_ideal')
        return

    def test_round_trip(self):

        for name in config.presets:
            c = config.preset(name)
            text = config.emit_config(c)
            self.assertEqual(config.parse_config(text), c, msg=name)
        return

    def test_write_config(self):

        fname = os.path.join(self.tmp, 'default.conf')
        config.write_config(fname)
        self.assertTrue(os.path.exists(fname))
        self.assertEqual(config.read_config(fname), config.parse_config(''))
        return


class AppTests(unittest.TestCase):
    """Tests for sweeps and the command line"""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.text = ('feedback = none\nparams.g = 0.01,0.05,0.3\n'
                     'sweep.variable = kappa\nsweep.values = 0.01,0.1,1,10,100\n')
        return

    def tearDown(self):
        shutil.rmtree(self.tmp)
        return

    def test_conditional_sweep(self):

        c = config.parse_config(self.text)
        df = app.run_sweep(c, threads=1, path=os.path.join(self.tmp, 'c.csv'))
        self.assertEqual(len(df), 15)
        self.assertTrue((df.status == 'ok').all())
        for i, r in df.iterrows():
            ref = optomech.conditional_variance_analytic(SystemParams(g=r.g, kappa=r.kappa))
            self.assertLess(abs(r.var_c - ref)/ref, 1e-6)
        self.assertEqual(list(df.sweep_value), list(df.kappa))
        return

    def test_markov_ideal_sweep(self):

        c = config.parse_config(self.text.replace('none', 'markov_ideal'))
        df = app.run_sweep(c, threads=1, write=False)
        np.testing.assert_allclose(df.var_fb_mean, df.var_c, rtol=1e-12, atol=1e-14)
        return

    def test_csv_output(self):

        c = config.parse_config(self.text.replace('0.01,0.05,0.3', '0.05'))
        f1 = os.path.join(self.tmp, 'a.csv')
        f2 = os.path.join(self.tmp, 'b.csv')
        app.run_sweep(c, threads=1, path=f1)
        app.run_sweep(c, threads=1, path=f2)
        body = []
        for f in [f1, f2]:
            lines = open(f).read().splitlines()
            self.assertTrue(lines[0].startswith('# mechsqueeze version'))
            body.append([l for l in lines if not l.startswith('#')])
        self.assertEqual(body[0], body[1])
        self.assertEqual(body[0][0], ','.join(base.COLUMNS))
        self.assertIn('null', body[0][1])
        df = pd.read_csv(f1, comment='#')
        self.assertEqual(len(df), 5)
        return

    def test_json_output(self):

        c = config.parse_config(self.text + 'output.format = json\n')
        fname = os.path.join(self.tmp, 'r.json')
        app.run_sweep(c, threads=1, path=fname)
        data = json.load(open(fname))
        self.assertEqual(data['columns'], base.COLUMNS)
        self.assertEqual(len(data['rows']), 15)
        self.assertIsNone(data['rows'][0]['lambda'])
        self.assertIsNone(data['rows'][0]['avg_force_newton'])
        return

    def test_main(self):

        self.assertEqual(app.main(['--version']), 0)
        self.assertEqual(app.main(['bogus']), 2)
        self.assertEqual(app.main(['preset', 'fig9']), 2)
        self.assertEqual(app.main(['-c', os.path.join(self.tmp, 'missing.conf'), 'sweep']), 2)
        fname = os.path.join(self.tmp, 'run.conf')
        with open(fname, 'w') as f:
            f.write('feedback = markov_force\n')
        self.assertEqual(app.main(['-c', fname, 'sweep']), 2)
        with open(fname, 'w') as f:
            f.write('feedback = markov_force\nlambda = 0.5\n'
                    'sweep.variable = kappa\nsweep.values = 1\n')
        out = os.path.join(self.tmp, 'out.csv')
        self.assertEqual(app.main(['-c', fname, '-o', out, 'conditional']), 0)
        self.assertEqual(pd.read_csv(out, comment='#').feedback[0], 'none')
        with open(fname, 'w') as f:
            f.write('numerics.n_traj = 50\n')
        self.assertEqual(app.main(['-c', fname, 'mc-validate']), 2)
        conf = os.path.join(self.tmp, 'template.conf')
        self.assertEqual(app.main(['-w', conf]), 0)
        self.assertTrue(os.path.exists(conf))
        return

if __name__ == '__main__':
    unittest.main()
