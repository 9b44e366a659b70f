#!/usr/bin/env python

"""
    Monte-Carlo ensembles of conditional mean trajectories
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.

    Each trajectory follows dr = At r dt + V dw/sqrt(2) with Euler-Maruyama
    steps. The excess noise estimate is twice the sample covariance pooled
    over trajectories and over the sampled times after the burn in.
"""

from __future__ import absolute_import, print_function
import math, logging
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from .exceptions import InsufficientEnsemble, Divergence
from .gaussian import quadratures
from . import dynamics, optomech
from .dynamics import coefficient, is_constant, OVERFLOW_GUARD
from .utilities import symmetrize

log = logging.getLogger(__name__)

#normals are drawn per trajectory in blocks of this many steps
CHUNK = 1024


@dataclass(frozen=True)
class EnsembleSpec:
    n_traj: int = 5000
    dt_sde: float = 0.01
    t_end: float = 2e5
    base_seed: int = 12345
    burn_in: float = 1e5
    n_batches: int = 20
    #time between pooled samples
    sample_interval: float = 1.0
    raw_current: bool = False

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError('n_traj must be a positive integer')
        if not self.dt_sde > 0:
            raise ValueError('dt_sde must be positive')
        if not 0 <= self.burn_in < self.t_end:
            raise ValueError('need 0 <= burn_in < t_end')

    @classmethod
    def from_numerics(cls, params, numerics, **kwargs):
        """Spec with the statistics window defaulting to 10/gamma after a
           burn in of 10/gamma"""

        burn_in = numerics.burn_in if numerics.burn_in is not None else 10/params.gamma
        t_end = numerics.t_end if numerics.t_end is not None else burn_in + 10/params.gamma
        dt_sde = numerics.dt_sde
        if dt_sde is None:
            dt_sde = numerics.dt or dynamics.choose_dt(params.omega_m, params.kappa)
        opts = dict(n_traj=numerics.n_traj, dt_sde=dt_sde, t_end=t_end,
                    base_seed=numerics.base_seed, burn_in=burn_in,
                    n_batches=numerics.n_batches)
        opts.update(kwargs)
        return cls(**opts)


@dataclass
class EnsembleEstimate:
    sigma_hat: np.ndarray
    stderr: np.ndarray
    z_scores: np.ndarray = None
    n_traj: int = 0
    n_samples: int = 0
    batch_estimates: np.ndarray = field(default=None, repr=False)

    def table(self):
        """Long form table of estimate, standard error and z score"""

        rows = []
        for i,a in enumerate(quadratures):
            for j,b in enumerate(quadratures):
                z = np.nan if self.z_scores is None else self.z_scores[i,j]
                rows.append((a+b, self.sigma_hat[i,j], self.stderr[i,j], z))
        return pd.DataFrame(rows, columns=['entry','sigma_hat','stderr','z'])


def trajectory_rng(base_seed, traj_index):
    """Independent counter based stream for one trajectory"""

    ss = np.random.SeedSequence([int(base_seed), int(traj_index)])
    return np.random.Generator(np.random.Philox(ss))

def _tables(A_tilde, V, period, dt, raw=None):
    """Coefficients on the step grid of one period, h divides the period"""

    A_tilde, V = coefficient(A_tilde), coefficient(V)
    coeffs = [A_tilde, V]
    if raw is not None:
        coeffs = [coefficient(raw['A']), coefficient(raw['L']), coefficient(raw['FM'])]
    if is_constant(*coeffs) or period is None:
        return {'n': 1, 'h': dt, 'tables': [c(0)[None] for c in coeffs],
                'B': None if raw is None else raw['B']}
    n, h = dynamics.grid_steps(period, dt)
    if h != dt:
        log.debug('dt_sde adjusted to %.6g to divide the period' %h)
    tables = [np.array([c(k*h) for k in range(n)]) for c in coeffs]
    return {'n': n, 'h': h, 'tables': tables, 'B': None if raw is None else raw['B']}

def _stride(tab, interval):
    s = max(1, int(round(interval/tab['h'])))
    #coprime with the steps per period so every phase is sampled
    while math.gcd(s, tab['n']) != 1:
        s += 1
    return s

def _run(tab, spec, indices, r0, stats=True, record_stride=None):
    """Integrate a block of trajectories side by side"""

    n_per, h = tab['n'], tab['h']
    n_steps = max(1, int(round(spec.t_end/h)))
    burn = int(math.ceil(spec.burn_in/h))
    stride = _stride(tab, spec.sample_interval)
    rngs = [trajectory_rng(spec.base_seed, i) for i in indices]
    b = len(indices)
    r = np.tile(np.asarray(r0, dtype=float), (b,1))
    s1 = np.zeros(4)
    s2 = np.zeros((4,4))
    count = 0
    path = [r[0].copy()] if record_stride else None
    times = [0.0] if record_stride else None
    sq = np.sqrt(h/2)
    raw = tab['B'] is not None
    if raw:
        At, Lt, FMt = tab['tables']
        B = tab['B']
        sqh = np.sqrt(h)
    else:
        At, Vt = tab['tables']
    step = 0
    while step < n_steps:
        c = min(CHUNK, n_steps - step)
        xi = np.stack([rng.standard_normal((c,4)) for rng in rngs], axis=1)
        for j in range(c):
            k = step % n_per
            if raw:
                dw = sqh*xi[j]
                dy = -np.sqrt(2)*h*(r @ B) + dw
                r = r + h*(r @ At[k].T) + dw @ Lt[k].T/np.sqrt(2) + dy @ FMt[k].T
            else:
                r = r + h*(r @ At[k].T) + sq*(xi[j] @ Vt[k].T)
            step += 1
            if stats and step > burn and (step - burn) % stride == 0:
                s1 += r.sum(axis=0)
                s2 += r.T @ r
                count += b
            if record_stride and step % record_stride == 0:
                path.append(r[0].copy())
                times.append(step*h)
        m = np.abs(r).max()
        if not m < OVERFLOW_GUARD:
            raise Divergence('trajectory diverged at t=%.6g' %(step*h))
    if record_stride:
        return np.array(times), np.array(path)
    return s1, s2, count

def _batch_worker(tab, spec, indices, r0):
    return _run(tab, spec, indices, r0, stats=True)

def _raw_pieces(law):
    """Open loop drift, innovation and F M of a Markovian law"""

    if getattr(law, 'M', None) is None:
        raise ValueError('the raw current path needs a Markovian law')
    A, F, M = law.problem.A, law.F, coefficient(law.M)
    L = optomech.innovation(law.params, law.sigma_c)
    if is_constant(F, M):
        FM = F(0) @ M(0)
    else:
        FM = lambda t: F(t) @ M(t)
    return {'A': A, 'L': L, 'FM': FM, 'B': law.problem.B}

def simulate_trajectory(A_tilde, V, spec, traj_index, r0=None, period=None,
                        record_interval=None, raw=None):
    """
    Euler-Maruyama path of a single conditional mean, identical to member
    traj_index of an ensemble with the same spec.
    Args:
        A_tilde: closed-loop drift (matrix or function of time)
        V: noise coefficient
        r0: initial mean, zeros by default
        period: period of time dependent coefficients
        record_interval: time between stored points, every step by default
        raw: dict of A, L, FM and B to feed back the simulated photocurrent
    Returns:
        times, path array of shape (n, 4)
    """

    if r0 is None:
        r0 = np.zeros(4)
    tab = _tables(A_tilde, V, period, spec.dt_sde, raw)
    rec = 1 if record_interval is None else max(1, int(round(record_interval/tab['h'])))
    return _run(tab, spec, [traj_index], r0, stats=False, record_stride=rec)

def ensemble_excess_noise(law, params, spec, threads=1, r0=None):
    """
    Estimate the excess noise matrix of a feedback law from an ensemble of
    trajectories. Standard errors come from batch means over groups of
    trajectories.
    Args:
        law: object with A_tilde and V coefficients (see base.get_feedback_law)
        params: SystemParams
        spec: EnsembleSpec
        threads: joblib workers
    Returns:
        EnsembleEstimate
    """

    if spec.n_traj < 2:
        raise InsufficientEnsemble('need at least 2 trajectories for standard errors')
    if spec.t_end - spec.burn_in < 10/params.gamma:
        log.warning('statistics window %.3g is shorter than 10/gamma = %.3g'
                    %(spec.t_end - spec.burn_in, 10/params.gamma))
    if r0 is None:
        r0 = np.zeros(4)
    raw = _raw_pieces(law) if spec.raw_current else None
    period = None if is_constant(law.A_tilde, law.V) and raw is None else params.period
    tab = _tables(law.A_tilde, law.V, period, spec.dt_sde, raw)
    nb = min(spec.n_batches, spec.n_traj)
    batches = np.array_split(np.arange(spec.n_traj), nb)
    log.info('ensemble of %s trajectories in %s batches, h=%.4g, %s steps'
             %(spec.n_traj, nb, tab['h'], int(round(spec.t_end/tab['h']))))
    res = Parallel(n_jobs=threads)(delayed(_batch_worker)(tab, spec, idx, r0) for idx in batches)
    est = []
    S1 = np.zeros(4)
    S2 = np.zeros((4,4))
    N = 0
    for s1, s2, count in res:
        if count == 0:
            raise InsufficientEnsemble('no samples after the burn in, increase t_end')
        m = s1/count
        est.append(2*symmetrize(s2/count - np.outer(m, m)))
        S1 += s1
        S2 += s2
        N += count
    est = np.array(est)
    m = S1/N
    sigma_hat = 2*symmetrize(S2/N - np.outer(m, m))
    stderr = est.std(axis=0, ddof=1)/np.sqrt(len(est))
    return EnsembleEstimate(sigma_hat, stderr, n_traj=spec.n_traj, n_samples=N,
                            batch_estimates=est)

def validate_against_reference(estimate, reference, z_max=4.0, floor=1e-12):
    """
    Compare an ensemble estimate with a deterministic excess noise matrix.
    Entries whose standard error is below floor have no spread to score
    against: they get z = 0 when they agree to within floor and infinity
    otherwise.
    Returns:
        dict with pass, worst_entry, worst_z and the z score matrix
    """

    if hasattr(reference, 'mean') and callable(reference.mean):
        reference = reference.mean()
    reference = np.asarray(reference, dtype=float)
    if reference.shape != estimate.sigma_hat.shape:
        raise ValueError('reference shape %s does not match estimate %s'
                         %(reference.shape, estimate.sigma_hat.shape))
    diff = estimate.sigma_hat - reference
    z = np.where(np.abs(diff) > floor, np.inf, 0.0)
    mask = estimate.stderr > floor
    z[mask] = diff[mask]/estimate.stderr[mask]
    estimate.z_scores = z
    i, j = np.unravel_index(np.argmax(np.abs(z)), z.shape)
    worst = float(abs(z[i,j]))
    return {'pass': bool(worst <= z_max), 'worst_entry': quadratures[i]+quadratures[j],
            'worst_z': worst, 'z_scores': z}
