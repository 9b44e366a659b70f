#!/usr/bin/env python

"""
    Gaussian state conventions for mechsqueeze
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.

    Quadratures are ordered (X, Y, Q, P): cavity first, then mechanics.
    Covariances use the anticommutator convention, vacuum = identity, so a
    quadrature variance is the diagonal entry divided by 2.
"""

from __future__ import absolute_import, print_function
import numpy as np
from .exceptions import NonSymmetric, NonPositiveVariance
from .utilities import symmetrize, asymmetry

X, Y, Q, P = 0, 1, 2, 3
quadratures = ['X','Y','Q','P']
conventions = ['paper_absolute', 'relative_to_vacuum']
#short names used on the command line
convention_aliases = {'paper': 'paper_absolute', 'vacuum': 'relative_to_vacuum'}
TOL_PSD = 1e-9
TOL_SYMMETRY = 1e-9


class SymplecticForm(object):
    """Real form of the symplectic matrix for n modes"""

    def __init__(self, n_modes):
        self.n_modes = n_modes
        block = np.array([[0, 1], [-1, 0]], dtype=int)
        self.matrix = np.kron(np.eye(n_modes, dtype=int), block)
        return

    def __repr__(self):
        return 'SymplecticForm(n_modes=%s)' %self.n_modes

    def __eq__(self, other):
        return (isinstance(other, SymplecticForm) and
                np.array_equal(self.matrix, other.matrix))


def symplectic_form(n_modes=2):
    """Block diagonal symplectic form, one [[0,1],[-1,0]] block per mode"""

    if int(n_modes) != n_modes or n_modes < 1:
        raise ValueError('n_modes must be a positive integer, got %s' %n_modes)
    return SymplecticForm(int(n_modes))


class GaussianState(object):
    """First moments and covariance matrix of a Gaussian state. Treated as an
       immutable value, the arrays are copied and flagged read-only."""

    def __init__(self, mean=None, cov=None, tol=TOL_SYMMETRY):
        cov = np.array(cov, dtype=float)
        n = cov.shape[0]
        if cov.shape != (n, n) or n % 2 != 0:
            raise ValueError('covariance must be a square matrix of even size')
        if asymmetry(cov) > tol*max(1.0, np.abs(cov).max()):
            raise NonSymmetric('covariance is not symmetric (|cov-cov^T| = %g)'
                               %asymmetry(cov))
        if mean is None:
            mean = np.zeros(n)
        mean = np.array(mean, dtype=float)
        if mean.shape != (n,):
            raise ValueError('mean must have length %s' %n)
        self.cov = symmetrize(cov)
        self.mean = mean
        self.cov.setflags(write=False)
        self.mean.setflags(write=False)
        return

    @classmethod
    def vacuum(cls, n_modes=2):
        return cls(cov=np.eye(2*n_modes))

    @classmethod
    def thermal(cls, nbar, n_modes=2):
        return cls(cov=(2*nbar+1)*np.eye(2*n_modes))

    @property
    def n_modes(self):
        return self.cov.shape[0]//2

    def __repr__(self):
        return 'GaussianState with %s modes, var_Q=%s' %(self.n_modes,
                    self.cov[Q,Q]/2 if self.n_modes == 2 else '-')


def check_physicality(state, tol_psd=TOL_PSD, tol_symmetry=TOL_SYMMETRY):
    """
    Check the uncertainty relation cov + i*Omega >= 0 through its real
    embedding [[cov, -Omega],[Omega, cov]].
    Args:
        state: GaussianState or a bare covariance matrix
        tol_psd: allowed negative eigenvalue
    Returns:
        dict with min_eigenvalue and physical keys
    """

    cov = getattr(state, 'cov', state)
    cov = np.asarray(cov, dtype=float)
    if asymmetry(cov) > tol_symmetry*max(1.0, np.abs(cov).max()):
        raise NonSymmetric('covariance is not symmetric (|cov-cov^T| = %g)'
                           %asymmetry(cov))
    omega = symplectic_form(cov.shape[0]//2).matrix
    embedding = np.block([[cov, -omega], [omega, cov]])
    mineig = np.linalg.eigvalsh(symmetrize(embedding))[0]
    return {'min_eigenvalue': mineig, 'physical': bool(mineig >= -tol_psd)}

def variance_Q(state):
    """Variance of the mechanical quadrature Q"""

    cov = getattr(state, 'cov', state)
    return np.asarray(cov)[Q,Q]/2.0

def squeezing_db(variance, convention='paper_absolute'):
    """
    Express a quadrature variance in decibel.
    paper_absolute gives -10 log10(v), vacuum sits at ~3.01 dB;
    relative_to_vacuum gives -10 log10(2v), vacuum sits at 0 dB.
    """

    convention = convention_aliases.get(convention, convention)
    if convention not in conventions:
        raise ValueError('unknown dB convention %s, use one of %s'
                         %(convention, ', '.join(conventions)))
    variance = np.asarray(variance, dtype=float)
    if np.any(~(variance > 0)):
        raise NonPositiveVariance('variance must be positive, got %s' %variance)
    if convention == 'relative_to_vacuum':
        variance = 2*variance
    db = -10*np.log10(variance)
    if db.ndim == 0:
        return float(db)
    return db

def unconditional_covariance(sigma_c, excess):
    """sigma_unc = sigma_c + Sigma"""

    return symmetrize(np.asarray(sigma_c) + np.asarray(excess))
