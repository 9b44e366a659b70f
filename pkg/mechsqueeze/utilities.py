#!/usr/bin/env python

"""
    Utilities for mechsqueeze
    Created October 2026
"""

from __future__ import absolute_import, print_function
import numpy as np


def symmetrize(m):
    """Return the symmetric part of a square matrix (or a stack of them)"""

    m = np.asarray(m, dtype=float)
    return 0.5*(m + np.swapaxes(m, -1, -2))

def asymmetry(m):
    """Frobenius norm of the antisymmetric part"""

    m = np.asarray(m, dtype=float)
    return np.linalg.norm(m - m.T)

def frobenius(a, b=None):
    """Frobenius norm of a or of the difference a-b"""

    a = np.asarray(a, dtype=float)
    if b is not None:
        a = a - np.asarray(b, dtype=float)
    return np.sqrt(np.sum(a*a))

def min_eigenvalue(m):
    """Smallest eigenvalue of a symmetric matrix"""

    return np.linalg.eigvalsh(symmetrize(m))[0]

def is_psd(m, tol=1e-9):
    """True if the symmetric part of m has no eigenvalue below -tol max(1, |m|)"""

    m = np.asarray(m, dtype=float)
    return min_eigenvalue(m) >= -tol*max(1.0, np.abs(m).max())

def loewner_leq(a, b, tol=1e-8):
    """True if a <= b in Loewner order, i.e. b-a is PSD within tol"""

    return min_eigenvalue(np.asarray(b) - np.asarray(a)) >= -tol

def spectral_abscissa(a):
    """Largest real part over the eigenvalues of a and the eigenvalue itself"""

    ev = np.linalg.eigvals(a)
    i = np.argmax(ev.real)
    return ev[i].real, ev[i]

def spectral_radius(a):
    return np.max(np.abs(np.linalg.eigvals(a)))

def psd_factor(m, tol=1e-14):
    """Return L with L L^T = m for a symmetric PSD m (small negative
       eigenvalues are clipped)"""

    w, v = np.linalg.eigh(symmetrize(m))
    w = np.where(w > tol*max(1.0, np.abs(w).max()), w, 0.0)
    return v*np.sqrt(w)

def grid(start, stop, num, log=False):
    """Sweep grid, log spaced if required"""

    if log == True:
        return np.logspace(np.log10(start), np.log10(stop), int(num))
    return np.linspace(start, stop, int(num))

