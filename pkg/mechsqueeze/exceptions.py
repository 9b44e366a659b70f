#!/usr/bin/env python

"""
    mechsqueeze exceptions
    Created October 2026
    This program is free software; you can redistribute it and/or
    modify it under the terms of the GNU General Public License
    as published by the Free Software Foundation; either version 3
    of the License, or (at your option) any later version.
"""

from __future__ import absolute_import, print_function


class MechSqueezeError(Exception):
    """Base class for all errors raised by the package"""
    exit_code = 1


class NumericalError(MechSqueezeError):
    """A numerical step failed, results for this point are meaningless"""
    exit_code = 3


class NonSymmetric(NumericalError):
    pass


class NonPositiveVariance(NumericalError):
    pass


class Divergence(NumericalError):
    """Integration blew past the overflow guard, usually a non-Hurwitz drift"""
    pass


class Unphysical(NumericalError):
    """Covariance violates the uncertainty relation cov + i*Omega >= 0"""
    pass


class NotHurwitz(NumericalError):

    def __init__(self, message, eigenvalue=None):
        NumericalError.__init__(self, message)
        self.eigenvalue = eigenvalue


class NoConvergence(NumericalError):

    def __init__(self, message, periods=None, residual=None):
        NumericalError.__init__(self, message)
        self.periods = periods
        self.residual = residual


class NotConverged(NumericalError):
    pass


class NonStabilizing(NumericalError):
    pass


class ZeroCoupling(NumericalError):
    """Closed form is singular at g = 0, use the thermal limit instead"""
    pass


class SingularF(NumericalError):
    pass


class SingularXi(NumericalError):
    pass


class InsufficientEnsemble(NumericalError):
    pass


class ConfigError(MechSqueezeError):
    exit_code = 2


class ParseError(ConfigError):

    def __init__(self, message, line=None, key=None):
        if line is not None:
            message = 'line %s: %s' %(line, message)
        if key is not None:
            message = '%s [%s]' %(message, key)
        ConfigError.__init__(self, message)
        self.line = line
        self.key = key


class ValidationError(ConfigError):
    """Holds every violation found, not just the first"""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        ConfigError.__init__(self, '; '.join(self.violations))


class UnknownPreset(ConfigError):
    pass
