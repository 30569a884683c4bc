#!/usr/bin/env python3
#
# fharmap: numerical laboratory for F-harmonic sphere-valued maps
# Copyright 2026 fharmap developers
# All rights reserved.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
#
#


class FharmapError(Exception):
    """Base class for errors raised by fharmap."""


class DomainError(FharmapError):
    """An argument lies outside the domain of an operation."""


class ExtrapolationError(FharmapError):
    """A tabulated integrand was queried outside its sample range."""


class IntegrabilityError(FharmapError):
    """A tail integral required by the integrand does not converge."""


class StateError(FharmapError):
    """An operation needs state that has not been set yet."""


class FormatError(FharmapError):
    """A map or table file is malformed."""


class DimensionError(FormatError):
    """Dimensions of an input do not match what the caller expects."""


class ResolutionError(FharmapError):
    """The grid or the sampling is too coarse for the request."""


class RangeError(FharmapError):
    """A requested radius falls outside a sampled profile."""


class StallError(FharmapError):
    """Backtracking could not decrease the energy."""


class NumericError(FharmapError):
    """Non-finite values appeared during a computation."""


class ConfigError(FharmapError):
    """Experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        FharmapError.__init__(self, "%s: %s" % (field, message))


class InternalError(FharmapError):
    """An algorithm exceeded a bound it must never exceed."""
