"""Exception hierarchy shared by all modules.

The CLI maps these onto stable exit codes: configuration problems exit 2,
numerical preconditions exit 3, cross-validation tolerance breaches exit 4.
"""

from __future__ import annotations


class RecombError(Exception):
    """Base class for everything raised on purpose by this package."""


class DomainError(RecombError, ValueError):
    """An argument violates an operation's precondition (wrong ground set,
    mismatched spaces, malformed partition, negative mass, and so on)."""


class SizeCapError(DomainError):
    """An exact-lattice method was asked for a ground set beyond the
    configured cap; the number of partitions grows like the Bell numbers
    (B(8) = 4140, B(12) > 4.2e6), so dense matrices become infeasible."""


class ConfigError(RecombError, ValueError):
    """Invalid run configuration; the message names the offending field."""


class NonGenericRatesError(RecombError, ArithmeticError):
    """Two exit rates collide, so the exponential-mixture recursion for the
    coefficients is not defined; use the semigroup method instead."""


class MassDriftError(RecombError, ArithmeticError):
    """A state that must be a probability vector drifted away from total
    mass one beyond tolerance; states are never silently renormalized."""


class CrosscheckError(RecombError):
    """Independent solution methods disagree beyond the requested tolerance."""
