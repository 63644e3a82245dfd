"""Relaxation kernels mu(s) = -k'(s) for the fading-memory convolution.

Two closed-form families are supported:

* exponential: ``mu(s) = mu0 * exp(-c*s)``
* polynomial:  ``mu(s) = c * (1+s)**(-1/(r-1))`` with ``r in (1, 2)``

Only these families are built in, so tail integrals are exact.  Each kernel
carries ``k0 = k(0) = 1 + integral of mu``, the effective instantaneous
stiffness of the wave operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

EXPONENTIAL = "exponential"
POLYNOMIAL = "polynomial"


class KernelError(ValueError):
    """Raised for ill-formed kernel parameters or out-of-domain arguments."""


@dataclass(frozen=True)
class DecayClassReport:
    """Result of checking the admissibility conditions on a kernel."""

    decay_class: str          # "exponential" or "polynomial"
    r: float | None           # polynomial rate parameter, None for exponential
    C: float                  # largest admissible decay constant
    k0: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class RelaxationKernel:
    """Immutable relaxation kernel; safe for concurrent reads."""

    family: str
    mu0: float = 0.0   # exponential: mu(0); polynomial: leading coefficient c
    c: float = 0.0     # exponential decay rate (unused for polynomial)
    r: float = 0.0     # polynomial rate in (1, 2) (unused for exponential)

    def __post_init__(self):
        if self.family == EXPONENTIAL:
            if self.mu0 <= 0 or self.c <= 0:
                raise KernelError(
                    f"exponential kernel needs mu0 > 0 and c > 0, got "
                    f"mu0={self.mu0}, c={self.c}"
                )
        elif self.family == POLYNOMIAL:
            if self.mu0 <= 0:
                raise KernelError(f"polynomial kernel needs c > 0, got {self.mu0}")
            if not (1.0 < self.r < 2.0):
                raise KernelError(
                    f"polynomial rate r must lie in (1, 2), got r={self.r}"
                )
        else:
            raise KernelError(f"unknown kernel family {self.family!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def exponential(cls, mu0: float, c: float) -> "RelaxationKernel":
        return cls(family=EXPONENTIAL, mu0=float(mu0), c=float(c))

    @classmethod
    def polynomial(cls, c: float, r: float) -> "RelaxationKernel":
        return cls(family=POLYNOMIAL, mu0=float(c), r=float(r))

    # -- pointwise values ---------------------------------------------------

    def mu(self, s):
        """mu(s) > 0 for s >= 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise KernelError("mu is defined for s >= 0 only")
        if self.family == EXPONENTIAL:
            out = self.mu0 * np.exp(-self.c * s)
        else:
            q = 1.0 / (self.r - 1.0)
            out = self.mu0 * (1.0 + s) ** (-q)
        return float(out) if out.ndim == 0 else out

    def mu_prime(self, s):
        """Analytic derivative mu'(s) <= 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise KernelError("mu' is defined for s >= 0 only")
        if self.family == EXPONENTIAL:
            out = -self.c * self.mu0 * np.exp(-self.c * s)
        else:
            q = 1.0 / (self.r - 1.0)
            out = -self.mu0 * q * (1.0 + s) ** (-q - 1.0)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, s_max):
        """Exact integral of mu over [s_max, infinity)."""
        s_max = np.asarray(s_max, dtype=float)
        if np.any(s_max < 0):
            raise KernelError("tail_mass is defined for s_max >= 0 only")
        if self.family == EXPONENTIAL:
            out = (self.mu0 / self.c) * np.exp(-self.c * s_max)
        else:
            a = (2.0 - self.r) / (self.r - 1.0)
            out = self.mu0 * (self.r - 1.0) / (2.0 - self.r) * (1.0 + s_max) ** (-a)
        return float(out) if out.ndim == 0 else out

    def mu_prime_tail(self, s_max):
        """Exact integral of mu' over [s_max, infinity) = -mu(s_max)."""
        return -self.mu(s_max)

    def k_at(self, s):
        """k(s) = 1 + tail_mass(s); strictly decreasing to k(inf) = 1."""
        return 1.0 + self.tail_mass(s)

    @property
    def k0(self) -> float:
        """k(0) = 1 + total mass of mu."""
        return 1.0 + self.tail_mass(0.0)

    # -- admissibility ------------------------------------------------------

    def decay_constant(self) -> float:
        """Largest C with mu' + C*mu <= 0 (exponential) or mu' + C*mu^r <= 0.

        The polynomial constant is taken as the infimum of -mu'/mu^r over a
        log-spaced sample grid; only the existence of a positive C matters to
        the decay theorems, so a grid infimum is adequate.
        """
        if self.family == EXPONENTIAL:
            return self.c
        s = np.concatenate([[0.0], np.logspace(-6, 3, 100_000)])
        ratio = -self.mu_prime(s) / self.mu(s) ** self.r
        return float(np.min(ratio))

    def validate_assumptions(self, n_samples: int = 200) -> DecayClassReport:
        """Check positivity, monotonicity, and the decay-class inequality.

        Samples a geometric grid in s; reports the first violating s for each
        failed condition.
        """
        s_top = 6.0
        if self.family == EXPONENTIAL:
            # keep exp(-c*s) above the double-precision underflow threshold
            s_top = min(s_top, math.log10(700.0 / self.c))
        s = np.concatenate([[0.0], np.logspace(-6, s_top, n_samples)])
        mu = self.mu(s)
        mup = self.mu_prime(s)
        C = self.decay_constant()
        violations = []
        if np.any(mu <= 0):
            violations.append(("mu > 0", float(s[np.argmax(mu <= 0)])))
        if np.any(mup > 0):
            violations.append(("mu' <= 0", float(s[np.argmax(mup > 0)])))
        if self.family == EXPONENTIAL:
            bad = mup + C * mu > 1e-12 * np.maximum(1.0, mu)
        else:
            bad = mup + C * mu ** self.r > 1e-12 * np.maximum(1.0, mu)
        if np.any(bad):
            violations.append(("decay-class inequality", float(s[np.argmax(bad)])))
        if not math.isfinite(self.tail_mass(0.0)):
            violations.append(("mu in L1", 0.0))
        return DecayClassReport(
            decay_class=self.family,
            r=self.r if self.family == POLYNOMIAL else None,
            C=C,
            k0=self.k0,
            violations=violations,
        )
