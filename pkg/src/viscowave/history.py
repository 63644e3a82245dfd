"""History data on t <= 0, the evolving memory buffer, and well classification.

The memory buffer realizes ``w(t, s) = u(t) - u(t - s)`` on a uniform s-grid
with spacing ``ds`` (a fixed multiple of the time step), with an exact
closed-form tail beyond the covered depth.  Two extension modes are supported
for the history beyond its tabulated support:

* ``zero``   -- u0(t) = 0 for t <= -T0 (compactly supported history); the
                tail of every memory integral is then exact.
* ``frozen`` -- u0(t) = u0(-T0) for t <= -T0; tails use the frozen field.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import SpatialGrid, GridError
from .kernel import RelaxationKernel

ZERO = "zero"
FROZEN = "frozen"

# |gap| below this fraction of the quadratic part counts as on-manifold;
# an exact zero is measure-zero in floating point.
ON_MANIFOLD_RTOL = 1e-8


class Classification(enum.Enum):
    W1 = "W1"
    W2 = "W2"
    ON_MANIFOLD = "OnM"
    OUTSIDE_WELL = "OutsideWell"


# ---------------------------------------------------------------------------
# temporal profiles for analytic history templates


def profile_constant(t):
    return np.ones_like(np.asarray(t, dtype=float))


def make_profile(name: str, T0: float, ramp_rate: float = 1.0):
    """Temporal profile g(t) on t <= 0 with g(0) = 1, and its derivative.

    ``constant``: g = 1 on the support; ``ramp``: g = exp(ramp_rate * t);
    ``bump``: smooth-ish compact bump sin^2(pi (t+T0) / (2 T0)) vanishing at
    -T0.  Returns (g, g').
    """
    if name == "constant":
        return (lambda t: np.ones_like(np.asarray(t, dtype=float)),
                lambda t: np.zeros_like(np.asarray(t, dtype=float)))
    if name == "ramp":
        b = float(ramp_rate)
        return (lambda t: np.exp(b * np.asarray(t, dtype=float)),
                lambda t: b * np.exp(b * np.asarray(t, dtype=float)))
    if name == "bump":
        if T0 <= 0:
            raise ValueError("bump profile needs support_T0 > 0")
        w = np.pi / (2.0 * T0)

        def g(t):
            t = np.asarray(t, dtype=float)
            return np.sin(w * (t + T0)) ** 2

        def gp(t):
            t = np.asarray(t, dtype=float)
            return 2.0 * w * np.sin(w * (t + T0)) * np.cos(w * (t + T0))

        return g, gp
    raise ValueError(f"unknown temporal profile {name!r}")


# ---------------------------------------------------------------------------
# history datum


@dataclass
class HistoryDatum:
    """History value u0(x, t) for t <= 0, with an extension mode beyond -T0."""

    grid: SpatialGrid
    shape_field: np.ndarray                 # spatial profile, amplitude included
    profile: Callable[[float], float]       # temporal factor g(t), g(0) = 1
    profile_dt: Callable[[float], float]
    support_T0: float = 0.0
    mode: str = ZERO
    _velocity: Optional[np.ndarray] = None

    def __post_init__(self):
        self.shape_field = self.grid.check(self.shape_field)
        if self.mode not in (ZERO, FROZEN):
            raise ValueError(f"unknown history extension mode {self.mode!r}")
        if self.support_T0 < 0:
            raise ValueError("support_T0 must be nonnegative")

    @classmethod
    def from_template(cls, grid: SpatialGrid, amplitude: float,
                      modes=(1,), profile: str = "constant",
                      support_T0: float = 0.0, mode: str = ZERO,
                      ramp_rate: float = 1.0) -> "HistoryDatum":
        """Product-of-sine-modes spatial shape times a temporal profile."""
        modes = tuple(int(k) for k in np.atleast_1d(modes))
        if len(modes) != grid.dim:
            raise GridError("one mode number per grid axis required")
        coords = grid.coords() if grid.dim > 1 else (grid.coords(),)
        shape = np.ones(grid.shape)
        for x, k, L in zip(coords, modes, grid.extents):
            shape = shape * np.sin(k * np.pi * x / L)
        g, gp = make_profile(profile, support_T0, ramp_rate)
        return cls(grid=grid, shape_field=amplitude * shape, profile=g,
                   profile_dt=gp, support_T0=support_T0, mode=mode)

    @classmethod
    def from_table(cls, grid: SpatialGrid, times: np.ndarray,
                   samples: np.ndarray, mode: str = ZERO) -> "HistoryDatum":
        """Tabulated history: times <= 0 descending to -T0, one field per row.

        Linear interpolation in t between rows.
        """
        times = np.asarray(times, dtype=float)
        samples = np.asarray(samples, dtype=float)
        if times.ndim != 1 or np.any(times > 0) or times[0] != 0.0:
            raise ValueError("table times must start at 0 and be nonpositive")
        order = np.argsort(times)[::-1]
        times, samples = times[order], samples[order]
        T0 = -float(times[-1])
        flat = samples.reshape(len(times), -1)

        def g(t):  # pragma: no cover - replaced by value_at override
            raise NotImplementedError

        datum = cls(grid=grid, shape_field=samples[0], profile=g, profile_dt=g,
                    support_T0=T0, mode=mode)
        datum._table_times = times
        datum._table_flat = flat
        return datum

    @property
    def tabulated(self) -> bool:
        return hasattr(self, "_table_times")

    def value_at(self, t: float) -> np.ndarray:
        """u0(., t) for t <= 0, honoring the extension mode."""
        if t > 0:
            raise ValueError("history is defined for t <= 0 only")
        if t < -self.support_T0:
            if self.mode == ZERO:
                return self.grid.zeros()
            t = -self.support_T0
        if self.tabulated:
            ts = self._table_times
            vals = np.empty(self._table_flat.shape[1])
            for j in range(len(vals)):
                vals[j] = np.interp(t, ts[::-1], self._table_flat[::-1, j])
            return vals.reshape(self.grid.shape)
        return self.shape_field * float(self.profile(t))

    @property
    def velocity_at_0(self) -> np.ndarray:
        if self._velocity is not None:
            return self._velocity
        if self.tabulated:
            ts = self._table_times
            if len(ts) < 2:
                return self.grid.zeros()
            dt = float(ts[0] - ts[1])
            return (self.value_at(0.0) - self.value_at(float(ts[1]))) / dt
        return self.shape_field * float(self.profile_dt(0.0))

    @velocity_at_0.setter
    def velocity_at_0(self, v: np.ndarray):
        self._velocity = self.grid.check(v)

    def frozen_field(self) -> np.ndarray:
        """Extension field beyond the support: zero or u0(-T0)."""
        if self.mode == ZERO:
            return self.grid.zeros()
        return self.value_at(-self.support_T0)

    def M0(self, n_samples: int = 64) -> float:
        """sup over sampled past times of ||grad u0(t)||_2."""
        T = max(self.support_T0, 1e-9)
        ts = -np.linspace(0.0, T, n_samples)
        vals = [np.sqrt(self.grid.h1_seminorm_sq(self.value_at(t))) for t in ts]
        vals.append(np.sqrt(self.grid.h1_seminorm_sq(self.frozen_field())))
        return float(max(vals))


# ---------------------------------------------------------------------------
# datum-level functionals


def _datum_memory_quadratic(datum: HistoryDatum, kernel: RelaxationKernel,
                            ds: float) -> float:
    """integral_0^inf ||grad(v(0) - v(-s))||^2 mu(s) ds for a history datum.

    Trapezoid over the tabulated support plus the exact closed-form tail for
    the extension mode.
    """
    grid = datum.grid
    v0 = datum.value_at(0.0)
    T0 = datum.support_T0
    total = 0.0
    s_edge = 0.0
    if T0 > 0:
        n = max(2, int(np.ceil(T0 / ds)) + 1)
        s = np.linspace(0.0, T0, n)
        vals = np.array([grid.h1_seminorm_sq(v0 - datum.value_at(-si))
                         for si in s])
        total += float(np.trapezoid(vals * kernel.mu(s), s))
        s_edge = T0
    tail_field = v0 - datum.frozen_field()
    total += grid.h1_seminorm_sq(tail_field) * kernel.tail_mass(s_edge)
    return total


def quadratic_part(datum: HistoryDatum, kernel: RelaxationKernel,
                   ds: float = 1e-2) -> float:
    """||grad v(0)||^2 + integral ||grad(v(0)-v(-s))||^2 mu ds."""
    v0 = datum.value_at(0.0)
    return (datum.grid.h1_seminorm_sq(v0)
            + _datum_memory_quadratic(datum, kernel, ds))


def functional_I(datum: HistoryDatum, p: float, kernel: RelaxationKernel,
                 ds: float = 1e-2) -> float:
    """Potential functional: half the quadratic part minus the source term."""
    v0 = datum.value_at(0.0)
    return (0.5 * quadratic_part(datum, kernel, ds)
            - datum.grid.lp_norm_pow(v0, p + 1.0) / (p + 1.0))


def nehari_gap(datum: HistoryDatum, p: float, kernel: RelaxationKernel,
               ds: float = 1e-2) -> float:
    """Quadratic part minus ||v(0)||_{p+1}^{p+1}; sign splits W1 from W2."""
    v0 = datum.value_at(0.0)
    return (quadratic_part(datum, kernel, ds)
            - datum.grid.lp_norm_pow(v0, p + 1.0))


def classify(datum: HistoryDatum, d: float, p: float,
             kernel: RelaxationKernel, ds: float = 1e-2) -> Classification:
    """Classify a history datum against the potential well at level d.

    The zero datum is W1 by convention.  On-manifold is declared when the gap
    is below ON_MANIFOLD_RTOL relative to the quadratic part (checked before
    the well-level test so that near-manifold data at the mountain-pass level
    are reported as on-manifold rather than outside the well).
    """
    quad = quadratic_part(datum, kernel, ds)
    if quad == 0.0:
        return Classification.W1
    gap = quad - datum.grid.lp_norm_pow(datum.value_at(0.0), p + 1.0)
    if abs(gap) <= ON_MANIFOLD_RTOL * quad:
        return Classification.ON_MANIFOLD
    if functional_I(datum, p, kernel, ds) >= d:
        return Classification.OUTSIDE_WELL
    return Classification.W1 if gap > 0 else Classification.W2


# ---------------------------------------------------------------------------
# live memory state


class BufferUnderflow(RuntimeError):
    pass


class MemoryState:
    """Uniform-stride ring of past fields plus exact closed-form tails.

    Row j holds u(t_push - j*ds) where t_push is the latest push time; between
    pushes the current field enters as an extra node on the nonuniform first
    interval [0, delta], delta = t - t_push.  The buffer has fixed depth: it
    is prefilled from the history datum at construction, so s-coverage never
    needs to grow and no interpolation is ever required.
    """

    def __init__(self, datum: HistoryDatum, kernel: RelaxationKernel,
                 ds: float, s_depth: float):
        self.grid = datum.grid
        self.kernel = kernel
        self.ds = float(ds)
        self.depth = int(np.ceil(s_depth / ds - 1e-12))
        if self.depth < 1:
            raise ValueError("memory depth must cover at least one stride")
        self.ext_field = datum.frozen_field().ravel()
        self.ext_h1 = self.grid.h1_seminorm_sq(datum.frozen_field())
        n = self.grid.size
        self.rows = np.empty((self.depth + 1, n))
        self.row_h1 = np.empty(self.depth + 1)
        for j in range(self.depth + 1):
            f = datum.value_at(-j * self.ds)
            self.rows[j] = f.ravel()
            self.row_h1[j] = self.grid.h1_seminorm_sq(f)
        self.t_push = 0.0
        self._cache = {}

    @property
    def s_max_at_push(self) -> float:
        return self.depth * self.ds

    def snapshot_field(self, j: int) -> np.ndarray:
        return self.rows[j].reshape(self.grid.shape)

    def push(self, u: np.ndarray, t: float):
        """Record u(t); t must advance by exactly one stride."""
        u = self.grid.check(u)
        self.rows = np.roll(self.rows, 1, axis=0)
        self.rows[0] = u.ravel()
        self.row_h1 = np.roll(self.row_h1, 1)
        self.row_h1[0] = self.grid.h1_seminorm_sq(u)
        self.t_push = t
        self._cache.clear()

    # -- quadrature weights -------------------------------------------------

    def _node_s(self, delta: float) -> np.ndarray:
        return delta + self.ds * np.arange(self.depth + 1)

    def _row_weights(self, weight: str, delta: float) -> np.ndarray:
        """Trapezoid coefficients for the buffer rows at lag delta."""
        s = self._node_s(delta)
        w = self.kernel.mu(s) if weight == "mu" else self.kernel.mu_prime(s)
        coef = np.full(self.depth + 1, self.ds)
        coef[0] = 0.5 * (delta + self.ds)
        coef[-1] = 0.5 * self.ds
        return coef * w

    def _now_weight(self, weight: str, delta: float) -> float:
        w0 = self.kernel.mu(0.0) if weight == "mu" else self.kernel.mu_prime(0.0)
        return 0.5 * delta * w0

    def _tail(self, weight: str, delta: float) -> float:
        s_max = delta + self.s_max_at_push
        if weight == "mu":
            return self.kernel.tail_mass(s_max)
        return self.kernel.mu_prime_tail(s_max)

    def weight_quadrature(self, weight: str, delta: float = 0.0) -> float:
        """Quadrature of the weight itself over the nodes plus exact tail."""
        return (float(np.sum(self._row_weights(weight, delta)))
                + self._now_weight(weight, delta) + self._tail(weight, delta))

    # -- convolutions -------------------------------------------------------

    def convolution_field(self, u_now: np.ndarray, delta: float = 0.0,
                          weight: str = "mu") -> np.ndarray:
        """integral weight(s) * u(t - s) ds, including tail extension.

        For the exponential family the row sum at delta > 0 reuses the cached
        push-time sum scaled by exp(-c*delta); otherwise one weighted row sum
        is taken per call.
        """
        u_now = self.grid.check(u_now)
        kern = self.kernel
        if kern.family == "exponential":
            key = ("conv", weight)
            if key not in self._cache:
                base = self._row_weights(weight, 0.0) @ self.rows
                self._cache[key] = base
            scale = float(np.exp(-kern.c * delta))
            w0 = kern.mu(0.0) if weight == "mu" else kern.mu_prime(0.0)
            rowsum = scale * (self._cache[key]
                              + 0.5 * delta * w0 * self.rows[0])
        else:
            rowsum = self._row_weights(weight, delta) @ self.rows
        out = rowsum + self._now_weight(weight, delta) * u_now.ravel()
        out = out + self._tail(weight, delta) * self.ext_field
        return out.reshape(self.grid.shape)

    def scalar_convolution(self, weight: str, delta: float,
                           h1_now: float) -> float:
        """integral weight(s) * ||grad u(t-s)||^2 ds via the h1 ring."""
        return (float(self._row_weights(weight, delta) @ self.row_h1)
                + self._now_weight(weight, delta) * h1_now
                + self._tail(weight, delta) * self.ext_h1)

    def memory_integral(self, u_now: np.ndarray, weight: str = "mu",
                        delta: float = 0.0,
                        conv: np.ndarray | None = None) -> float:
        """integral weight(s) * ||grad w(t, s)||^2 ds with exact tail.

        Expands the square through bilinearity; agrees with the direct
        row-by-row trapezoid (memory_integral_direct) to round-off, at O(n)
        cost when the convolution field is cached.
        """
        u_now = self.grid.check(u_now)
        h1_now = self.grid.h1_seminorm_sq(u_now)
        if conv is None:
            conv = self.convolution_field(u_now, delta, weight)
        Q = self.weight_quadrature(weight, delta)
        cross = self.grid.h1_cross(u_now, conv)
        q = self.scalar_convolution(weight, delta, h1_now)
        return Q * h1_now - 2.0 * cross + q

    def memory_integral_direct(self, u_now: np.ndarray, weight: str = "mu",
                               delta: float = 0.0) -> float:
        """Reference row-by-row evaluation of memory_integral (O(J*n))."""
        u_now = self.grid.check(u_now)
        flat = u_now.ravel()
        diffs = flat[None, :] - self.rows
        vals = np.empty(self.depth + 1)
        for j in range(self.depth + 1):
            vals[j] = self.grid.h1_seminorm_sq(diffs[j].reshape(self.grid.shape))
        total = float(self._row_weights(weight, delta) @ vals)
        total += self._now_weight(weight, delta) * 0.0  # w(t, 0) = 0
        tail_f = (flat - self.ext_field).reshape(self.grid.shape)
        total += self._tail(weight, delta) * self.grid.h1_seminorm_sq(tail_f)
        return total

    def memory_force(self, u_now: np.ndarray, delta: float = 0.0,
                     conv: np.ndarray | None = None) -> np.ndarray:
        """F = integral mu(s) * laplacian(u(t-s)) ds (sign per u_tt = k0*lap u - F ...)."""
        if conv is None:
            conv = self.convolution_field(u_now, delta, "mu")
        return self.grid.laplacian(conv)
