"""The grid function h, its bilinear interpolant, and the prices f, g derived from it.

``h(tau, theta)`` is stored on the uniform grid ``{0, 1/n, ..., 1}^2``.
Between grid points it is the bilinear interpolant, so for a fixed ``tau``
it is piecewise linear in ``theta``. The prices are recovered from ``h`` by

* ``f^{-1}(tau) = h(tau, tau)`` (the diagonal), and
* ``g(a, x) = sup{theta : h(f(a), theta) <= x}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

# LP solutions satisfy constraints to ~1e-7; grid checks use the looser user tolerance
GRID_TOL = 1e-6
ROOT_TOL = 1e-12


class GridError(ValueError):
    """A grid violates one of the HGrid invariants."""


class NonMonotoneDiagonalError(GridError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HGrid:
    """Values ``h(i/n, j/n)`` on an (n+1) x (n+1) grid.

    ``validate=False`` skips the invariant checks; it is meant for the
    degenerate test and eager price systems only.
    """

    n: int
    values: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.n + 1, self.n + 1):
            raise GridError(f"expected shape {(self.n + 1, self.n + 1)}, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.validate:
            problems = grid_violations(self)
            if problems:
                raise GridError("; ".join(problems[:5]))

    def __eq__(self, other):
        return isinstance(other, HGrid) and self.n == other.n and np.array_equal(self.values, other.values)

    @classmethod
    def from_function(cls, n: int, fn, validate: bool = True) -> "HGrid":
        t = np.arange(n + 1) / n
        return cls(n, fn(t[:, None], t[None, :]) * np.ones((n + 1, n + 1)), validate=validate)

    @classmethod
    def identity(cls, n: int = 1) -> "HGrid":
        """The test grid ``h(tau, theta) = theta``: f and g are both the identity."""
        return cls.from_function(n, lambda tau, theta: theta + 0 * tau)

    # -- JSON --------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"n": self.n, "values": self.values.ravel().tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HGrid":
        n = int(d["n"])
        vals = np.asarray(d["values"], dtype=float)
        if vals.size != (n + 1) ** 2:
            raise GridError(f"expected {(n + 1) ** 2} values, got {vals.size}")
        return cls(n, vals.reshape(n + 1, n + 1))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "HGrid":
        return cls.from_dict(json.loads(Path(path).read_text()))


def grid_violations(grid: HGrid, tol: float = GRID_TOL) -> list[str]:
    n, v = grid.n, grid.values
    out = []
    if n < 1:
        return ["n must be positive"]
    if np.any(np.abs(v[:, 0]) > tol):
        out.append("h(tau, 0) != 0")
    if np.any(np.abs(v[:, n] - 1) > tol):
        out.append("h(tau, 1) != 1")
    if np.any(v < -tol) or np.any(v > 1 + tol):
        out.append("values outside [0, 1]")
    dtheta = np.diff(v, axis=1)
    if np.any(dtheta <= 0):
        i, j = np.argwhere(dtheta <= 0)[0]
        out.append(f"not strictly increasing in theta at ({i}, {j})")
    if np.any(dtheta > 4 / n + tol):
        out.append("theta increment above 4/n")
    if np.any(np.abs(np.diff(v, axis=0)) > 4 / n + tol):
        out.append("tau increment above 4/n")
    return out


def _cell(x, n):
    """Cell index and in-cell weight ``z`` with ``x = (i + z) / n``; x = 1 maps to the last cell."""
    x = np.asarray(x, dtype=float)
    i = np.minimum(np.floor(x * n).astype(np.int64), n - 1)
    i = np.maximum(i, 0)
    return i, x * n - i


def interpolate_h(grid: HGrid, tau, theta):
    """Bilinear interpolation of the grid; vectorised over ``tau``/``theta``."""
    n, v = grid.n, grid.values
    i, zt = _cell(tau, n)
    j, zh = _cell(theta, n)
    out = ((1 - zt) * (1 - zh) * v[i, j] + (1 - zt) * zh * v[i, j + 1]
           + zt * (1 - zh) * v[i + 1, j] + zt * zh * v[i + 1, j + 1])
    return float(out) if np.ndim(out) == 0 else out


def _row_prefix_integrals(grid: HGrid) -> np.ndarray:
    """``C[i, j] = sum_{l<j} (v[i,l] + v[i,l+1]) / (2n)``: exact integral of row i from 0 to j/n."""
    v, n = grid.values, grid.n
    C = np.zeros_like(v)
    C[:, 1:] = np.cumsum((v[:, :-1] + v[:, 1:]) / (2 * n), axis=1)
    return C


def _row_integral_from_zero(grid, C, i, zt, y):
    """Integral from 0 to y of the row interpolated at tau = (i + zt)/n (vectorised)."""
    v, n = grid.values, grid.n
    j, w = _cell(y, n)

    def one_row(r):
        a = v[r, j]
        b = v[r, j + 1]
        return C[r, j] + (w / n) * (a + 0.5 * w * (b - a))

    return (1 - zt) * one_row(i) + zt * one_row(i + 1)


def H_value(grid: HGrid, tau, theta, _prefix=None):
    """``theta * h(tau, theta) - integral_tau^theta h(tau, y) dy`` with the exact piecewise-linear integral."""
    tau = np.asarray(tau, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < tau - 1e-12):
        raise DomainError("H_value needs tau <= theta")
    C = _row_prefix_integrals(grid) if _prefix is None else _prefix
    i, zt = _cell(tau, grid.n)
    integral = (_row_integral_from_zero(grid, C, i, zt, theta)
                - _row_integral_from_zero(grid, C, i, zt, tau))
    out = theta * interpolate_h(grid, tau, theta) - integral
    return float(out) if np.ndim(out) == 0 else out


def H_grid(grid: HGrid) -> np.ndarray:
    """H at every grid pair (i <= j) by the discrete trapezoid sum; NaN below the diagonal."""
    n, v = grid.n, grid.values
    H = np.full_like(v, np.nan)
    for i in range(n + 1):
        acc = 0.0
        H[i, i] = (i / n) * v[i, i]
        for j in range(i + 1, n + 1):
            acc += (v[i, j - 1] + v[i, j]) / (2 * n)
            H[i, j] = (j / n) * v[i, j] - acc
    return H


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_pair(tau, theta, what):
    if np.any(np.asarray(tau) < -1e-12) or np.any(np.asarray(theta) > 1 + 1e-12):
        raise DomainError(f"{what}: arguments must lie in [0, 1]")
    if np.any(np.asarray(theta) < np.asarray(tau) - 1e-12):
        raise DomainError(f"{what}: needs tau <= theta")


def phi1(grid: HGrid, tau_v, theta_v):
    """Gain bound when v arrives before u."""
    _check_pair(tau_v, theta_v, "phi1")
    return _scalar(H_value(grid, tau_v, theta_v) + 1 - np.asarray(theta_v))


def phi2(grid: HGrid, tau_u, theta_u, tau_v, theta_v):
    """Gain bound when u arrives before v (requires ``1 - theta_u <= tau_v``)."""
    _check_pair(tau_u, theta_u, "phi2")
    _check_pair(tau_v, theta_v, "phi2")
    if np.any(np.asarray(tau_v) < 1 - np.asarray(theta_u) - 1e-12):
        raise DomainError("phi2 needs 1 - theta_u <= tau_v")
    C = _row_prefix_integrals(grid)
    theta_v = np.asarray(theta_v, dtype=float)
    return _scalar(H_value(grid, tau_u, theta_u, C) + H_value(grid, tau_v, theta_v, C)
                   + (1 - interpolate_h(grid, tau_u, theta_u)) * (1 - theta_v))


def phi_general(grid: HGrid, tau_v, theta_v):
    """Gain bound for general vertex arrival."""
    _check_pair(tau_v, theta_v, "phi_general")
    rest = 1 - np.asarray(theta_v, dtype=float)
    return _scalar(H_value(grid, tau_v, theta_v) + rest * interpolate_h(grid, rest, rest))


def diagonal_cell_slopes(grid: HGrid) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of the interpolated diagonal at the start and end of each cell.

    On cell i the diagonal is the quadratic ``(1-z)^2 a + z(1-z) b + z^2 c`` with
    ``a = v[i,i]``, ``b = v[i,i+1] + v[i+1,i]``, ``c = v[i+1,i+1]``; its derivative is
    linear in z, so both end slopes nonnegative means monotone on the cell.
    """
    v, n = grid.values, grid.n
    idx = np.arange(n)
    a = v[idx, idx]
    b = v[idx, idx + 1] + v[idx + 1, idx]
    c = v[idx + 1, idx + 1]
    return b - 2 * a, 2 * c - b


def diagonal_cells_monotone(grid: HGrid) -> bool:
    start, end = diagonal_cell_slopes(grid)
    return bool(np.all(start >= 0) and np.all(end >= 0) and np.all(start + end > 0))


class PriceSystem:
    """Prices (f, g) induced by a grid.

    ``a_independent`` marks systems whose g ignores the active level (all grid
    rows equal); ``certified`` is False for the degenerate constructors.
    """

    def __init__(self, grid: HGrid, *, certified: bool = True, a_independent: bool = False):
        self.grid = grid
        self.certified = certified and grid.validate
        self.a_independent = a_independent
        n, v = grid.n, grid.values
        self.diagonal = np.array([v[i, i] for i in range(n + 1)])
        if not diagonal_cells_monotone(grid):
            raise NonMonotoneDiagonalError("diagonal h(tau, tau) is not strictly increasing")

    @classmethod
    def identity(cls) -> "PriceSystem":
        """f(x) = x and g(a, x) = x."""
        return cls(HGrid.identity(1), certified=False, a_independent=True)

    @classmethod
    def from_f_inverse(cls, finv_values) -> "PriceSystem":
        """a-independent system with g(a, x) = f(x), f given by its inverse tabulated on a uniform grid."""
        finv = np.asarray(finv_values, dtype=float)
        m = finv.size - 1
        if m < 1 or np.any(np.diff(finv) <= 0):
            raise NonMonotoneDiagonalError("f^{-1} must be strictly increasing")
        if abs(finv[0]) > 1e-12 or abs(finv[-1] - 1) > 1e-12:
            raise GridError("f^{-1} must map 0 to 0 and 1 to 1")
        grid = HGrid(m, np.tile(finv, (m + 1, 1)), validate=False)
        return cls(grid, certified=False, a_independent=True)

    # -- prices ------------------------------------------------------------
    def f_inverse(self, tau: float) -> float:
        if not -1e-12 <= tau <= 1 + 1e-12:
            raise DomainError("tau must lie in [0, 1]")
        tau = min(max(tau, 0.0), 1.0)
        return interpolate_h(self.grid, tau, tau)

    def f(self, x: float) -> float:
        """The unique tau with ``h(tau, tau) = x``."""
        lo, hi = self.diagonal[0], self.diagonal[-1]
        if not lo - 1e-12 <= x <= hi + 1e-12:
            raise DomainError(f"x={x} outside the range of f^{{-1}}")
        if x <= lo:
            return 0.0
        if x >= hi:
            return 1.0
        n = self.grid.n
        i = int(np.searchsorted(self.diagonal, x, side="right")) - 1
        i = min(max(i, 0), n - 1)
        a, b = i / n, (i + 1) / n
        return brentq(lambda t: self.f_inverse(t) - x, a, b, xtol=ROOT_TOL, rtol=4 * np.finfo(float).eps)

    def g(self, a: float, x: float) -> float:
        """``sup{theta in [0, 1] : h(f(a), theta) <= x}`` by bisection on theta."""
        if x < a - 1e-9:
            raise DomainError(f"g is only defined for x >= a (a={a}, x={x})")
        if x >= 1.0:
            return 1.0
        tau = self.f(min(a, 1.0))
        lo, hi = 0.0, 1.0
        if interpolate_h(self.grid, tau, 0.0) > x:
            return 0.0
        while hi - lo > 1e-13:
            mid = 0.5 * (lo + hi)
            if interpolate_h(self.grid, tau, mid) <= x:
                lo = mid
            else:
                hi = mid
        return lo

    def row(self, tau: float) -> np.ndarray:
        """Node values of ``theta -> h(tau, theta)``; g(a, .) is the piecewise-linear inverse of this row."""
        n, v = self.grid.n, self.grid.values
        if self.a_independent:
            return v[0].copy()
        i, z = _cell(tau, n)
        i, z = int(i), float(z)
        return (1 - z) * v[i] + z * v[i + 1]


def f_of(ps: PriceSystem, x: float) -> float:
    return ps.f(x)


def f_inverse(ps: PriceSystem, tau: float) -> float:
    return ps.f_inverse(tau)


def g_of(ps: PriceSystem, a: float, x: float) -> float:
    return ps.g(a, x)


@dataclass
class CertificationReport:
    gamma: float
    num_samples: int
    min_phi1: float | None = None
    min_phi2: float | None = None
    min_phi_general: float | None = None
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "num_samples": self.num_samples,
            "min_phi1": self.min_phi1,
            "min_phi2": self.min_phi2,
            "min_phi_general": self.min_phi_general,
            "pass": self.passed,
        }


def _sorted_pairs(rng, size, lo=0.0):
    a = rng.uniform(lo, 1.0, size)
    b = rng.uniform(lo, 1.0, size)
    return np.minimum(a, b), np.maximum(a, b)


def certify_continuous_feasibility(grid: HGrid, gamma: float, num_samples: int = 100_000,
                                   seed: int = 0, family: str = "fully",
                                   tol: float = 1e-6) -> CertificationReport:
    """Sample the continuous domains and report the minimum of each relevant gain bound.

    ``family`` is ``"fully"`` (phi1, phi2) or ``"general"`` (phi_general).
    """
    rng = np.random.default_rng(seed)
    report = CertificationReport(gamma=gamma, num_samples=num_samples)
    chunk = 50_000
    if family == "fully":
        m1 = m2 = math.inf
        left = num_samples
        while left > 0:
            size = min(chunk, left)
            left -= size
            tv, hv = _sorted_pairs(rng, size)
            m1 = min(m1, float(np.min(phi1(grid, tv, hv))))
            # rejection sampling for the four-parameter domain
            got = 0
            while got < size:
                tu, hu = _sorted_pairs(rng, 2 * size)
                tv2, hv2 = _sorted_pairs(rng, 2 * size)
                ok = tv2 >= 1 - hu
                take = np.flatnonzero(ok)[: size - got]
                got += take.size
                if take.size:
                    m2 = min(m2, float(np.min(phi2(grid, tu[take], hu[take], tv2[take], hv2[take]))))
        report.min_phi1, report.min_phi2 = m1, m2
        report.passed = m1 >= gamma - tol and m2 >= gamma - tol
    elif family == "general":
        mg = math.inf
        left = num_samples
        while left > 0:
            size = min(chunk, left)
            left -= size
            tv, hv = _sorted_pairs(rng, size)
            mg = min(mg, float(np.min(phi_general(grid, tv, hv))))
        report.min_phi_general = mg
        report.passed = mg >= gamma - tol
    else:
        raise ValueError(f"unknown family {family!r}")
    return report
