"""Normalized lineshapes over optical detuning.

All frequencies are detunings in MHz from the Cs D1 F=4 -> F'=3 line
(``REFERENCE_LINE``).  Lorentzian, Gaussian, Voigt, rectangular and tabulated
shapes are unit-area densities (1/MHz); the Airy shape is a periodic
transmission with peak value 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize, special

from .errors import ParameterError, UnsupportedCombinationError

REFERENCE_LINE = "Cs D1 F=4->F'=3"

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

DENSITY_KINDS = ("lorentzian", "gaussian", "voigt", "rectangular", "tabulated")
KINDS = DENSITY_KINDS + ("airy",)

# quadrature span in units of summed FWHM
SPAN_FACTOR = 50.0


@dataclass(frozen=True)
class Lineshape:
    kind: str
    center: float = 0.0
    fwhm: float = 1.0
    fsr: float | None = None
    lorentzian_fwhm: float | None = None
    gaussian_fwhm: float | None = None
    grid: np.ndarray | None = field(default=None, compare=False, repr=False)
    table: np.ndarray | None = field(default=None, compare=False, repr=False)
    reference: str = REFERENCE_LINE

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            return [f"unknown lineshape kind {self.kind!r}"]
        if not math.isfinite(self.center):
            out.append("center must be finite")
        if not (self.fwhm > 0 and math.isfinite(self.fwhm)):
            out.append(f"{self.kind}: fwhm must be > 0, got {self.fwhm}")
        if self.kind == "airy":
            if self.fsr is None or not self.fsr > self.fwhm:
                out.append("airy: fsr must exceed fwhm")
        if self.kind == "voigt":
            if not (self.lorentzian_fwhm and self.lorentzian_fwhm > 0):
                out.append("voigt: lorentzian_fwhm must be > 0")
            if not (self.gaussian_fwhm and self.gaussian_fwhm > 0):
                out.append("voigt: gaussian_fwhm must be > 0")
        if self.kind == "tabulated":
            if self.grid is None or self.table is None or len(self.grid) < 3:
                out.append("tabulated: needs a grid of at least 3 points")
            elif np.any(self.table < 0):
                out.append("tabulated: density must be non-negative")
        return out

    @property
    def is_density(self) -> bool:
        return self.kind != "airy"

    def __call__(self, nu):
        return evaluate(self, nu)

    @property
    def peak(self) -> float:
        return float(evaluate(self, self.center))

    def transmission(self, nu):
        """Shape rescaled to unit peak, usable as a filter transmission."""
        if self.kind == "airy":
            return evaluate(self, nu)
        return evaluate(self, nu) / self.peak

    def shifted(self, center: float) -> "Lineshape":
        if self.kind == "tabulated":
            return tabulated(self.grid - self.center + center, self.table)
        return _replace(self, center=center)

    def to_params(self) -> dict[str, float | str]:
        """Flat key/value form with units in the key names."""
        if self.kind == "tabulated":
            raise UnsupportedCombinationError("tabulated lineshapes are not serializable")
        params: dict[str, float | str] = {"kind": self.kind, "center_mhz": self.center}
        if self.kind == "voigt":
            params["lorentzian_fwhm_mhz"] = self.lorentzian_fwhm
            params["gaussian_fwhm_mhz"] = self.gaussian_fwhm
        else:
            params["fwhm_mhz"] = self.fwhm
        if self.kind == "airy":
            params["fsr_mhz"] = self.fsr
        return params


def _replace(shape: Lineshape, **changes) -> Lineshape:
    from dataclasses import replace

    return replace(shape, **changes)


def from_params(params: dict) -> Lineshape:
    kind = str(params["kind"])
    center = float(params.get("center_mhz", 0.0))
    if kind == "voigt":
        return voigt(float(params["lorentzian_fwhm_mhz"]), float(params["gaussian_fwhm_mhz"]), center)
    fwhm = float(params["fwhm_mhz"])
    if kind == "airy":
        return airy(fwhm, float(params["fsr_mhz"]), center)
    if kind == "lorentzian":
        return lorentzian(fwhm, center)
    if kind == "gaussian":
        return gaussian(fwhm, center)
    if kind == "rectangular":
        return rectangular(fwhm, center)
    raise ParameterError(f"unknown lineshape kind {kind!r}")


def lorentzian(fwhm: float, center: float = 0.0) -> Lineshape:
    return Lineshape("lorentzian", center, fwhm)


def gaussian(fwhm: float, center: float = 0.0) -> Lineshape:
    return Lineshape("gaussian", center, fwhm)


def rectangular(width: float, center: float = 0.0) -> Lineshape:
    return Lineshape("rectangular", center, width)


def airy(fwhm: float, fsr: float, center: float = 0.0) -> Lineshape:
    return Lineshape("airy", center, fwhm, fsr=fsr)


def voigt(lorentzian_fwhm: float, gaussian_fwhm: float, center: float = 0.0) -> Lineshape:
    if not (lorentzian_fwhm > 0 and gaussian_fwhm > 0):
        raise ParameterError("voigt component widths must be > 0")
    return Lineshape(
        "voigt",
        center,
        voigt_fwhm(lorentzian_fwhm, gaussian_fwhm),
        lorentzian_fwhm=lorentzian_fwhm,
        gaussian_fwhm=gaussian_fwhm,
    )


def tabulated(grid, density) -> Lineshape:
    """Density sampled on ``grid``, renormalized to unit area; zero outside."""
    grid = np.asarray(grid, dtype=float)
    density = np.asarray(density, dtype=float)
    order = np.argsort(grid)
    grid, density = grid[order], density[order]
    area = integrate.trapezoid(density, grid)
    if not area > 0:
        raise ParameterError("tabulated density has zero area")
    density = density / area
    i = int(np.argmax(density))
    center = float(grid[i])
    fwhm = _tabulated_fwhm(grid, density)
    return Lineshape("tabulated", center, fwhm, grid=grid, table=density)


def _tabulated_fwhm(grid, density) -> float:
    i = int(np.argmax(density))
    half = density[i] / 2.0
    left = np.nonzero(density[: i + 1] < half)[0]
    right = np.nonzero(density[i:] < half)[0]
    if len(left) == 0 or len(right) == 0:
        return float(grid[-1] - grid[0])
    a = left[-1]
    lo = np.interp(half, [density[a], density[a + 1]], [grid[a], grid[a + 1]])
    b = i + right[0]
    hi = np.interp(half, [density[b], density[b - 1]], [grid[b], grid[b - 1]])
    return float(hi - lo)


@lru_cache(maxsize=256)
def voigt_fwhm(lorentzian_fwhm: float, gaussian_fwhm: float) -> float:
    """FWHM of a Voigt profile, found by root bracketing on the profile itself."""
    sigma = gaussian_fwhm / FWHM_PER_SIGMA
    gamma = lorentzian_fwhm / 2.0
    peak = special.voigt_profile(0.0, sigma, gamma)
    upper = lorentzian_fwhm + gaussian_fwhm
    half = optimize.brentq(
        lambda x: special.voigt_profile(x, sigma, gamma) - peak / 2.0,
        0.0,
        upper,
        xtol=1e-12 * upper,
        rtol=1e-14,
    )
    return 2.0 * half


def gaussian_width_for_total(lorentzian_fwhm: float, total_fwhm: float) -> float:
    """Gaussian FWHM that gives a Voigt of ``total_fwhm`` with the given Lorentzian part."""
    if not total_fwhm > lorentzian_fwhm:
        raise ParameterError("total FWHM must exceed the Lorentzian FWHM")
    return optimize.brentq(
        lambda g: voigt_fwhm(lorentzian_fwhm, g) - total_fwhm,
        1e-9 * total_fwhm,
        total_fwhm,
        xtol=1e-10 * total_fwhm,
    )


def evaluate(shape: Lineshape, nu):
    """Spectral density (1/MHz) or, for ``airy``, transmission at ``nu``."""
    x = np.asarray(nu, dtype=float) - shape.center
    kind = shape.kind
    if kind == "lorentzian":
        hw = shape.fwhm / 2.0
        out = (hw / math.pi) / (x * x + hw * hw)
    elif kind == "gaussian":
        s = shape.fwhm / FWHM_PER_SIGMA
        out = np.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
    elif kind == "voigt":
        out = special.voigt_profile(
            x, shape.gaussian_fwhm / FWHM_PER_SIGMA, shape.lorentzian_fwhm / 2.0
        )
    elif kind == "airy":
        coeff = 1.0 / math.sin(math.pi * shape.fwhm / (2.0 * shape.fsr)) ** 2
        out = 1.0 / (1.0 + coeff * np.sin(math.pi * x / shape.fsr) ** 2)
    elif kind == "rectangular":
        out = np.where(np.abs(x) <= shape.fwhm / 2.0, 1.0 / shape.fwhm, 0.0)
    else:
        out = np.interp(x + shape.center, shape.grid, shape.table, left=0.0, right=0.0)
    return out if out.ndim else float(out)


def measure_fwhm(shape: Lineshape) -> float:
    """Numerically measured FWHM of any shape, by bisection on the evaluated profile."""
    if shape.kind == "tabulated":
        return _tabulated_fwhm(shape.grid, shape.table)
    if shape.kind == "rectangular":
        return shape.fwhm
    peak = shape.peak
    upper = shape.fwhm * 10.0
    if shape.kind == "airy":
        upper = shape.fsr / 2.0
    half = optimize.brentq(
        lambda x: evaluate(shape, shape.center + x) - peak / 2.0,
        0.0,
        upper,
        xtol=1e-12 * shape.fwhm,
    )
    return 2.0 * half


def convolve(a: Lineshape, b: Lineshape) -> Lineshape:
    """Convolution of two Lorentzian/Gaussian/Voigt densities.

    Lorentzian widths add linearly, Gaussian widths add in quadrature and
    centers add.
    """
    la, ga = _components(a)
    lb, gb = _components(b)
    lw = la + lb
    gw = math.hypot(ga, gb)
    center = a.center + b.center
    if gw == 0.0:
        return lorentzian(lw, center)
    if lw == 0.0:
        return gaussian(gw, center)
    return voigt(lw, gw, center)


def _components(shape: Lineshape) -> tuple[float, float]:
    if shape.kind == "lorentzian":
        return shape.fwhm, 0.0
    if shape.kind == "gaussian":
        return 0.0, shape.fwhm
    if shape.kind == "voigt":
        return shape.lorentzian_fwhm, shape.gaussian_fwhm
    raise UnsupportedCombinationError(f"cannot convolve a {shape.kind} lineshape")


@dataclass(frozen=True)
class OverlapResult:
    value: float
    abs_error_estimate: float
    out_of_range: bool = False

    def __float__(self):
        return self.value


Filter = Union[Lineshape, Callable[[np.ndarray], np.ndarray]]


def tail_mass(shape: Lineshape, lo: float, hi: float) -> float:
    """Probability mass of a density outside ``[lo, hi]``."""
    a, b = lo - shape.center, hi - shape.center
    if shape.kind == "lorentzian":
        hw = shape.fwhm / 2.0
        return 1.0 - (math.atan(b / hw) - math.atan(a / hw)) / math.pi
    if shape.kind == "gaussian":
        s = shape.fwhm / FWHM_PER_SIGMA * math.sqrt(2.0)
        return 0.5 * (special.erfc(b / s) + special.erfc(-a / s))
    if shape.kind == "voigt":
        f = lambda x: evaluate(shape, x)
        scale = max(hi - lo, shape.fwhm) / 2.0
        return _tail_integral(f, lo, -1, scale)[0] + _tail_integral(f, hi, +1, scale)[0]
    if shape.kind == "rectangular":
        w = shape.fwhm / 2.0
        inside = max(0.0, min(b, w) - max(a, -w))
        return 1.0 - inside / shape.fwhm
    if shape.kind == "tabulated":
        g, t = shape.grid, shape.table
        inside = (g >= lo) & (g <= hi)
        if inside.sum() < 2:
            return 1.0
        return max(0.0, 1.0 - integrate.trapezoid(t[inside], g[inside]))
    raise UnsupportedCombinationError("tail mass is defined for densities only")


def _tail_integral(f, edge: float, direction: int, scale: float):
    """Integral of ``f`` from ``edge`` to +-infinity.

    Uses x = edge + direction*scale*(1/u - 1) on u in (0, 1], which keeps
    1/x^2 tails bounded at u -> 0.
    """
    g = lambda u: f(edge + direction * scale * (1.0 / u - 1.0)) * scale / (u * u)
    return integrate.quad(g, 0.0, 1.0, limit=200)


def _breakpoints(center: float, width: float, lo: float, hi: float) -> list[float]:
    pts = [center + k * width for k in (-20, -5, -2, -0.5, 0.0, 0.5, 2, 5, 20)]
    return [p for p in pts if lo < p < hi]


def area(shape: Lineshape, span_factor: float = SPAN_FACTOR) -> float:
    """Integral of a density over ``center +- span_factor*fwhm`` plus its analytic tails."""
    if shape.kind == "tabulated":
        return float(integrate.trapezoid(shape.table, shape.grid))
    lo = shape.center - span_factor * shape.fwhm
    hi = shape.center + span_factor * shape.fwhm
    pts = _breakpoints(shape.center, shape.fwhm, lo, hi)
    inner = integrate.quad(lambda x: evaluate(shape, x), lo, hi, points=pts, limit=500)[0]
    return inner + tail_mass(shape, lo, hi)


def filtered_fraction(spectrum: Lineshape, filt: Filter, span_factor: float = SPAN_FACTOR) -> OverlapResult:
    """Fraction of ``spectrum`` passing a peak-1 filter: integral of spectrum*transmission.

    ``filt`` is either a Lineshape (densities are rescaled to unit peak) or
    any vectorized callable returning a transmission.
    """
    if not spectrum.is_density:
        raise ParameterError("spectrum must be a density")
    if isinstance(filt, Lineshape):
        trans = filt.transmission
        f_center, f_width = filt.center, filt.fwhm
        periodic = filt.kind == "airy"
        if periodic:
            f_width = filt.fwhm
    else:
        trans = filt
        f_center, f_width = spectrum.center, 0.0
        periodic = False
    half = span_factor * (spectrum.fwhm + f_width)
    if abs(spectrum.center - f_center) > half:
        return OverlapResult(0.0, 0.0, out_of_range=True)
    lo = min(spectrum.center, f_center) - half
    hi = max(spectrum.center, f_center) + half
    pts = _breakpoints(spectrum.center, spectrum.fwhm, lo, hi)
    if f_width:
        pts += _breakpoints(f_center, f_width, lo, hi)
    if isinstance(filt, Lineshape) and filt.kind == "rectangular":
        pts += [p for p in (f_center - filt.fwhm / 2, f_center + filt.fwhm / 2) if lo < p < hi]
    pts = sorted(set(pts))
    integrand = lambda x: evaluate(spectrum, x) * trans(x)
    value, err = integrate.quad(integrand, lo, hi, points=pts, limit=1000)
    if periodic:
        # mean Airy transmission over one period times the spectral tail mass
        coeff = 1.0 / math.sin(math.pi * filt.fwhm / (2.0 * filt.fsr)) ** 2
        value += tail_mass(spectrum, lo, hi) / math.sqrt(1.0 + coeff)
    elif spectrum.kind in ("rectangular", "tabulated"):
        pass
    else:
        for edge, direction in ((lo, -1), (hi, +1)):
            v, e = _tail_integral(integrand, edge, direction, half)
            value += v
            err += e
    return OverlapResult(min(max(value, 0.0), 1.0), abs(err))
