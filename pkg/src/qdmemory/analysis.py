"""Fits and estimators that turn histograms, coincidences and scans into figures of merit."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, special, stats

from .detection import ArrivalHistogram, CoincidenceHistogram
from .errors import InsufficientDataError, ParameterError
from .spectra import FWHM_PER_SIGMA

SQRT2PI = math.sqrt(2.0 * math.pi)

DEFAULT_LEAK_WINDOW = (0.5, 10.0)
RETRIEVAL_HALF_WINDOW = 2.0  # ns


@dataclass(frozen=True)
class Measurement:
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or math.isnan(self.sigma):
            raise ParameterError("uncertainty must be >= 0")

    @classmethod
    def of(cls, x) -> "Measurement":
        if isinstance(x, Measurement):
            return x
        if isinstance(x, tuple):
            return cls(float(x[0]), float(x[1]))
        return cls(float(x), 0.0)

    @property
    def relative(self) -> float:
        return self.sigma / abs(self.value) if self.value else math.inf

    def __float__(self):
        return self.value

    def __str__(self):
        return f"{self.value:.6g} +- {self.sigma:.2g}"

    def to_dict(self):
        return {"value": self.value, "sigma": self.sigma}


@dataclass
class FitResult:
    parameters: dict[str, Measurement]
    covariance: np.ndarray
    residual_norm: float  # reduced chi-square
    converged: bool
    message: str = ""
    flags: set = field(default_factory=set)
    t: np.ndarray | None = None
    data: np.ndarray | None = None
    model: np.ndarray | None = None

    def __getitem__(self, name) -> Measurement:
        return self.parameters[name]

    @property
    def residual(self):
        return self.data - self.model


def _weighted_residuals(y, m, weighting):
    if weighting == "poisson":
        return (y - m) / np.sqrt(np.maximum(y, 1.0))
    if weighting == "ml":
        m = np.maximum(m, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            ylog = np.where(y > 0, y * np.log(y / m), 0.0)
        dev = np.maximum(2.0 * (m - y + ylog), 0.0)
        return np.sign(y - m) * np.sqrt(dev)
    if weighting == "none":
        return y - m
    raise ParameterError(f"unknown weighting {weighting!r}")


def least_squares_fit(model, t, y, p0, names, bounds=(-np.inf, np.inf), weighting="ml", max_nfev=2000):
    """Weighted nonlinear least squares; ``weighting`` is 'poisson', 'ml' or 'none'.

    'poisson' weights by 1/max(counts, 1); 'ml' minimizes the Poisson deviance,
    which gives the maximum-likelihood estimate; 'none' scales the covariance
    by the residual variance.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    res = optimize.least_squares(
        lambda p: _weighted_residuals(y, model(p, t), weighting),
        np.asarray(p0, dtype=float),
        bounds=bounds,
        x_scale="jac",
        max_nfev=max_nfev,
        method="trf",
    )
    jac = res.jac
    cov = np.linalg.pinv(jac.T @ jac, rcond=1e-13)
    dof = max(len(y) - len(p0), 1)
    chi2 = 2.0 * res.cost / dof
    if weighting == "none":
        cov = cov * chi2
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    params = {n: Measurement(float(v), float(s)) for n, v, s in zip(names, res.x, sig)}
    converged = bool(res.success) and res.status > 0
    return FitResult(params, cov, float(chi2), converged, res.message, set(), t, y, model(res.x, t))


def _window_mask(centers, window):
    return (centers >= window[0]) & (centers < window[1])


# ---------------------------------------------------------------------------
# storage histogram


def retrieval_model(p, t, bin_ns):
    """Exponential leakage from t=0 plus Gaussian retrieval peak plus flat background.

    Parameters: amplitude at t=0 (counts/bin), decay (ns), retrieved counts,
    peak center (ns), peak width sigma (ns), background (counts/bin).
    """
    a_exp, tau, n_ret, mu, sigma, c = p
    gauss = np.exp(-0.5 * ((t - mu) / sigma) ** 2) / (sigma * SQRT2PI)
    return a_exp * np.exp(-t / tau) + n_ret * bin_ns * gauss + c


RETRIEVAL_NAMES = ("A_exp", "tau_leak", "N_ret", "mu", "sigma", "C_bg")


@dataclass
class RetrievalFit:
    fit: FitResult
    n_ret: Measurement
    leak_window: tuple
    ret_window: tuple


def leak_window_for(tau_s: float, leak_window=DEFAULT_LEAK_WINDOW) -> tuple:
    """Leakage window shortened so it ends where the retrieval window starts."""
    stop = min(leak_window[1], tau_s - RETRIEVAL_HALF_WINDOW)
    if stop - leak_window[0] < 1.0:
        raise ParameterError(f"storage time {tau_s} ns leaves no room for a leakage window")
    return (leak_window[0], stop)


def fit_retrieval(
    hist: ArrivalHistogram,
    tau_s: float | None = None,
    leak_window=DEFAULT_LEAK_WINDOW,
    ret_window=None,
    weighting: str = "ml",
) -> RetrievalFit:
    """Joint fit of leakage (exponential) and retrieval (Gaussian) windows.

    N_ret is the area of the Gaussian component above the fitted constant
    background.  A negative area triggers a refit with the area clamped at
    zero, flagged ``clamped``.
    """
    if hist.total <= 0:
        raise InsufficientDataError("histogram is empty")
    centers, y = hist.centers, hist.counts.astype(float)
    if tau_s is None:
        later = centers > leak_window[1]
        if not later.any():
            raise InsufficientDataError("no bins after the leakage window")
        tau_s = float(centers[later][np.argmax(y[later])])
    if ret_window is None:
        ret_window = (tau_s - RETRIEVAL_HALF_WINDOW, tau_s + RETRIEVAL_HALF_WINDOW)
    if not (leak_window[1] <= ret_window[0] or ret_window[1] <= leak_window[0]):
        raise ParameterError("leakage and retrieval windows overlap")
    mask = _window_mask(centers, leak_window) | _window_mask(centers, ret_window)
    t, yy = centers[mask], y[mask]
    if len(t) < 8:
        raise InsufficientDataError("too few bins inside the fit windows")
    bin_ns = hist.bin_ns

    in_ret = _window_mask(t, ret_window)
    shoulders = in_ret & (np.abs(t - tau_s) > 1.0)
    c0 = float(np.median(yy[shoulders])) if shoulders.any() else float(np.percentile(yy, 10))
    in_leak = _window_mask(t, leak_window)
    first = yy[in_leak][:5].mean() - c0 if in_leak.any() else 1.0
    tau0 = 2.0
    a0 = max(first, 1.0) * math.exp(leak_window[0] / tau0)
    n0 = float(np.sum(yy[in_ret] - c0))
    width = ret_window[1] - ret_window[0]
    p0 = [a0, tau0, n0, tau_s, 0.4, c0]
    lower = [0.0, 0.05, -np.inf, ret_window[0], 0.05, -np.inf]
    upper = [np.inf, 50.0, np.inf, ret_window[1], width / 2.0, np.inf]
    model = lambda p, tt: retrieval_model(p, tt, bin_ns)
    fit = least_squares_fit(model, t, yy, p0, RETRIEVAL_NAMES, (lower, upper), weighting)
    if fit["N_ret"].value < 0:
        p1 = [fit[n].value for n in RETRIEVAL_NAMES]
        p1[2] = max(abs(n0), 1.0)
        lower[2] = 0.0
        fit = least_squares_fit(model, t, yy, p1, RETRIEVAL_NAMES, (lower, upper), weighting)
        fit.flags.add("clamped")
    return RetrievalFit(fit, fit["N_ret"], tuple(leak_window), tuple(ret_window))


def exponential_model(p, t):
    a, tau, c = p
    return a * np.exp(-t / tau) + c


@dataclass
class ReferenceFit:
    fit: FitResult
    n_input: Measurement


def fit_reference(
    hist: ArrivalHistogram, window=DEFAULT_LEAK_WINDOW, weighting: str = "ml", irf_fwhm: float = 0.0
) -> ReferenceFit:
    """Exponential fit of a control-off histogram; N_input is the model area from t=0.

    Past the IRF a Gaussian-blurred exponential is the bare one scaled by
    exp(s^2 / 2 tau^2), with s the IRF sigma.  Giving ``irf_fwhm`` (ps)
    removes that factor from the area.
    """
    centers, y = hist.centers, hist.counts.astype(float)
    mask = _window_mask(centers, window)
    t, yy = centers[mask], y[mask]
    if len(t) < 4 or yy.sum() <= 0:
        raise InsufficientDataError("reference histogram has no data in the window")
    c0 = float(np.median(y[centers < 0])) if (centers < 0).any() else 0.0
    tau0 = 1.5
    a0 = max(yy[:3].mean() - c0, 1.0) * math.exp(window[0] / tau0)
    fit = least_squares_fit(
        exponential_model, t, yy, [a0, tau0, c0], ("A", "tau", "C"),
        ([0.0, 0.01, -np.inf], [np.inf, 100.0, np.inf]), weighting,
    )
    a, tau = fit["A"].value, fit["tau"].value
    s2 = (irf_fwhm * 1e-3 / FWHM_PER_SIGMA) ** 2
    blur = math.exp(-s2 / (2.0 * tau * tau))
    area = a * tau * blur / hist.bin_ns
    grad = np.array([tau, a * (1.0 + s2 / (tau * tau)), 0.0]) * blur / hist.bin_ns
    sigma = float(np.sqrt(grad @ fit.covariance @ grad))
    return ReferenceFit(fit, Measurement(area, sigma))


# ---------------------------------------------------------------------------
# decay time


DECAY_NAMES = ("N", "tau", "t0", "C")


def decay_model(p, edges, irf_sigma):
    """Binned counts of an exponential decay convolved with a Gaussian IRF."""
    n, tau, t0, c = p
    if irf_sigma > 0:
        cdf = stats.exponnorm.cdf(edges, tau / irf_sigma, loc=t0, scale=irf_sigma)
    else:
        cdf = stats.expon.cdf(edges, loc=t0, scale=tau)
    return n * np.diff(cdf) + c


def fit_decay(hist: ArrivalHistogram, irf_fwhm: float, window=None, weighting: str = "ml") -> FitResult:
    """Lifetime from an exponential-times-IRF fit; ``irf_fwhm`` in ps.

    Adds the flag ``ill-conditioned`` when the lifetime is not resolved
    (relative uncertainty above 50 %, or tau and t0 almost fully
    correlated) and ``no-signal`` when the decay
    amplitude is not significant, in which case ``converged`` is False.
    """
    irf_sigma = irf_fwhm * 1e-3 / FWHM_PER_SIGMA
    edges, y = hist.edges, hist.counts.astype(float)
    if window is not None:
        keep = (edges[:-1] >= window[0]) & (edges[1:] <= window[1])
        idx = np.flatnonzero(keep)
        edges = edges[idx[0] : idx[-1] + 2]
        y = y[idx]
    centers = 0.5 * (edges[1:] + edges[:-1])
    if y.sum() <= 0:
        raise InsufficientDataError("histogram is empty")
    c0 = float(np.percentile(y, 5))
    signal_counts = np.clip(y - c0, 0.0, None)
    n0 = max(float(signal_counts.sum()), 1.0)
    i_peak = int(np.argmax(y))
    t_peak = float(centers[i_peak])
    after = centers >= t_peak
    mean_delay = float(np.sum(signal_counts[after] * (centers[after] - t_peak)) / max(signal_counts[after].sum(), 1e-12))
    tau0 = max(mean_delay, 10 * (edges[1] - edges[0]))
    t00 = t_peak - min(irf_sigma, tau0)
    span = edges[-1] - edges[0]

    def model(p, _t):
        return decay_model(p, edges, irf_sigma)

    fit = least_squares_fit(
        model, centers, y, [n0, tau0, t00, c0], DECAY_NAMES,
        ([0.0, 1e-3, edges[0] - span, -np.inf], [np.inf, 10 * span, edges[-1], np.inf]),
        weighting,
    )
    tau = fit["tau"]
    cov = fit.covariance
    # when the IRF swamps the decay only t0 + tau is constrained
    denom = math.sqrt(max(cov[1, 1] * cov[2, 2], 0.0))
    corr = abs(cov[1, 2]) / denom if denom > 0 else 1.0
    if not math.isfinite(tau.sigma) or tau.relative > 0.5 or corr > 0.99:
        fit.flags.add("ill-conditioned")
    n = fit["N"]
    # a degenerate fit can report a tiny N with a tinier sigma; also compare with shot noise
    shot = math.sqrt(max(n.value, 0.0) + max(fit["C"].value, 0.0) * y.size)
    if n.value <= 3 * n.sigma or n.value <= 3 * shot:
        fit.flags.add("no-signal")
        fit.converged = False
    if edges[-1] - fit["t0"].value < 5 * tau.value:
        fit.flags.add("short-window")
    return fit


# ---------------------------------------------------------------------------
# g2


@dataclass
class G2Result:
    g2_zero: Measurement
    central_area: float
    side_areas: np.ndarray
    side_delays: np.ndarray


def g2_area(
    coincidences: CoincidenceHistogram,
    rep_period: float | None = None,
    integration_window: float | None = None,
    n_side: int = 2,
) -> G2Result:
    """Central-peak area over mean side-peak area of a pulsed HBT histogram.

    Each peak is summed over ``integration_window`` ns centered on it; ``n_side``
    peaks are used on each side.
    """
    period = rep_period or coincidences.rep_period
    width = integration_window or period
    if width > period + 1e-9:
        raise ParameterError("integration window must not exceed the repetition period")
    if n_side < 2:
        raise ParameterError("at least two side peaks per side are required")
    centers, counts = coincidences.centers, coincidences.counts
    reach = n_side * period + width / 2.0
    if centers[0] > -reach + coincidences.bin_ns or centers[-1] < reach - coincidences.bin_ns:
        raise InsufficientDataError(f"histogram does not cover +-{n_side} side peaks")

    def peak_area(k):
        lo, hi = k * period - width / 2.0, k * period + width / 2.0
        return float(counts[(centers >= lo) & (centers < hi)].sum())

    ks = np.array([k for k in range(-n_side, n_side + 1) if k != 0])
    sides = np.array([peak_area(k) for k in ks])
    mean_side = sides.mean()
    if mean_side <= 0:
        raise InsufficientDataError("side peaks are empty")
    central = peak_area(0)
    g = central / mean_side
    total_side = sides.sum()
    sigma = g * math.sqrt(1.0 / max(central, 1.0) + 1.0 / total_side) if central > 0 else 1.0 / mean_side
    return G2Result(Measurement(g, sigma), central, sides, ks * period)


# ---------------------------------------------------------------------------
# scanning Fabry-Perot linewidth


def _peak_shape(model: str, x, width, width2=None):
    """Unit-peak shape in sample units."""
    if model == "gaussian":
        return np.exp(-4.0 * math.log(2.0) * (x / width) ** 2)
    if model == "lorentzian":
        return 1.0 / (1.0 + (2.0 * x / width) ** 2)
    if model == "voigt":
        sg, gl = width / FWHM_PER_SIGMA, width2 / 2.0
        return special.voigt_profile(x, sg, gl) / special.voigt_profile(0.0, sg, gl)
    raise ParameterError(f"unknown line model {model!r}")


@dataclass
class LinewidthResult:
    fwhm: Measurement  # GHz
    ghz_per_sample: Measurement
    peak_positions: np.ndarray
    fit: FitResult
    model: str = "gaussian"


def fpi_linewidth(
    trace,
    fsr: float,
    model: str = "gaussian",
    instrument_fwhm: float | None = None,
    prominence: float = 0.3,
) -> LinewidthResult:
    """Linewidth (GHz) from a scanning Fabry-Perot trace spanning at least two orders.

    The order spacing in scan samples, identified with ``fsr`` (GHz),
    calibrates the axis.  All orders are fitted together with a common width.
    With ``instrument_fwhm`` the instrument width is removed (in quadrature
    for Gaussian lines, linearly for Lorentzian ones).
    """
    trace = np.asarray(trace, dtype=float)
    if trace.ndim == 2:
        x, y = trace[:, 0], trace[:, 1]
    else:
        x, y = np.arange(len(trace), dtype=float), trace
    span = y.max() - y.min()
    if span <= 0:
        raise InsufficientDataError("trace is flat; calibration impossible")
    peaks, _ = signal.find_peaks(y, prominence=prominence * span)
    if len(peaks) < 2:
        raise InsufficientDataError("fewer than two transmission orders; calibration impossible")
    pos = x[peaks]
    spacing0 = float(np.mean(np.diff(pos)))
    half = y.min() + span / 2.0
    above = np.flatnonzero(y[: peaks[0] + 1] < half)
    w0 = 2.0 * (x[peaks[0]] - x[above[-1]]) if len(above) else spacing0 / 4.0
    ks = np.arange(-1, len(peaks) + 1)
    offset0 = float(np.percentile(y, 2))

    if model == "voigt":
        names = ("A", "p0", "spacing", "w_gauss", "w_lor", "C")
        p0 = [span, pos[0], spacing0, 0.7 * w0, 0.3 * w0, offset0]
    else:
        names = ("A", "p0", "spacing", "width", "C")
        p0 = [span, pos[0], spacing0, w0, offset0]

    def f(p, xx):
        if model == "voigt":
            a, c0, s, wg, wl, c = p
            shape = lambda d: _peak_shape("voigt", d, wg, wl)
        else:
            a, c0, s, w, c = p
            shape = lambda d: _peak_shape(model, d, w)
        out = np.full_like(xx, c, dtype=float)
        for k in ks:
            out += a * shape(xx - (c0 + k * s))
        return out

    fit = least_squares_fit(f, x, y, p0, names, weighting="none")
    s = fit["spacing"]
    scale = Measurement(fsr / s.value, fsr * s.sigma / s.value**2)
    if model == "voigt":
        wg, wl = fit["w_gauss"].value, fit["w_lor"].value
        width = 0.5346 * wl + math.sqrt(0.2166 * wl**2 + wg**2)
        # the two widths are strongly anti-correlated; propagate with the covariance
        root = math.sqrt(0.2166 * wl**2 + wg**2)
        grad = np.array([wg / root, 0.5346 + 0.2166 * wl / root])
        cov = fit.covariance[np.ix_([3, 4], [3, 4])]
        w_rel = math.sqrt(max(float(grad @ cov @ grad), 0.0)) / width
    else:
        width = fit["width"].value
        w_rel = fit["width"].relative
    fwhm = width * scale.value
    rel = math.hypot(w_rel, s.relative)
    if instrument_fwhm:
        if model == "lorentzian":
            fwhm = fwhm - instrument_fwhm
        else:
            fwhm = math.sqrt(max(fwhm**2 - instrument_fwhm**2, 0.0))
    return LinewidthResult(Measurement(fwhm, abs(fwhm) * rel), scale, pos, fit, model)


# ---------------------------------------------------------------------------
# derived figures


def efficiencies(n_ret, n_input, t_chain):
    """End-to-end and internal efficiency with first-order uncertainty propagation.

    Arguments may be floats or Measurements (or (value, sigma) tuples).
    Counts given as bare floats get Poisson uncertainties.
    """
    if not isinstance(n_ret, (Measurement, tuple)):
        n_ret = Measurement(float(n_ret), math.sqrt(max(float(n_ret), 0.0)))
    if not isinstance(n_input, (Measurement, tuple)):
        n_input = Measurement(float(n_input), math.sqrt(max(float(n_input), 0.0)))
    n_ret, n_input, t_chain = Measurement.of(n_ret), Measurement.of(n_input), Measurement.of(t_chain)
    if n_input.value <= 0:
        raise ParameterError("N_input must be > 0")
    if t_chain.value <= 0:
        raise ParameterError("T_chain must be > 0")
    e2e = n_ret.value / n_input.value
    rel_ret = n_ret.sigma / n_ret.value if n_ret.value else 0.0
    rel_e2e = math.hypot(rel_ret, n_input.sigma / n_input.value)
    sigma_e2e = abs(e2e) * rel_e2e if n_ret.value else n_ret.sigma / n_input.value
    internal = e2e / t_chain.value
    sigma_int = math.hypot(sigma_e2e / t_chain.value, internal * t_chain.sigma / t_chain.value)
    return Measurement(e2e, sigma_e2e), Measurement(internal, sigma_int)


def time_bandwidth(tau_s, tau_qd) -> Measurement:
    """Storage time over emitter lifetime, with propagated uncertainty."""
    tau_s, tau_qd = Measurement.of(tau_s), Measurement.of(tau_qd)
    if tau_qd.value <= 0:
        raise ParameterError("tau_qd must be > 0")
    b = tau_s.value / tau_qd.value
    rel_s = tau_s.sigma / tau_s.value if tau_s.value else 0.0
    return Measurement(b, abs(b) * math.hypot(rel_s, tau_qd.sigma / tau_qd.value))


NOT_COMPUTED = "not computed"

REPORT_FIELDS = (
    "n_input", "n_ret", "eta_e2e", "T_chain", "eta_int", "g2_zero", "tau_fit", "fwhm", "tbp", "tau_s",
)


@dataclass
class AnalysisReport:
    n_input: Measurement | None = None
    n_ret: Measurement | None = None
    eta_e2e: Measurement | None = None
    T_chain: Measurement | None = None
    eta_int: Measurement | None = None
    g2_zero: Measurement | None = None
    tau_fit: Measurement | None = None  # ns
    fwhm: Measurement | None = None  # GHz
    tbp: Measurement | None = None
    tau_s: Measurement | None = None  # ns
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {}
        for name in REPORT_FIELDS:
            v = getattr(self, name)
            out[name] = v.to_dict() if v is not None else NOT_COMPUTED
        out["notes"] = list(self.notes)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_table(self) -> str:
        units = {"tau_fit": "ns", "fwhm": "GHz", "tau_s": "ns", "n_input": "counts", "n_ret": "counts"}
        lines = [f"{'quantity':<10} {'value':>14} {'sigma':>12}  unit"]
        for name in REPORT_FIELDS:
            v = getattr(self, name)
            if v is None:
                lines.append(f"{name:<10} {NOT_COMPUTED:>14} {'':>12}")
            else:
                lines.append(f"{name:<10} {v.value:>14.6g} {v.sigma:>12.3g}  {units.get(name, '')}")
        return "\n".join(lines)


def build_report(
    reference: ArrivalHistogram | None = None,
    storage: ArrivalHistogram | None = None,
    tau_s: float | Measurement | None = None,
    t_chain: float | Measurement | None = None,
    irf_fwhm: float = 93.0,
    coincidences: CoincidenceHistogram | None = None,
    fpi_trace=None,
    fsr: float | None = None,
    leak_window=DEFAULT_LEAK_WINDOW,
    weighting: str = "ml",
):
    """Assemble every report field computable from the given inputs.

    Returns the report and a dict of the underlying fits.
    """
    report = AnalysisReport()
    fits: dict = {}
    if tau_s is not None:
        report.tau_s = Measurement.of(tau_s)
    if t_chain is not None:
        report.T_chain = Measurement.of(t_chain)
    if reference is not None:
        ref = fit_reference(reference, leak_window, weighting, irf_fwhm)
        fits["reference"] = ref.fit
        report.n_input = ref.n_input
        decay = fit_decay(reference, irf_fwhm, weighting=weighting)
        fits["decay"] = decay
        report.tau_fit = decay["tau"]
    if storage is not None:
        ts = report.tau_s.value if report.tau_s is not None else None
        lw = leak_window_for(ts, leak_window) if ts is not None else leak_window
        ret = fit_retrieval(storage, ts, lw, weighting=weighting)
        fits["retrieval"] = ret.fit
        report.n_ret = ret.n_ret
        if report.tau_s is None:
            report.tau_s = ret.fit["mu"]
            report.notes.append("tau_s taken from the fitted retrieval peak")
        if "clamped" in ret.fit.flags:
            report.notes.append("retrieval amplitude clamped at zero")
    if report.n_ret is not None and report.n_input is not None:
        chain = report.T_chain if report.T_chain is not None else Measurement(1.0, 0.0)
        e2e, internal = efficiencies(report.n_ret, report.n_input, chain)
        report.eta_e2e = e2e
        if report.T_chain is not None:
            report.eta_int = internal
    if report.tau_s is not None and report.tau_fit is not None:
        report.tbp = time_bandwidth(report.tau_s, report.tau_fit)
    if coincidences is not None:
        report.g2_zero = g2_area(coincidences).g2_zero
    if fpi_trace is not None:
        if fsr is None:
            raise ParameterError("an FPI trace needs its free spectral range")
        lw = fpi_linewidth(fpi_trace, fsr)
        fits["fpi"] = lw.fit
        report.fwhm = lw.fwhm
    return report, fits
