"""Scenario configuration: a sectioned key = value text format with units in key names.

Serialization is canonical (fixed section and key order, ``repr`` floats),
so dump -> load -> dump is byte-identical.
"""
from __future__ import annotations

import configparser
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import spectra
from .chain import CELL_STRETCH, DispersiveCell, LossBudget, Stage, reference_etalon, reference_loss_budget
from .detection import DetectorParams, SyncChain
from .errors import ParameterError, ScenarioError
from .memory import MemoryParams
from .source import QdParams


@dataclass(frozen=True)
class RunParams:
    n_triggers: int = 20_000_000_000
    seed: int = 1
    tau_s: tuple = (13.8,)  # ns
    tau_s_sigma: float = 0.3  # ns
    bin_width: float = 100.0  # ps
    background_per_bin: float = 30.0
    hist_start: float = -2.0  # ns
    hist_stop: float = 23.0  # ns
    temperature: float = 17.0  # K, QD operating temperature
    hbt_pulses: int = 10_000_000
    hbt_rep_rate: float = 80.0  # MHz
    hbt_photons_per_pulse: float = 0.2
    hbt_window: float = 40.0  # ns

    def __post_init__(self):
        object.__setattr__(self, "tau_s", tuple(float(t) for t in self.tau_s))
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.n_triggers < 1:
            out.append("n_triggers must be >= 1")
        if any(t < 0 for t in self.tau_s):
            out.append("tau_s values must be >= 0")
        if not self.bin_width > 0:
            out.append("bin_width must be > 0")
        if self.background_per_bin < 0:
            out.append("background_per_bin must be >= 0")
        if not self.hist_stop > self.hist_start:
            out.append("hist_stop must exceed hist_start")
        if self.hbt_pulses < 1:
            out.append("hbt_pulses must be >= 1")
        if not 0 < self.hbt_photons_per_pulse <= 1:
            out.append("hbt_photons_per_pulse must lie in (0, 1]")
        return out


@dataclass(frozen=True)
class Scenario:
    qd: QdParams = field(default_factory=QdParams)
    chain: LossBudget = field(default_factory=reference_loss_budget)
    cell: DispersiveCell = field(default_factory=lambda: DispersiveCell(60.0, CELL_STRETCH))
    etalon: spectra.Lineshape = field(default_factory=lambda: reference_etalon(-500.0))
    memory: MemoryParams = field(default_factory=MemoryParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    sync: SyncChain = field(default_factory=SyncChain)
    run: RunParams = field(default_factory=RunParams)

    def problems(self) -> list[str]:
        out = []
        window = self.sync.window
        for t in self.run.tau_s:
            if t > window:
                out.append(f"run: tau_s {t} ns exceeds the {window:g} ns inter-pulse window")
        for name in ("memory unit", "etalon"):
            try:
                self.chain.index(name)
            except KeyError:
                out.append(f"chain: stage {name!r} is required")
        return out

    def with_run(self, **changes) -> "Scenario":
        return replace(self, run=replace(self.run, **changes))


def reference_scenario() -> Scenario:
    return Scenario()


# ---------------------------------------------------------------------------
# seeds


def child_seed(seed: int, name: str) -> np.random.SeedSequence:
    """Independent, named random stream derived from the scenario seed."""
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))


# ---------------------------------------------------------------------------
# text format


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def _float_list(s: str) -> tuple:
    s = s.strip()
    return tuple(float(x) for x in s.split(",")) if s else ()


def _opt_float(s: str):
    return None if s.strip().lower() == "none" else float(s)


def _pairs(s: str) -> tuple:
    out = []
    for item in s.split(","):
        a, b = item.split(":")
        out.append((float(a), float(b)))
    return tuple(out)


def _fmt_pairs(pairs) -> str:
    return ", ".join(f"{_fmt(float(a))}:{_fmt(float(b))}" for a, b in pairs)


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected an integer, got {s}")
    return int(v)


# section -> [(key, attribute, parse, format)]
_QD = [
    ("tau_qd_ns", "tau_qd", float, _fmt),
    ("hom_fwhm_mhz", "hom_fwhm", float, _fmt),
    ("inhom_fwhm_mhz", "inhom_fwhm", float, _fmt),
    ("center_at_4k_mhz", "center_at_4k", float, _fmt),
    ("tuning_curve_k_mhz", "tuning_curve", _pairs, _fmt_pairs),
    ("fss_uev", "fss", float, _fmt),
    ("power_exponent_x", "power_exponent_x", float, _fmt),
    ("power_exponent_xx", "power_exponent_xx", float, _fmt),
    ("purity_g2", "purity_g2", float, _fmt),
    ("recapture_fraction", "recapture_fraction", _opt_float, _fmt),
    ("recapture_delay_ns", "recapture_delay", _opt_float, _fmt),
    ("untimed_background_rate_hz", "untimed_background_rate", float, _fmt),
    ("photons_per_pulse", "photons_per_pulse", float, _fmt),
]
_MEMORY = [
    ("acceptance_fwhm_mhz", "acceptance_fwhm", float, _fmt),
    ("acceptance_center_mhz", "acceptance_center", float, _fmt),
    ("intrinsic_efficiency", "intrinsic_efficiency", float, _fmt),
    ("readin_share", "readin_share", float, _fmt),
    ("temporal_match", "temporal_match", float, _fmt),
    ("dephase_time_1e_ns", "dephase_time_1e", float, _fmt),
    ("dephase_exponent", "dephase_exponent", float, _fmt),
    ("beat_amplitudes", "beat_amplitudes", _float_list, _fmt),
    ("beat_frequencies_mhz", "beat_frequencies", _float_list, _fmt),
    ("cell_temperature_c", "cell_temperature", float, _fmt),
    ("retrieval_fwhm_ns", "retrieval_fwhm", float, _fmt),
]
_DETECTOR = [
    ("irf_fwhm_ps", "irf_fwhm", float, _fmt),
    ("dark_rate_hz", "dark_rate", float, _fmt),
    ("efficiency", "efficiency", float, _fmt),
]
_SYNC = [
    ("laser_rate_mhz", "laser_rate", float, _fmt),
    ("pulse_pick_divisor", "pulse_pick_divisor", _int, _fmt),
    ("trigger_limit_mhz", "trigger_limit", float, _fmt),
]
_RUN = [
    ("n_triggers", "n_triggers", _int, _fmt),
    ("seed", "seed", _int, _fmt),
    ("tau_s_ns", "tau_s", _float_list, _fmt),
    ("tau_s_sigma_ns", "tau_s_sigma", float, _fmt),
    ("bin_width_ps", "bin_width", float, _fmt),
    ("background_per_bin", "background_per_bin", float, _fmt),
    ("hist_start_ns", "hist_start", float, _fmt),
    ("hist_stop_ns", "hist_stop", float, _fmt),
    ("temperature_k", "temperature", float, _fmt),
    ("hbt_pulses", "hbt_pulses", _int, _fmt),
    ("hbt_rep_rate_mhz", "hbt_rep_rate", float, _fmt),
    ("hbt_photons_per_pulse", "hbt_photons_per_pulse", float, _fmt),
    ("hbt_window_ns", "hbt_window", float, _fmt),
]
_SECTIONS = (
    ("qd", QdParams, _QD),
    ("memory", MemoryParams, _MEMORY),
    ("detector", DetectorParams, _DETECTOR),
    ("sync", SyncChain, _SYNC),
    ("run", RunParams, _RUN),
)


def dumps(scenario: Scenario) -> str:
    out = []
    for name, _cls, spec in _SECTIONS[:1]:
        out.append(_dump_section(name, getattr(scenario, name), spec))
    out.append(_dump_chain(scenario))
    for name, _cls, spec in _SECTIONS[1:]:
        out.append(_dump_section(name, getattr(scenario, name), spec))
    return "\n".join(out)


def _dump_section(name, obj, spec) -> str:
    lines = [f"[{name}]"]
    for key, attr, _parse, fmt in spec:
        lines.append(f"{key} = {fmt(getattr(obj, attr))}")
    return "\n".join(lines) + "\n"


def _dump_chain(s: Scenario) -> str:
    lines = ["[chain]", f"input_rate_hz = {_fmt(float(s.chain.input_rate))}"]
    for i, st in enumerate(s.chain.stages, 1):
        flag = "assumed" if st.assumed else "measured"
        lines.append(f"stage_{i:02d} = {st.name} | {_fmt(float(st.transmission))} | {flag} | {_fmt(float(st.sigma))}")
    lines.append(f"cell_temperature_c = {_fmt(float(s.cell.temperature))}")
    lines.append(f"cell_delay_stretch = {_fmt(float(s.cell.effective_delay_stretch))}")
    for k, v in s.etalon.to_params().items():
        lines.append(f"etalon_{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def dump(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps(scenario), encoding="utf-8")


def loads(text: str) -> Scenario:
    """Parse a scenario; raises ScenarioError listing every violated invariant."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError([f"syntax: {exc}"]) from exc
    problems: list[str] = []
    known = {name for name, _c, _s in _SECTIONS} | {"chain"}
    for sec in cp.sections():
        if sec not in known:
            problems.append(f"unknown section [{sec}]")
    built = {}
    for name, cls, spec in _SECTIONS:
        built[name] = _load_section(cp, name, cls, spec, problems)
    chain, cell, etalon = _load_chain(cp, problems)
    if problems:
        raise ScenarioError(problems)
    scenario = Scenario(
        qd=built["qd"], chain=chain, cell=cell, etalon=etalon,
        memory=built["memory"], detector=built["detector"], sync=built["sync"], run=built["run"],
    )
    extra = scenario.problems()
    if extra:
        raise ScenarioError(extra)
    return scenario


def load(path) -> Scenario:
    return loads(Path(path).read_text(encoding="utf-8"))


def _load_section(cp, name, cls, spec, problems):
    kwargs = {}
    keys = {k for k, *_ in spec}
    if cp.has_section(name):
        for key in cp[name]:
            if key not in keys:
                problems.append(f"{name}: unknown key {key!r}")
        for key, attr, parse, _fmt in spec:
            if key in cp[name]:
                try:
                    kwargs[attr] = parse(cp[name][key])
                except (ValueError, TypeError) as exc:
                    problems.append(f"{name}.{key}: {exc}")
    defaults = cls()
    merged = {f.name: kwargs.get(f.name, getattr(defaults, f.name)) for f in fields(cls)}
    try:
        return cls(**merged)
    except ParameterError:
        probe = object.__new__(cls)
        for k, v in merged.items():
            object.__setattr__(probe, k, v)
        try:
            msgs = probe.problems()
        except Exception as exc:  # malformed values confuse the checks themselves
            msgs = [str(exc)]
        problems.extend(f"{name}: {m}" for m in msgs)
        return None


def _load_chain(cp, problems):
    default = Scenario()
    if not cp.has_section("chain"):
        return default.chain, default.cell, default.etalon
    sec = cp["chain"]
    stages, input_rate = [], default.chain.input_rate
    cell_t, stretch = default.cell.temperature, default.cell.effective_delay_stretch
    etalon_params = {}
    for key in sec:
        val = sec[key]
        try:
            if key == "input_rate_hz":
                input_rate = float(val)
            elif key.startswith("stage_"):
                parts = [p.strip() for p in val.split("|")]
                if len(parts) != 4 or parts[2] not in ("assumed", "measured"):
                    raise ValueError("expected 'name | transmission | assumed|measured | sigma'")
                stages.append((key, Stage(parts[0], float(parts[1]), parts[2] == "assumed", float(parts[3]))))
            elif key == "cell_temperature_c":
                cell_t = float(val)
            elif key == "cell_delay_stretch":
                stretch = float(val)
            elif key.startswith("etalon_"):
                etalon_params[key[len("etalon_"):]] = val
            else:
                problems.append(f"chain: unknown key {key!r}")
        except ValueError as exc:
            problems.append(f"chain.{key}: {exc}")
    chain = cell = etalon = None
    stages.sort(key=lambda kv: kv[0])
    try:
        chain = LossBudget(tuple(s for _k, s in stages), input_rate) if stages else replace(default.chain, input_rate=input_rate)
    except ParameterError as exc:
        problems.append(f"chain: {exc}")
    try:
        cell = DispersiveCell(cell_t, stretch)
    except ParameterError as exc:
        problems.append(f"chain: {exc}")
    try:
        etalon = spectra.from_params(etalon_params) if etalon_params else default.etalon
    except (ParameterError, KeyError, ValueError) as exc:
        problems.append(f"chain.etalon: {exc}")
    return chain, cell, etalon
