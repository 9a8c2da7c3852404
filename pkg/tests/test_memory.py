import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdmemory import memory, source
from qdmemory.errors import ParameterError

ETA0_QD = 0.15 * 0.66 * 0.10294473639537098


@pytest.fixture(scope="module")
def wp():
    return source.build_wavepacket(source.QdParams())


def test_readin_split(wp):
    mem = memory.MemoryParams()
    out = memory.readin(wp, mem)
    assert out.spectral_overlap == pytest.approx(0.10294473639537098, rel=1e-8)
    assert out.stored_fraction == pytest.approx(math.sqrt(0.15) * 0.66 * out.spectral_overlap)
    assert out.leaked_fraction == pytest.approx(1.0 - out.stored_fraction)
    assert mem.readin_efficiency * mem.readout_efficiency == pytest.approx(0.15)
    assert out.leakage_decay == 1.39


def test_zero_flux_stores_nothing(wp):
    from dataclasses import replace

    out = memory.readin(replace(wp, mean_photon_flux=0.0), memory.MemoryParams())
    assert out.stored_fraction == 0.0 and out.leaked_fraction == 0.0
    r = memory.retrieve(out, memory.MemoryParams(), 13.8)
    assert r.fraction == 0.0


def test_internal_efficiency_at_zero_delay_is_eta0(wp):
    mem = memory.MemoryParams()
    assert memory.internal_efficiency(wp, mem, 0.0) == pytest.approx(ETA0_QD, rel=1e-8)
    assert memory.retrieval_efficiency(mem, 0.0) == pytest.approx(0.15)


def test_calibrated_curve_shape(wp):
    mem = memory.MemoryParams()
    eta = lambda t: float(memory.internal_efficiency(wp, mem, t))
    assert eta(15.8) > eta(13.8) and eta(15.8) > eta(19.8) and eta(15.8) > eta(11.8)
    assert eta(15.8) == pytest.approx(0.00568, abs=5e-5)
    grid = np.arange(5.0, 20.0 + 1e-9, 0.1)
    curve = memory.internal_efficiency(wp, mem, grid)
    assert curve.max() <= eta(15.8) * 1.001
    assert 15.0 <= grid[np.argmax(curve)] <= 16.0


def test_envelope_bound_on_fine_grid():
    mem = memory.MemoryParams()
    grid = np.arange(0.0, 40.0 + 1e-9, 0.1)
    eta = memory.retrieval_efficiency(mem, grid)
    assert np.all(eta <= 0.15 * np.exp(-((grid / 32.0) ** 2)) * (1 + 1e-12))


def test_no_beats_gives_gaussian_dephasing():
    mem = memory.MemoryParams(beat_amplitudes=(1.0,), beat_frequencies=(0.0,))
    assert memory.retrieval_efficiency(mem, 32.0) == pytest.approx(0.15 / math.e)


def test_retrieve_profile():
    mem = memory.MemoryParams()
    out = memory.StorageOutcome(1.0, 0.1, 0.05, 0.95, 1.39, mem.readout_efficiency)
    r = memory.retrieve(out, mem, 13.8)
    assert r.center == 13.8
    assert r.sigma * 2 * math.sqrt(2 * math.log(2)) == pytest.approx(1.0)
    assert r.spectral.fwhm == 560.0 and r.spectral.center == -500.0
    assert not r.overlaps_next_pulse
    assert memory.retrieve(out, mem, 24.0).overlaps_next_pulse
    t = np.linspace(0, 30, 30001)
    assert np.sum(r.density(t)) * (t[1] - t[0]) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ParameterError):
        memory.retrieve(out, mem, -1.0)


@pytest.mark.parametrize(
    "kw",
    [
        dict(acceptance_fwhm=0.0),
        dict(intrinsic_efficiency=1.5),
        dict(dephase_time_1e=0.0),
        dict(beat_amplitudes=(0.5, 0.4), beat_frequencies=(0.0, 10.0)),
        dict(beat_amplitudes=(1.2, -0.2), beat_frequencies=(0.0, 10.0)),
        dict(beat_amplitudes=(1.0,), beat_frequencies=(0.0, 10.0)),
    ],
)
def test_invalid_memory_params(kw):
    with pytest.raises(ParameterError):
        memory.MemoryParams(**kw)


def test_calibration_reproduces_defaults():
    a, nu = memory.calibrate_beats()
    assert np.allclose(a, memory.DEFAULT_BEAT_AMPLITUDES, atol=1e-6)
    assert np.allclose(nu, memory.DEFAULT_BEAT_FREQUENCIES, atol=1e-4)


amps = st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=4).filter(lambda a: sum(a) > 0.05)


@given(a=amps, data=st.data())
def test_beating_never_exceeds_envelope(a, data):
    a = [x / sum(a) for x in a]
    nu = data.draw(st.lists(st.floats(min_value=0.0, max_value=500.0), min_size=len(a), max_size=len(a)))
    mem = memory.MemoryParams(beat_amplitudes=a, beat_frequencies=nu)
    grid = np.linspace(0.0, 40.0, 401)
    eta = memory.retrieval_efficiency(mem, grid)
    assert np.all(eta <= mem.intrinsic_efficiency * memory.dephasing(mem, grid) * (1 + 1e-9))
    assert np.all(eta >= 0)
