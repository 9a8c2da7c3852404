from fractions import Fraction

import pytest

from qdmemory import chain, source, spectra
from qdmemory.errors import ParameterError


def test_memory_side_transmission_is_the_exact_product():
    b = chain.reference_loss_budget()
    t = chain.chain_transmission(b, "memory unit", "spectral filtering")
    assert t == pytest.approx(0.0429, rel=1e-14)
    assert Fraction(t).limit_denominator(10_000) == Fraction(429, 10_000)
    sigma = chain.chain_transmission_sigma(b, "memory unit", "spectral filtering")
    assert sigma == pytest.approx(0.0429 * 0.02 / 0.66)


def test_predicted_rates_reproduce_the_table():
    rows = dict(chain.predicted_rates(chain.reference_loss_budget()))
    assert rows["input"] == 40e6
    assert rows["QD source"] == pytest.approx(16e6, rel=1e-15)
    assert rows["uPL optics and spectrometer"] == pytest.approx(1.6e6, rel=1e-15)
    assert rows["polarization filtering"] == pytest.approx(0.8e6, rel=1e-15)
    assert rows["fiber coupling"] == pytest.approx(20e3, rel=1e-15)


def test_assumed_flags():
    b = chain.reference_loss_budget()
    assert b["QD source"].assumed and b["polarization filtering"].assumed
    assert not b["memory unit"].assumed


def test_stage_order_and_lookup():
    b = chain.reference_loss_budget()
    with pytest.raises(ParameterError):
        chain.chain_transmission(b, "etalon", "memory unit")
    with pytest.raises(KeyError):
        b.index("nonexistent")
    with pytest.raises(ParameterError, match="bad.*transmission"):
        chain.LossBudget((chain.Stage("bad", 1.5), chain.Stage("worse", 0.5, sigma=-1.0)), 1.0)


def test_cell_stretch_reproduces_observed_decays():
    wp = source.build_wavepacket(source.QdParams())
    cell = chain.DispersiveCell.calibrated(2.23, 1.39)
    assert chain.apply_dispersive_cell(wp, cell).temporal_decay == pytest.approx(2.23)
    with pytest.raises(ParameterError):
        chain.DispersiveCell(effective_delay_stretch=0.9)


def test_etalon_filters_and_reshapes():
    wp = source.build_wavepacket(source.QdParams())
    out, passed = chain.apply_etalon(wp, chain.reference_etalon(0.0))
    assert passed == pytest.approx(0.12812, abs=2e-5)
    assert out.mean_photon_flux == pytest.approx(wp.mean_photon_flux * passed)
    assert out.spectral.kind == "tabulated"
    assert spectra.area(out.spectral) == pytest.approx(1.0, abs=1e-3)
    # the product of a 5.1 GHz line and a 500 MHz passband is about as wide as the passband
    assert 400.0 < out.spectral.fwhm < 520.0


def test_etalon_far_off_resonance_passes_nothing():
    wp = source.build_wavepacket(source.QdParams())
    out, passed = chain.apply_etalon(wp, chain.reference_etalon(1e9))
    assert passed == 0.0 and out.mean_photon_flux == 0.0
