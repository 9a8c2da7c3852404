import json
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdmemory import cli, formats, pipeline, scenario
from qdmemory.errors import ScenarioError


def small_scenario(**run):
    kw = dict(n_triggers=2_000_000_000, hbt_pulses=200_000)
    kw.update(run)
    return scenario.reference_scenario().with_run(**kw)


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / "small.ini"
    scenario.dump(small_scenario(), path)
    return path


def test_bundled_scenario_matches_defaults():
    text = resources.files("qdmemory").joinpath("data/reference.ini").read_text(encoding="utf-8")
    assert text == scenario.dumps(scenario.reference_scenario())
    assert scenario.loads(text) == scenario.reference_scenario()


def test_round_trip_is_byte_identical():
    text = scenario.dumps(scenario.reference_scenario())
    assert scenario.dumps(scenario.loads(text)) == text


@settings(max_examples=25)
@given(
    seed=st.integers(min_value=0, max_value=2**31),
    taus=st.lists(st.floats(min_value=0.0, max_value=25.0, allow_nan=False), min_size=1, max_size=4),
    bg=st.floats(min_value=0.0, max_value=1e3, allow_nan=False),
)
def test_round_trip_random_runs(seed, taus, bg):
    sc = scenario.reference_scenario().with_run(seed=seed, tau_s=tuple(taus), background_per_bin=bg)
    text = scenario.dumps(sc)
    assert scenario.loads(text) == sc
    assert scenario.dumps(scenario.loads(text)) == text


def test_invalid_scenario_lists_every_problem():
    text = scenario.dumps(scenario.reference_scenario())
    text = text.replace("irf_fwhm_ps = 93.0", "irf_fwhm_ps = -1")
    text = text.replace("tau_s_ns = 13.8", "tau_s_ns = 40.0")
    text = text.replace("intrinsic_efficiency = 0.15", "intrinsic_efficiency = 1.5")
    text += "\n[bogus]\nx = 1\n"
    with pytest.raises(ScenarioError) as err:
        scenario.loads(text)
    joined = "\n".join(err.value.problems)
    assert len(err.value.problems) >= 3
    for needle in ("irf_fwhm", "intrinsic_efficiency", "bogus"):
        assert needle in joined


def test_window_limit_is_reported():
    text = scenario.dumps(scenario.reference_scenario()).replace("tau_s_ns = 13.8", "tau_s_ns = 40.0")
    with pytest.raises(ScenarioError, match="inter-pulse window"):
        scenario.loads(text)


def test_child_seeds_are_stable_and_distinct():
    a = np.random.default_rng(scenario.child_seed(1, "reference")).integers(0, 2**63, 4)
    b = np.random.default_rng(scenario.child_seed(1, "reference")).integers(0, 2**63, 4)
    c = np.random.default_rng(scenario.child_seed(1, "emission")).integers(0, 2**63, 4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_parse_sweep_is_inclusive():
    assert pipeline.parse_sweep("5:20:1") == [float(x) for x in range(5, 21)]
    assert pipeline.parse_sweep("5:6:0.5") == [5.0, 5.5, 6.0]
    with pytest.raises(ValueError):
        pipeline.parse_sweep("5:20")


# ---------------------------------------------------------------------------
# command line


def test_exit_code_validation(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(scenario.dumps(scenario.reference_scenario()).replace("efficiency = 0.8", "efficiency = 2"))
    assert cli.main(["simulate", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "efficiency" in capsys.readouterr().err


def test_exit_code_io(tmp_path, capsys):
    assert cli.main(["simulate", "--scenario", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "h.csv"
    bad.write_text("bin_start_ns,counts\n0.000,1\n0.100,-4\n")
    assert cli.main(["analyze", "--reference", str(bad), "--out", str(tmp_path / "r"), "--no-figures"]) == 2
    assert "line 3" in capsys.readouterr().err


def test_exit_code_acceptance_failure(tmp_path, capsys):
    text = scenario.dumps(scenario.reference_scenario()).replace("dephase_time_1e_ns = 32.0", "dephase_time_1e_ns = 5.0")
    (tmp_path / "fast.ini").write_text(text)
    code = cli.main(["reproduce-paper", "--scenario", str(tmp_path / "fast.ini"), "--only", "time_bandwidth"])
    out = capsys.readouterr().out
    assert code == 3
    assert "time-bandwidth" in out and "FAIL" in out


def test_empty_tau_writes_only_manifest(tmp_path, small_ini):
    out = tmp_path / "o"
    assert cli.main(["simulate", "--scenario", str(small_ini), "--tau", "", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    assert json.loads((out / "manifest.json").read_text())["files"] == []


def test_simulate_manifest_is_complete_and_seeded(tmp_path, small_ini):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d in (a, b):
        assert cli.main(["simulate", "--scenario", str(small_ini), "--out", str(d), "--tau", "13.8,19.8"]) == 0
    assert cli.main(["simulate", "--scenario", str(small_ini), "--seed", "2", "--out", str(c), "--tau", "13.8,19.8"]) == 0
    m = json.loads((a / "manifest.json").read_text())
    listed = {e["file"] for e in m["files"]}
    on_disk = {p.name for p in a.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    assert {"reference.csv", "storage_tau13.8ns.csv", "storage_tau19.8ns.csv", "events.csv", "timetags.bin",
            "coincidences.csv", "fpi_trace.csv", "rates.csv", "scenario.ini"} <= listed
    for e in m["files"]:
        assert e["sha256"] == formats.sha256(a / e["file"])
        assert (a / e["file"]).read_bytes() == (b / e["file"]).read_bytes()
    assert (a / "reference.csv").read_bytes() != (c / "reference.csv").read_bytes()
    assert scenario.load(a / "scenario.ini") == small_scenario()


def test_sweep_writes_sixteen_rows(tmp_path, small_ini, capsys):
    out = tmp_path / "s"
    assert cli.main(["sweep", "--scenario", str(small_ini), "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "tau_ns,eta_internal,eta_internal_sigma,eta_internal_model"
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert rows.shape == (16, 4)
    assert np.array_equal(rows[:, 0], np.arange(5.0, 21.0))
    assert (out / "sweep.png").stat().st_size > 0
    # simulated points scatter around the model at the quoted uncertainty
    z = (rows[:, 1] - rows[:, 3]) / rows[:, 2]
    assert np.mean(np.abs(z) < 3) >= 0.9


def test_analyze_directory_writes_reports(tmp_path, small_ini, capsys):
    sim = tmp_path / "sim"
    assert cli.main(["simulate", "--scenario", str(small_ini), "--out", str(sim)]) == 0
    rep = tmp_path / "rep"
    assert cli.main(["analyze", str(sim), "--out", str(rep)]) == 0
    out = capsys.readouterr().out
    assert "eta_int" in out
    d = json.loads((rep / "report_storage_tau13.8ns.json").read_text())
    for key in ("eta_e2e", "eta_int", "tbp", "g2_zero", "fwhm", "n_input", "n_ret", "tau_fit"):
        assert isinstance(d[key], dict), key
    assert d["eta_int"]["value"] == pytest.approx(d["eta_e2e"]["value"] / d["T_chain"]["value"], rel=1e-12)
    assert d["fwhm"]["value"] == pytest.approx(5.1, abs=0.3)
    pngs = {p.name for p in rep.glob("*.png")}
    assert "report_storage_tau13.8ns_fit_retrieval.png" in pngs
    assert (rep / "report_storage_tau13.8ns_fit_retrieval.csv").exists()


def test_analyze_single_file_marks_missing(tmp_path, small_ini, capsys):
    sim = tmp_path / "sim"
    cli.main(["simulate", "--scenario", str(small_ini), "--out", str(sim)])
    rep = tmp_path / "rep"
    assert cli.main(["analyze", "--reference", str(sim / "reference.csv"), "--out", str(rep), "--no-figures"]) == 0
    d = json.loads((rep / "report.json").read_text())
    assert d["eta_int"] == "not computed" and d["g2_zero"] == "not computed"
    assert not list(rep.glob("*.png"))
    assert cli.main(["analyze", "--out", str(rep)]) == 1
