import numpy as np
import pytest

from bosefield.analysis import DISPLAYED_FLUCTUATION_DEFINITION, FLUCTUATION_DEFINITION
from bosefield.config import WORKERS_ENV, RunConfig
from bosefield.exceptions import BFFileExists, BFInvalidParameter
from bosefield.results import read_table
from bosefield.runner import (
    Schedule,
    basis_for,
    cutoff_from,
    ideal_reference,
    run,
    run_chains,
    sweep,
)


def _config(tmp_path, temperature=3.0, n_chains=2, **model):
    return RunConfig.from_dict(
        {
            "model": {"atoms": 20, "coupling": 0.1, "temperature": temperature, **model},
            "sampler": {
                "burn_in_sweeps": 200,
                "sweeps": 2000,
                "thinning_sweeps": 5,
                "n_chains": n_chains,
                "base_seed": 11,
                "minimizer_sweeps": 200,
            },
            "output": {"directory": str(tmp_path / "out")},
            "workers": 1,
        }
    )


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)


def test_schedule_from_sweeps(tmp_path):
    schedule = Schedule.from_sweeps(_config(tmp_path), 4)
    assert schedule.n_steps == 2200 * 5
    assert schedule.burn_in == 200 * 5
    assert schedule.thinning == 25


def test_cutoff_from(tmp_path):
    config = _config(tmp_path)
    assert cutoff_from(config, 0.5, 3.0) == 4
    assert cutoff_from(config, 2.7, 3.0) == 6
    ideal = _config(tmp_path, coupling=0.0)
    assert cutoff_from(ideal, 0.5, 3.0) == 3
    assert cutoff_from(ideal, 0.5, 0.0) == 0
    fixed = _config(tmp_path, cutoff=9)
    assert cutoff_from(fixed, 2.7, 3.0) == 9


def test_run_chains_needs_chains(tmp_path):
    config = _config(tmp_path, n_chains=0)
    params = config.model.params(cutoff=3)
    with pytest.raises(BFInvalidParameter):
        run_chains(config, params, basis_for(config, 3))


def test_run_writes_tables(tmp_path):
    config = _config(tmp_path, cutoff=4)
    result = run(config)
    assert set(result.tables) == {
        "ground_state",
        "occupation_histogram",
        "correlation",
        "fluctuation_vs_density",
        "summary",
    }
    assert len(result.paths) == len(result.tables)
    assert all(path.parent == tmp_path / "out" for path in result.paths)

    (point,) = result.points
    assert point.cutoff == 4
    assert point.snapshots == 2 * 2000 // 5
    assert 0.4 < point.condensate_fraction < 1.0
    assert point.bare_condensate_fraction <= point.condensate_fraction + 1e-12
    assert 0.0 < point.acceptance < 1.0
    assert point.variance > 0

    summary = read_table(tmp_path / "out" / "summary.tsv")
    assert summary.equals(result.tables["summary"])
    assert summary.column("condensate_fraction_error").error_of == "condensate_fraction"
    notes = summary.provenance.notes
    assert notes["fluctuation_definition"] == FLUCTUATION_DEFINITION
    assert notes["displayed_fluctuation_definition"] == DISPLAYED_FLUCTUATION_DEFINITION
    displayed = summary.column("center_fluctuation_displayed")
    assert displayed.description == DISPLAYED_FLUCTUATION_DEFINITION
    assert point.center_fluctuation_displayed > point.center_fluctuation

    histogram = result.tables["occupation_histogram"].data
    widths = histogram["n_ex_high"] - histogram["n_ex_low"]
    assert float((histogram["sampled_density"] * widths).sum()) == pytest.approx(1.0)
    assert np.allclose(histogram["n_0"] + histogram["n_ex"], 20.0)

    with pytest.raises(BFFileExists):
        run(config)

    (tmp_path / "out" / "notes.txt").write_text("keep")
    rerun = run(config.with_overrides(**{"output.overwrite": True}))
    assert sorted(rerun.paths) == sorted(result.paths)
    assert (tmp_path / "out" / "notes.txt").read_text() == "keep"


def test_run_at_zero_temperature(tmp_path):
    config = _config(tmp_path, temperature=0.0, n_chains=0, cutoff=6)
    result = run(config, write=False)
    assert list(result.tables) == ["ground_state"]
    assert result.paths == []
    assert result.points == []
    notes = result.tables["ground_state"].provenance.notes
    assert notes["cutoff"] == 6
    # Neither side can go below the minimum of the functional.
    gpe_energy = notes["gpe_energy"]
    assert gpe_energy * (1 - 1e-4) <= notes["minimized_energy"] <= gpe_energy * 1.05
    assert notes["l2_distance"] >= 0.0
    assert not (tmp_path / "out").exists()


def test_sweep(tmp_path):
    config = _config(tmp_path, cutoff=4)
    result = sweep(config, [4.0, 2.0, 3.0], write=False)
    assert [p.temperature for p in result.points] == [2.0, 3.0, 4.0]
    assert "correlation_T2" in result.tables
    assert "occupation_histogram_T4" in result.tables
    summary = result.tables["summary"]
    assert len(summary.data) == 3
    notes = summary.provenance.notes
    assert notes["mu"] == pytest.approx(result.ground_state.mu)
    assert "crossover_temperature" in notes
    assert 2.0 <= notes["crossover_temperature"] <= 4.0


@pytest.mark.parametrize("temperatures", [[3.0], [0.0, 3.0]])
def test_sweep_rejects_temperatures(tmp_path, temperatures):
    with pytest.raises(BFInvalidParameter):
        sweep(_config(tmp_path), temperatures, write=False)


def test_ideal_reference():
    table = ideal_reference(20, 3.0, 4, points=501)
    data = table.data
    assert list(data["n_ex"]) == list(range(21))
    assert np.array_equal(data["n_ex"] + data["n_0"], np.full(21, 20))
    assert float(data["exact_probability"].sum()) == pytest.approx(1.0, abs=1e-12)
    assert float(data["classical_probability"].sum()) == pytest.approx(1.0, abs=1e-12)
    assert table.provenance.notes["classical_density_integral"] == pytest.approx(1.0, abs=1e-6)


@pytest.fixture(scope="module")
def ground_states():
    notes = {}
    for coupling in (0.0, 0.02, 1.0):
        config = RunConfig.from_dict(
            {
                "model": {"atoms": 500, "coupling": coupling, "temperature": 0.0},
                "sampler": {"base_seed": 3},
                "workers": 1,
            }
        )
        result = run(config, write=False)
        notes[coupling] = result.tables["ground_state"].provenance.notes
    return notes


@pytest.mark.parametrize("coupling, cutoff", [(0.0, 0), (0.02, 4), (1.0, 42)])
def test_minimized_field_matches_mean_field(ground_states, coupling, cutoff):
    notes = ground_states[coupling]
    assert notes["cutoff"] == cutoff
    assert notes["l2_distance"] < 1e-2


def test_ground_state_widths_grow_with_coupling(ground_states):
    widths = [ground_states[g]["fwhm_minimized"] for g in (0.0, 0.02, 1.0)]
    assert widths[0] < widths[1] < widths[2]
    ideal_width = 2.0 * np.sqrt(np.log(2.0))
    assert ground_states[0.0]["fwhm_gpe"] == pytest.approx(ideal_width, abs=0.05)
    assert widths[0] == pytest.approx(ideal_width, abs=0.05)


def test_single_excited_mode_has_no_classical_reference(tmp_path, caplog):
    result = run(_config(tmp_path, cutoff=1, n_chains=1), write=False)
    (point,) = result.points
    assert np.isnan(point.classical_mean_excited)
    assert np.isnan(point.classical_cdf_distance)
    assert result.tables["occupation_histogram"].data["classical_density"].isna().all()
    assert "No classical ideal-gas reference" in caplog.text
    with pytest.raises(BFInvalidParameter):
        ideal_reference(20, 3.0, 1)
