from pathlib import Path

import pytest

from bosefield.config import WORKERS_ENV, RunConfig
from bosefield.exceptions import BFInvalidParameter
from bosefield.results import ResultFormat, config_hash
from bosefield.sampler import InitMode

CONFIG_TEXT = """
[model]
atoms = 500
coupling = 0.02
temperature = 20.0

[sampler]
burn_in_sweeps = 1000
sweeps = 5000
n_chains = 3
base_seed = 7
init = "ground"

[output]
directory = "out"
format = "arrow"
"""


@pytest.fixture
def config_file(tmp_path) -> Path:
    filename = tmp_path / "run.toml"
    filename.write_text(CONFIG_TEXT)
    return filename


def test_from_file(config_file):
    config = RunConfig.from_file(config_file)
    assert config.model.atoms == 500
    assert config.model.cutoff is None
    assert config.sampler.init == InitMode.GROUND
    assert config.sampler.seeds() == [7, 8, 9]
    assert config.output.format == ResultFormat.ARROW
    assert config.output.directory == Path("out")
    assert config.sweep.temperatures == []


@pytest.mark.parametrize(
    "text",
    [
        "[model]\natoms = 1\ntemperature = 1\ncolour = 3\n",
        "[model]\natoms = 1\ntemperature = 1\n[extra]\nvalue = 1\n",
        "[model]\natoms = -1\ntemperature = 1\n",
        "[model]\natoms = 1\n",
        "[model\natoms = 1\n",
    ],
)
def test_invalid_files(tmp_path, text):
    filename = tmp_path / "bad.toml"
    filename.write_text(text)
    with pytest.raises(BFInvalidParameter):
        RunConfig.from_file(filename)


def test_missing_file(tmp_path):
    with pytest.raises(BFInvalidParameter):
        RunConfig.from_file(tmp_path / "missing.toml")


def test_seed_required_for_chains():
    with pytest.raises(BFInvalidParameter):
        RunConfig.from_dict(
            {"model": {"atoms": 10, "temperature": 1.0}, "sampler": {"n_chains": 2}}
        )
    config = RunConfig.from_dict({"model": {"atoms": 10, "temperature": 0.0}})
    assert config.sampler.n_chains == 0
    assert config.sampler.seeds() == []


def test_with_overrides(config_file, tmp_path):
    config = RunConfig.from_file(config_file)
    same = config.with_overrides(**{"sampler.base_seed": None, "output.directory": None})
    assert same == config

    changed = config.with_overrides(
        **{"sampler.base_seed": 100, "output.directory": tmp_path / "other"}
    )
    assert changed.sampler.seeds() == [100, 101, 102]
    assert changed.output.directory == tmp_path / "other"
    assert config.sampler.base_seed == 7

    with pytest.raises(BFInvalidParameter):
        config.with_overrides(**{"sampler.n_chains": -1})


def test_worker_count(config_file, monkeypatch):
    config = RunConfig.from_file(config_file)
    monkeypatch.setenv(WORKERS_ENV, "5")
    assert config.worker_count() == 5
    for value in ("0", "many"):
        monkeypatch.setenv(WORKERS_ENV, value)
        with pytest.raises(BFInvalidParameter):
            config.worker_count()

    monkeypatch.delenv(WORKERS_ENV)
    assert config.with_overrides(workers=2).worker_count() == 2
    assert 1 <= config.worker_count() <= 3


def test_fingerprint_ignores_output_and_workers(config_file, tmp_path):
    config = RunConfig.from_file(config_file)
    relocated = config.with_overrides(**{"output.directory": tmp_path}, workers=4)
    assert config_hash(config.fingerprint()) == config_hash(relocated.fingerprint())
    reseeded = config.with_overrides(**{"sampler.base_seed": 8})
    assert config_hash(config.fingerprint()) != config_hash(reseeded.fingerprint())


SAMPLE_CONFIGS = sorted((Path(__file__).parents[1] / "configs").glob("*.toml"))


@pytest.mark.parametrize("filename", SAMPLE_CONFIGS, ids=lambda p: p.name)
def test_sample_configs(filename):
    config = RunConfig.from_file(filename)
    assert config.sampler.n_chains > 0
    assert config.sampler.base_seed is not None
