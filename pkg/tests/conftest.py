import logging

import numpy as np
import pytest
from loguru import logger

from bosefield.basis import BasisTable, build_basis, build_grid
from bosefield.field import ModelParams
from bosefield.sampler import InitMode, MoveParams, SampleStream, StreamMetadata


def make_stream(snapshots, atoms: float, coupling: float = 0.0, seed: int = 0) -> SampleStream:
    """Wrap hand-made snapshots in a SampleStream."""
    snapshots = np.asarray(snapshots, dtype=np.complex128)
    params = ModelParams(
        atoms=atoms, coupling=coupling, temperature=1.0, cutoff=snapshots.shape[1] - 1
    )
    metadata = StreamMetadata(
        seed=seed,
        n_steps=len(snapshots),
        burn_in=0,
        thinning=1,
        init=InitMode.GROUND,
        params=params,
        move_params=MoveParams(),
        final_theta_scale=0.3,
        acceptance_rate=0.5,
    )
    count = snapshots.shape[0]
    return SampleStream(
        snapshots=snapshots,
        kinetic_potential=np.zeros(count),
        interaction=np.zeros(count),
        metadata=[metadata],
    )


@pytest.fixture(scope="session")
def small_basis() -> BasisTable:
    """Basis with K=6 on its default grid."""
    return build_basis(6, build_grid(6))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def propagate_logs():
    """Enable logging for the package"""

    class PropagateHandler(logging.Handler):
        def emit(self, record):
            if logging.getLogger(record.name).isEnabledFor(record.levelno):
                logging.getLogger(record.name).handle(record)

    logger.remove()
    logger.enable("bosefield")
    logger.add(PropagateHandler(), format="{message}")
    yield
