from dataclasses import dataclass

import numpy as np
import pytest

from app.services.optimizers import AuxSpec
from app.services.probability import ChainModel, ProbabilityTable, dsbs, identity_channel


def h2(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


@dataclass(frozen=True, eq=False)
class FixedJointChain(ChainModel):
    """Modelo con la conjunta impuesta desde fuera; sirve para construir leyes que no son cadenas."""
    fixed: np.ndarray = None

    @property
    def joint_mass(self) -> np.ndarray:
        return self.fixed


def fixed_joint_chain(mass: np.ndarray) -> FixedJointChain:
    source = ProbabilityTable(mass.sum(axis=(2, 3)), name='source')
    return FixedJointChain(source, identity_channel(2), identity_channel(2), fixed=mass)


def xor_joint() -> np.ndarray:
    """Y1, Y2 uniformes e independientes, Z1 = Y1 xor Y2, Z2 = Y1: ninguna rama respeta la cadena."""
    mass = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            mass[a, b, a ^ b, a] = 0.25
    return mass


@pytest.fixture
def dsbs01() -> ProbabilityTable:
    return dsbs(0.1)


@pytest.fixture
def dsbs025() -> ProbabilityTable:
    return dsbs(0.25)


@pytest.fixture
def small_aux() -> AuxSpec:
    return AuxSpec(restarts=4, grid_step=0.25, max_iterations=500, seed=0)
