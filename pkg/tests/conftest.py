import numpy as np
import pytest

from eimkit import coderivative as cd
from eimkit.geometry import Polytope
from eimkit.measure import MeasureSpace


@pytest.fixture
def two_atoms():
    return MeasureSpace.from_triples([("t1", 1.0, "atom"),
                                      ("t2", 1.0, "atom")])


@pytest.fixture
def one_atom():
    return MeasureSpace.from_triples([("t1", 1.0, "atom")])


@pytest.fixture
def nonatomic_prob():
    return MeasureSpace.from_triples(
        [(f"u{k}", 0.25, "nonatomic") for k in range(1, 5)])


def sqrt_band_handle(a=1.0, b=1.0):
    """The interval map x -> [0, a*sqrt|x| + b], constant in t."""
    return cd.AffineImage(
        dim_in=1, dim_out=1,
        base=lambda n: Polytope([[0.0], [1.0]]),
        amat=lambda n, x, a=a, b=b: np.array(
            [[a * np.sqrt(abs(float(x[0]))) + b]]),
        offset=lambda n, x: np.zeros(1),
        offset_jac=None, a_constant=False)


def abs_subgradient_handle():
    """Subgradient map of |x| (two affine pieces)."""
    return cd.MaxAffineSubgradient(
        dim_in=1,
        pieces=lambda n: (np.array([[1.0], [-1.0]]), np.array([0.0, 0.0])))


def le_constraint_handle(window=3.0):
    """Phi(x) = {y | y <= x} with identity inner map, windowed."""
    return cd.ConstraintComposite(
        dim_in=1, dim_mid=1, dim_out=1,
        inner=lambda n, x: np.array([float(x[0])]),
        inner_jac=lambda n, x: np.array([[1.0]]),
        constraints=lambda n: [
            (lambda z, y: float(y[0] - z[0]),
             lambda z, y: np.array([-1.0, 1.0]))],
        value_window=Polytope([[-window], [window]]))
