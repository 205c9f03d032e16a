import numpy as np
import pytest

from mlsreenact.mls import MlsConfig, PairedPointSet


def scattered_points(rng: np.random.Generator, n: int, lo: float = 0.1, hi: float = 0.9,
                     min_sep: float = 0.02) -> np.ndarray:
    """Uniform points in [lo,hi]^2 rejection-sampled to a minimum pairwise distance."""
    pts: list[np.ndarray] = []
    while len(pts) < n:
        cand = rng.uniform(lo, hi, 2)
        if all(np.linalg.norm(cand - p) >= min_sep for p in pts):
            pts.append(cand)
    return np.array(pts)


def random_pairs(rng: np.random.Generator, n: int = 10) -> PairedPointSet:
    return PairedPointSet(source=scattered_points(rng, n), driving=scattered_points(rng, n))


def affine_pairs(rng: np.random.Generator, m: np.ndarray, t: np.ndarray, n: int = 10) -> PairedPointSet:
    """Pairs whose source points are an exact affine image of the driving points."""
    driving = scattered_points(rng, n)
    source = driving @ m + t[None, :]
    return PairedPointSet(source=source, driving=driving)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture
def cfg() -> MlsConfig:
    return MlsConfig()
