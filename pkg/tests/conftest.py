import numpy as np
import pytest

from macroflow import Canvas, GenConfig, Macro, Netlist, PlacementInstance, generate_sample


def make_instance(sizes, canvas=Canvas(), edges=(), pins=None):
    """Instance from physical (w, h) pairs; pins default to a single center pin."""
    macros = []
    for i, (w, h) in enumerate(sizes):
        p = pins[i] if pins is not None else [[0.0, 0.0]]
        macros.append(Macro(id=i, width=w, height=h, pins=np.array(p)))
    return PlacementInstance(canvas, tuple(macros), Netlist(np.array(edges, dtype=np.int64).reshape(-1, 4)))


def random_instance(rng, n_macros=6, n_edges=10, size_range=(0.1, 0.5), pins_per_macro=3):
    """Random but valid instance with the requested connectivity."""
    macros = []
    for i in range(n_macros):
        w, h = rng.uniform(*size_range, size=2)
        pins = rng.uniform([-w / 2, -h / 2], [w / 2, h / 2], size=(pins_per_macro, 2))
        macros.append(Macro(id=i, width=float(w), height=float(h), pins=pins))
    edges = []
    while len(edges) < n_edges:
        ma, mb = rng.integers(0, n_macros, size=2)
        if ma == mb:
            continue
        edges.append([ma, rng.integers(pins_per_macro), mb, rng.integers(pins_per_macro)])
    return PlacementInstance(Canvas(), tuple(macros), Netlist(np.array(edges, dtype=np.int64)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SMALL_GEN = GenConfig(macro_count=(6, 12), macro_size=(0.08, 0.4), seed=7)


@pytest.fixture(scope="session")
def small_sample():
    """One deterministic generated (instance, placement) record."""
    return generate_sample(SMALL_GEN, np.random.default_rng(42))
