"""Random polygon generators shared by the tests."""
import numpy as np

from ncvem import geometry as geo

MIN_RATIO = 0.05


def is_admissible(poly, rho=MIN_RATIO) -> bool:
    """Simple polygon with edges and kernel ball not smaller than ``rho * h``."""
    if not geo.is_simple(poly):
        return False
    h = geo.diameter(poly)
    if geo.edge_lengths(poly).min() < rho * h:
        return False
    return geo.kernel_inradius(poly)[0] >= rho * h


def random_polygon(rng: np.random.Generator, n_min=3, n_max=8, rho=MIN_RATIO) -> np.ndarray:
    """Star-shaped CCW polygon with random size and position."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        rad = rng.uniform(0.5, 1.5, n)
        poly = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        poly = poly * 10 ** rng.uniform(-2, 1) + rng.uniform(-5, 5, 2)
        if geo.signed_area(poly) > 0 and is_admissible(poly, rho):
            return poly


def random_polygons(count: int, seed: int, **kw) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [random_polygon(rng, **kw) for _ in range(count)]
