"""Random helpers shared by the compiled kernels."""
from numba import njit


@njit(cache=True)
def randbelow(rng, n):
    """Uniform integer in [0, n); much cheaper than ``Generator.integers`` under numba."""
    k = int(rng.random() * n)
    return k if k < n else n - 1
