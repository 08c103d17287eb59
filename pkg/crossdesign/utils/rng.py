"""Counter-based random streams"""
import numpy as np

# Stream tags keep population, sample, bootstrap and fold draws independent
POPULATION_STREAM = 0
SAMPLE_STREAM = 1
BOOTSTRAP_STREAM = 2
FOLD_STREAM = 3


def make_generator(*keys: int) -> np.random.Generator:
    """Philox generator keyed by a tuple of nonnegative integers.

    The same keys always give the same stream, whichever thread draws from it.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))
