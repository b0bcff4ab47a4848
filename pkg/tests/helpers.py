"""Random junction generator shared by the property and acceptance suites."""

import numpy as np

from adaptive_signal.model import ApproachSpec, FlowRange, JunctionSpec


def random_range(rng, hi=40):
    a, b = sorted(int(x) for x in rng.integers(0, hi + 1, size=2))
    return FlowRange(a, b)


def random_junction(rng):
    n = int(rng.integers(3, 9))
    approaches = tuple(
        ApproachSpec(
            id=i + 1,
            inflow=random_range(rng),
            outflow_red=random_range(rng),
            outflow_green=random_range(rng, hi=60),
            lanes=int(rng.integers(1, 5)),
            popularity=float(rng.uniform(0.5, 2.0)),
        )
        for i in range(n)
    )
    return JunctionSpec(approaches)


def random_scenarios(count, seed=20261016):
    """Yield (junction, densities, sim seed) triples, reproducibly."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        junction = random_junction(rng)
        densities = [int(d) for d in rng.integers(0, 151, size=junction.n_approaches)]
        yield junction, densities, int(rng.integers(0, 2**63))
