import numpy as np
import pytest

from declab.core import ModelSpec, RelevantObservable, make_spin_factor


def random_factor(rng):
    re, im = rng.standard_normal(2), rng.standard_normal(2)
    return make_spin_factor(complex(re[0], im[0]), complex(re[1], im[1]))


def random_model(rng, M, N, lo=-1.0, hi=1.0):
    a = tuple(random_factor(rng) for _ in range(M))
    b = tuple(random_factor(rng) for _ in range(N))
    return ModelSpec(a, b, rng.uniform(lo, hi, N))


def random_hermitian(rng):
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    return 0.5 * (x + x.conj().T)


def random_observable(rng, sites):
    return RelevantObservable({s: random_hermitian(rng) for s in sites})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
