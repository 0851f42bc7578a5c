import os
import sys

# compile time dominates on these problem sizes
os.environ.setdefault("XLA_FLAGS", "--xla_backend_optimization_level=0")

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import anisotropic as A

settings.register_profile(
    "default", deadline=None, max_examples=25, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def poly(terms, dim=2):
    return A.Polynomial.from_table([{"coeff": c, "powers": p} for c, p in terms], dim)


def randers_const(b=(0.5, 0.0)):
    return A.randers(np.eye(2), np.asarray(b, dtype=float), 2)


def randers_varying():
    """Randers metric whose a and b both depend on x (the generic test case)."""
    a = poly([(np.eye(2), [0, 0]), ([[0.2, 0.05], [0.05, 0.1]], [1, 0])])
    b = poly([([0.3, 0.1], [0, 0]), ([0.0, 0.15], [1, 0]), ([-0.1, 0.0], [0, 1])])
    chart = A.whole_chart(2, (-1.0, -1.0), (1.0, 1.0))
    return A.randers(a, b, 2, chart)


def riemannian_poly():
    a = poly([(np.eye(2), [0, 0]), ([[0.3, 0.1], [0.1, 0.2]], [1, 0]), ([[0.1, 0.0], [0.0, 0.2]], [0, 2])])
    return A.riemannian(a, 2, A.whole_chart(2, (-0.8, -0.8), (0.8, 0.8)))


def quartic():
    return A.perturbed_quartic(2)


def randers_3d():
    a = poly([(np.eye(3), [0, 0, 0]), (0.1 * np.diag([1.0, 2.0, 0.5]), [0, 1, 0])], 3)
    b = poly([([0.2, -0.1, 0.15], [0, 0, 0]), ([0.05, 0.1, 0.0], [1, 0, 0])], 3)
    return A.randers(a, b, 3, A.whole_chart(3, (-1.0,) * 3, (1.0,) * 3))


REGISTRY = {
    "euclidean": lambda: A.euclidean(2),
    "sphere": lambda: A.sphere_chart(2),
    "riemannian_poly": riemannian_poly,
    "randers": randers_varying,
    "quartic": quartic,
}

FINSLER = {"randers": randers_varying, "quartic": quartic}


def samples(metric, count, seed=0, box=0.6):
    n = metric.dim
    return A.random_samples(metric.domain, np.random.default_rng(seed), count, box=(-box * np.ones(n), box * np.ones(n)))


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


@pytest.fixture(scope="session")
def randers():
    return randers_varying()


@pytest.fixture(scope="session")
def sphere():
    return A.sphere_chart(2)


@pytest.fixture(scope="session")
def euclid():
    return A.euclidean(2)


@pytest.fixture(params=sorted(REGISTRY), scope="session")
def registry_metric(request):
    return REGISTRY[request.param]()


@pytest.fixture(params=sorted(FINSLER), scope="session")
def finsler_metric(request):
    return FINSLER[request.param]()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.LINES):
            terminalreporter.write_line(line)
