import math

import numpy as np
import pytest

from rsvd.reduction import ReducedPoint, build_params, make_rng, sample_domain

LN2 = math.log(2)

_criteria = []


def record_criterion(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    _criteria.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criteria, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def domain_points(p, seed, count):
    rng = make_rng(seed)
    return [ReducedPoint(sample_domain("lambda", p, rng), rng.uniform(0, 2 * np.pi, p.n)) for _ in range(count)]


@pytest.fixture
def example_params():
    """n = 1, u = v = 0, mu = ln 2: the hand-computable point."""
    return build_params(1, 0.0, 0.0, LN2)


@pytest.fixture
def default_params():
    return build_params(2, 0.1, 0.3, LN2)
