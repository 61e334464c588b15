import numpy as np
import pytest

from fredholm_ibp import (
    BracketFunction,
    catalog_covariance,
    catalog_kernel,
    covariance_from_kernel,
    make_grid,
    sample_cholesky,
)

# criterion number -> list of (passed, test name, detail)
ACCEPTANCE: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    ACCEPTANCE.setdefault(marker.args[0], []).append((report.passed, item.name, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        runs = ACCEPTANCE[number]
        word = "PASS" if all(ok for ok, _, _ in runs) else "FAIL"
        details = " | ".join(d for _, _, d in runs if d)
        terminalreporter.write_line(f"criterion {number:2d}: {word}  {details}")


@pytest.fixture
def detail(request):
    """Attach a human-readable measurement to the acceptance summary."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


def quadratic_bracket(grid):
    return BracketFunction.from_function(grid, lambda t: t**2)


def kernel_for(name, grid):
    bracket = quadratic_bracket(grid) if name == "martingale" else None
    return catalog_kernel(name, grid, bracket)


def matched_ensemble(kernel, M, seed):
    """Gaussian paths whose covariance is exactly the kernel's discrete covariance.

    Generic (kernel-based) identities are exact in expectation on these; the
    closed-form corollary right sides are exact on ensembles drawn from the
    analytic covariance instead.  The two differ by O(1/n).
    """
    return sample_cholesky(covariance_from_kernel(kernel), M, seed)


@pytest.fixture(scope="session")
def grid128():
    return make_grid(128)


@pytest.fixture(scope="session")
def big_ensembles(grid128):
    """M = 1e5 matched ensembles at n = 128, one per catalog kernel."""
    out = {}
    for seed, name in enumerate(("bm", "bridge_orthogonal", "bridge_canonical", "martingale"), start=11):
        k = kernel_for(name, grid128)
        out[name] = (k, matched_ensemble(k, 100_000, seed))
    return out


@pytest.fixture(scope="session")
def analytic_ensembles(grid128):
    """M = 1e5 ensembles drawn from the exact node covariances (bm, bridge, martingale)."""
    out = {}
    for seed, name in enumerate(("bm", "bridge", "martingale"), start=31):
        bracket = quadratic_bracket(grid128) if name == "martingale" else None
        out[name] = sample_cholesky(catalog_covariance(name, grid128, bracket), 100_000, seed)
    return out


@pytest.fixture
def rs():
    return np.random.default_rng(20240611)
