import math

import numpy as np
import pytest


def conditional_means(values, innov, probs, k):
    """Probability-weighted mean of ``values`` within each group of paths sharing
    the first ``k`` innovations.  Returns one number per group."""
    keys = [tuple(r) for r in innov[:, :k]]
    groups = {}
    for key, v, p in zip(keys, values, probs):
        groups.setdefault(key, []).append((v, p))
    out = []
    for items in groups.values():
        mass = math.fsum(p for _, p in items)
        out.append(math.fsum(v * p for v, p in items) / mass)
    return np.array(out)


@pytest.fixture
def tmp_out(tmp_path, monkeypatch):
    monkeypatch.delenv("MARLAB_OUT", raising=False)
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
