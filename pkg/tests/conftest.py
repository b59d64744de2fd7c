import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from specbundle.problem import GraphInstance, QapInstance, build_from_families


def pytest_addoption(parser):
    parser.addoption(
        "--regenerate-oracles",
        action="store_true",
        default=False,
        help="run the long projected-gradient oracle instead of frozen values",
    )


def make_k3() -> GraphInstance:
    return GraphInstance.from_edges(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])


def random_graph(n: int, p: float, seed: int) -> GraphInstance:
    rng = np.random.default_rng(seed)
    edges = [(i, j, 1.0) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if not edges:
        edges = [(0, 1, 1.0)]
    return GraphInstance.from_edges(n, edges)


def random_qap(n: int, seed: int, lo: int = 0, hi: int = 10) -> QapInstance:
    rng = np.random.default_rng(seed)
    w = rng.integers(lo, hi, (n, n)).astype(float)
    w = w + w.T
    np.fill_diagonal(w, 0.0)
    d = rng.integers(lo, hi, (n, n)).astype(float)
    d = d + d.T
    np.fill_diagonal(d, 0.0)
    return QapInstance(w, d)


def mixed_inequality_problem(n: int, seed: int, n_ineq: int = 6):
    """MaxCut diagonal equalities plus random sparse inequality rows."""
    g = random_graph(n, 0.3, seed)
    lap = g.laplacian().toarray()
    rng = np.random.default_rng(seed + 1000)
    idx, rows, cols, vals, b, ineq = [], [], [], [], [], []
    for i in range(n):
        idx.append(i)
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        b.append(1.0)
        ineq.append(False)
    for t in range(n_ineq):
        ci = n + t
        for _ in range(3):
            r, c = sorted(rng.integers(0, n, 2))
            idx.append(ci)
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(rng.standard_normal()))
        b.append(float(rng.random() * 0.5))
        ineq.append(True)
    prob = build_from_families(
        n, lap / 4.0, (idx, rows, cols, vals), b, ineq, scale_x=float(n)
    )
    return prob, g


@pytest.fixture
def k3():
    return make_k3()
