import numpy as np
import pytest

from cholshrink.data import LongDataset
from cholshrink.gibbs import initial_state
from dataclasses import replace


def make_data(y, X=None, Z=None, subject=None, n_subjects=None):
    """Small dataset helper: rows get distinct visit numbers within a subject."""
    y = np.asarray(y, dtype=float)
    N = y.shape[0]
    subject = np.zeros(N, dtype=int) if subject is None else np.asarray(subject)
    X = np.zeros((N, 0)) if X is None else np.asarray(X, dtype=float)
    Z = np.zeros((N, 1)) if Z is None else np.asarray(Z, dtype=float)
    X = X if X.ndim == 2 else X.reshape(N, -1)
    Z = Z if Z.ndim == 2 else Z.reshape(N, -1)
    n = int(subject.max()) + 1 if n_subjects is None else n_subjects
    visit = np.zeros(N, dtype=int)
    for s in np.unique(subject):
        visit[subject == s] = np.arange(1, np.sum(subject == s) + 1)
    ids = tuple(f"id{i}" for i in range(n))
    return LongDataset(ids, subject, np.ones(N, dtype=int), visit, y, X, Z)


def make_state(data, prior, **kw):
    return replace(initial_state(data, prior), **kw)


def ks_to_cdf(draws, grid, cdf):
    """Kolmogorov-Smirnov distance between draws and a tabulated CDF."""
    x = np.sort(np.asarray(draws))
    n = x.shape[0]
    F = np.interp(x, grid, cdf)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def grid_cdf(grid, logdens):
    """Normalised CDF on a grid from an unnormalised log density (trapezoid rule)."""
    w = np.exp(logdens - np.max(logdens))
    c = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
    return c / c[-1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
