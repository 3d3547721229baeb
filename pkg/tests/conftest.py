import numpy as np
import pytest

from dpdcc.graph import GraphRound, mixing_matrix
from dpdcc.problem import BoxSet, RoundProblem


class QuadraticProblem(RoundProblem):
    """f_i(x) = 0.5 ||x - a_i||^2 with one constant constraint g_i = c."""

    def __init__(self, anchors, half_width=5.0, g_value=-1.0):
        self.anchors = np.asarray(anchors, float)
        self.n = len(self.anchors)
        self.m = 1
        self.box = BoxSet.cube(self.anchors.shape[1], half_width)
        self.g_value = g_value

    def loss_gradient(self, i, t, x):
        return np.asarray(x, float) - self.anchors[i]

    def constraint(self, i, t, x):
        return np.array([self.g_value]), np.zeros((1, self.p))

    def linear_constraints(self, t):
        return np.zeros((self.n, self.p)), np.full(self.n, -self.g_value)


class StaticTopology:
    """The same undirected graph every round."""

    def __init__(self, adjacency):
        self._g = GraphRound(1, np.asarray(adjacency, bool))
        self._W = mixing_matrix(self._g)

    def graph(self, t):
        return GraphRound(t, self._g.adjacency)

    def mixing(self, t):
        return self._W


def complete(n):
    return ~np.eye(n, dtype=bool)


def path(n):
    A = np.zeros((n, n), bool)
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = True
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
