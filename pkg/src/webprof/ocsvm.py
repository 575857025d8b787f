"""nu-one-class SVM: train on the kernelized dual, score with sign(f).

The dual is  min 0.5 * sum_ij a_i a_j k(x_i, x_j)  subject to
0 <= a_i <= 1/(nu*l), sum(a) = 1. The decision threshold rho is the mean of
sum_j a_j k(x_j, x_i) over unbounded support vectors; if every support
vector sits on the box, the midpoint of the KKT interval is used instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .features import FeatureVector, dense_matrix
from .kernels import KernelKind, KernelSpec, cross_gram, gram_matrix
from .smo import (bound_masks, normalize_solution, solve_simplex_box_qp,
                  threshold_interval)

PRUNE_EPS = 1e-12


class Decision(NamedTuple):
    accepted: bool
    score: float


def self_kernel_values(spec: KernelSpec, x_sq: np.ndarray) -> np.ndarray:
    """k(x, x) for a batch, given the squared norms."""
    if spec.kind is KernelKind.RBF:
        return np.ones_like(x_sq)
    if spec.kind is KernelKind.LINEAR:
        return x_sq
    if spec.kind is KernelKind.POLYNOMIAL:
        return (spec.poly_scale * x_sq + spec.poly_coef0) ** spec.poly_degree
    return np.tanh(spec.sig_scale * x_sq + spec.sig_coef0)


@dataclass
class _SupportSet:
    """Dense view of the support vectors for fast kernel rows."""

    spec: KernelSpec
    vectors: list[FeatureVector]
    matrix: np.ndarray = field(init=False)
    sq: np.ndarray = field(init=False)

    def __post_init__(self):
        self.matrix = dense_matrix(self.vectors)
        self.sq = np.einsum("ij,ij->i", self.matrix, self.matrix)
        self.spec = self.spec.resolve(self.matrix.shape[1])

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, x: FeatureVector) -> np.ndarray:
        """Kernel row k(sv_i, x) for one vector."""
        if x.dim != self.dim:
            raise ValueError(f"dimension mismatch: {x.dim} vs {self.dim}")
        xd = x.to_dense()
        prod = self.matrix @ xd
        spec = self.spec
        if spec.kind is KernelKind.LINEAR:
            return prod
        if spec.kind is KernelKind.POLYNOMIAL:
            return (spec.poly_scale * prod + spec.poly_coef0) ** spec.poly_degree
        if spec.kind is KernelKind.SIGMOID:
            return np.tanh(spec.sig_scale * prod + spec.sig_coef0)
        dist = self.sq - 2.0 * prod + x.sq_norm()
        np.maximum(dist, 0.0, out=dist)
        dist /= -spec.rbf_width_c
        return np.exp(dist)

    def rows(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        """Kernel block k(x_i, sv_j), one row per input vector."""
        X = dense_matrix(vectors)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.dim}")
        x_sq = np.einsum("ij,ij->i", X, X)
        return cross_gram(self.spec, X, x_sq, self.matrix, self.sq)


class OcSvmModel:
    """Trained nu-OC-SVM: support vectors, duals, kernel and threshold."""

    def __init__(self, support_vectors: Sequence[FeatureVector],
                 alphas: Sequence[float], rho: float, kernel: KernelSpec,
                 nu: float, train_size_l: int):
        self.support_vectors = list(support_vectors)
        self.alphas = np.asarray(alphas, dtype=float)
        self.rho = float(rho)
        self.nu = float(nu)
        self.train_size_l = int(train_size_l)
        self._support = _SupportSet(kernel, self.support_vectors)
        self.kernel = self._support.spec  # resolved against the SV dimension
        self.last_solve = None  # SolveResult diagnostics, set by train_ocsvm

    @property
    def dim(self) -> int:
        return self._support.dim

    @property
    def n_support(self) -> int:
        return len(self.support_vectors)

    def decide(self, x: FeatureVector) -> Decision:
        score = float(self._support.row(x) @ self.alphas) - self.rho
        return Decision(score >= 0.0, score)

    def scores(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        if not vectors:
            return np.zeros(0)
        return self._support.rows(vectors) @ self.alphas - self.rho

    def accepts(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        return self.scores(vectors) >= 0.0

    def to_json_dict(self) -> dict:
        return {
            "type": "ocsvm",
            "dim": self.dim,
            "kernel": self.kernel.to_json_dict(),
            "nu": self.nu,
            "l": self.train_size_l,
            "rho": self.rho,
            "svs": [v.sorted_items() for v in self.support_vectors],
            "alphas": self.alphas.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "OcSvmModel":
        if d.get("type") != "ocsvm":
            raise ValueError(f"not an ocsvm model file (type={d.get('type')!r})")
        dim = d["dim"]
        svs = [FeatureVector(dim, {int(c): float(v) for c, v in sv})
               for sv in d["svs"]]
        return cls(svs, d["alphas"], d["rho"],
                   KernelSpec.from_json_dict(d["kernel"]), d["nu"], d["l"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "OcSvmModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def train_ocsvm(X: Sequence[FeatureVector], nu: float, kernel: KernelSpec,
                tol: float = 1e-3, max_iter: int = 10_000_000,
                trace_objective: bool = False) -> OcSvmModel:
    """Fit the Eq.-style one-class dual with the shared SMO core.

    ``nu`` bounds the training-outlier fraction from above and the support
    vector fraction from below. ``tol`` is the KKT gap in gradient units.
    """
    l = len(X)
    if l < 1:
        raise ValueError("training set must not be empty")
    if not (0.0 < nu <= 1.0):
        raise ValueError("nu must be in (0, 1]")
    spec = kernel.resolve(X[0].dim)
    G = gram_matrix(spec, X)
    upper = 1.0 / (nu * l)
    result = solve_simplex_box_qp(G, np.zeros(l), upper, tol=tol,
                                  max_iter=max_iter,
                                  trace_objective=trace_objective)
    alpha = normalize_solution(result.alpha, upper)
    g = G @ alpha
    at_zero, at_upper, unbounded = bound_masks(alpha, upper)
    if unbounded.any():
        rho = float(g[unbounded].mean())
    else:
        rho = threshold_interval(g, at_zero, at_upper,
                                 at_upper_is_lower_bound=True)
    keep = alpha > PRUNE_EPS
    model = OcSvmModel(
        support_vectors=[X[i] for i in np.flatnonzero(keep)],
        alphas=alpha[keep], rho=rho, kernel=spec, nu=nu, train_size_l=l)
    model.last_solve = result  # diagnostics: iterations, gap, optional trace
    return model


def decide_ocsvm(model: OcSvmModel, x: FeatureVector) -> Decision:
    return model.decide(x)
