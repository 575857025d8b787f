"""Support Vector Data Description: minimal enclosing hypersphere.

The dual is  max sum_i a_i k(x_i, x_i) - sum_ij a_i a_j k(x_i, x_j)
subject to 0 <= a_i <= C, sum(a) = 1. It runs on the same SMO core as the
OC-SVM with the box bound C and the linear diagonal term added. R^2 is the
squared center distance of the unbounded support vectors (averaged), with
the same KKT-interval midpoint fallback as the OC-SVM threshold.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .features import FeatureVector
from .kernels import KernelSpec, gram_matrix
from .ocsvm import Decision, _SupportSet, self_kernel_values
from .smo import (InfeasibleError, bound_masks, normalize_solution,
                  solve_simplex_box_qp, threshold_interval)

PRUNE_EPS = 1e-12


class SvddModel:
    """Trained SVDD: support vectors, duals, kernel, radius and center norm."""

    def __init__(self, support_vectors: Sequence[FeatureVector],
                 alphas: Sequence[float], kernel: KernelSpec, weight_c: float,
                 r_squared: float, center_norm_sq: float, train_size_l: int):
        self.support_vectors = list(support_vectors)
        self.alphas = np.asarray(alphas, dtype=float)
        self.weight_c = float(weight_c)
        self.r_squared = float(r_squared)
        self.center_norm_sq = float(center_norm_sq)
        self.train_size_l = int(train_size_l)
        self._support = _SupportSet(kernel, self.support_vectors)
        self.kernel = self._support.spec  # resolved against the SV dimension
        # constants of the decision function, folded once
        self._beta = 2.0 * self.alphas
        self._bias = self.r_squared - self.center_norm_sq
        self.last_solve = None

    @property
    def dim(self) -> int:
        return self._support.dim

    @property
    def n_support(self) -> int:
        return len(self.support_vectors)

    def decide(self, x: FeatureVector) -> Decision:
        k_xx = float(self_kernel_values(self.kernel, np.asarray(x.sq_norm())))
        score = self._bias + float(self._support.row(x) @ self._beta) - k_xx
        return Decision(score >= 0.0, score)

    def scores(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        if not vectors:
            return np.zeros(0)
        x_sq = np.array([v.sq_norm() for v in vectors])
        k_xx = self_kernel_values(self.kernel, x_sq)
        return self._bias + self._support.rows(vectors) @ self._beta - k_xx

    def accepts(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        return self.scores(vectors) >= 0.0

    def to_json_dict(self) -> dict:
        return {
            "type": "svdd",
            "dim": self.dim,
            "kernel": self.kernel.to_json_dict(),
            "C": self.weight_c,
            "l": self.train_size_l,
            "r_squared": self.r_squared,
            "center_norm_sq": self.center_norm_sq,
            "svs": [v.sorted_items() for v in self.support_vectors],
            "alphas": self.alphas.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SvddModel":
        if d.get("type") != "svdd":
            raise ValueError(f"not an svdd model file (type={d.get('type')!r})")
        dim = d["dim"]
        svs = [FeatureVector(dim, {int(c): float(v) for c, v in sv})
               for sv in d["svs"]]
        return cls(svs, d["alphas"], KernelSpec.from_json_dict(d["kernel"]),
                   d["C"], d["r_squared"], d["center_norm_sq"], d["l"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SvddModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def train_svdd(X: Sequence[FeatureVector], C: float, kernel: KernelSpec,
               tol: float = 1e-3, max_iter: int = 10_000_000,
               trace_objective: bool = False) -> SvddModel:
    """Fit the SVDD dual. Requires C*l >= 1, else the simplex constraint is
    unreachable and :class:`InfeasibleError` is raised."""
    l = len(X)
    if l < 1:
        raise ValueError("training set must not be empty")
    if C <= 0.0:
        raise ValueError("C must be positive")
    if C * l < 1.0 - 1e-9:
        raise InfeasibleError(f"C*l = {C * l:.6g} < 1: sum(alpha)=1 infeasible")
    spec = kernel.resolve(X[0].dim)
    G = gram_matrix(spec, X)
    diag = np.diag(G).copy()
    result = solve_simplex_box_qp(2.0 * G, -diag, C, tol=tol,
                                  max_iter=max_iter,
                                  trace_objective=trace_objective)
    alpha = normalize_solution(result.alpha, C)
    h = G @ alpha
    center_norm_sq = float(alpha @ h)
    dist_sq = diag - 2.0 * h + center_norm_sq
    at_zero, at_upper, unbounded = bound_masks(alpha, C)
    if unbounded.any():
        r_squared = float(dist_sq[unbounded].mean())
    else:
        r_squared = threshold_interval(dist_sq, at_zero, at_upper,
                                       at_upper_is_lower_bound=False)
    keep = alpha > PRUNE_EPS
    model = SvddModel(
        support_vectors=[X[i] for i in np.flatnonzero(keep)],
        alphas=alpha[keep], kernel=spec, weight_c=C,
        r_squared=r_squared, center_norm_sq=center_norm_sq, train_size_l=l)
    model.last_solve = result
    return model


def decide_svdd(model: SvddModel, x: FeatureVector) -> Decision:
    return model.decide(x)
