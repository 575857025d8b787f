"""Kernel functions and Gram-matrix evaluation shared by both solvers.

Four kernel kinds are supported: linear, polynomial, RBF and sigmoid. The
RBF width and the polynomial/sigmoid scale default to values derived from
the input dimension; they are resolved once per model so that serialized
models carry concrete numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .features import FeatureVector, dense_matrix


class KernelKind(str, Enum):
    LINEAR = "linear"
    POLYNOMIAL = "poly"
    RBF = "rbf"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus parameters; ``None`` means "derive from dim".

    Defaults: RBF width C = dim/2 (sparse 0/1 vectors then give mid-range
    similarities), polynomial/sigmoid scale = 1/dim, degree 3, coef0 0.
    """

    kind: KernelKind = KernelKind.RBF
    rbf_width_c: float | None = None
    poly_degree: int = 3
    poly_coef0: float = 0.0
    poly_scale: float | None = None
    sig_scale: float | None = None
    sig_coef0: float = 0.0

    def __post_init__(self):
        if self.rbf_width_c is not None and self.rbf_width_c <= 0:
            raise ValueError("rbf_width_c must be positive")
        if self.poly_degree < 1:
            raise ValueError("poly_degree must be >= 1")

    def resolve(self, dim: int) -> "KernelSpec":
        """Pin dimension-dependent defaults to concrete values."""
        if dim <= 0:
            raise ValueError("dim must be positive")
        kw = {}
        if self.kind is KernelKind.RBF and self.rbf_width_c is None:
            kw["rbf_width_c"] = dim / 2.0
        if self.kind is KernelKind.POLYNOMIAL and self.poly_scale is None:
            kw["poly_scale"] = 1.0 / dim
        if self.kind is KernelKind.SIGMOID and self.sig_scale is None:
            kw["sig_scale"] = 1.0 / dim
        return replace(self, **kw) if kw else self

    def to_json_dict(self) -> dict:
        d: dict = {"kind": self.kind.value}
        if self.kind is KernelKind.RBF:
            d["rbf_width_c"] = self.rbf_width_c
        elif self.kind is KernelKind.POLYNOMIAL:
            d["poly_degree"] = self.poly_degree
            d["poly_coef0"] = self.poly_coef0
            d["poly_scale"] = self.poly_scale
        elif self.kind is KernelKind.SIGMOID:
            d["sig_scale"] = self.sig_scale
            d["sig_coef0"] = self.sig_coef0
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            kind=KernelKind(d["kind"]),
            rbf_width_c=d.get("rbf_width_c"),
            poly_degree=d.get("poly_degree", 3),
            poly_coef0=d.get("poly_coef0", 0.0),
            poly_scale=d.get("poly_scale"),
            sig_scale=d.get("sig_scale"),
            sig_coef0=d.get("sig_coef0", 0.0),
        )


def parse_kernel_name(name: str) -> KernelKind:
    aliases = {
        "linear": KernelKind.LINEAR,
        "poly": KernelKind.POLYNOMIAL,
        "polynomial": KernelKind.POLYNOMIAL,
        "rbf": KernelKind.RBF,
        "sigmoid": KernelKind.SIGMOID,
    }
    try:
        return aliases[name.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}") from None


def eval_kernel(spec: KernelSpec, x: FeatureVector, y: FeatureVector) -> float:
    """Evaluate k(x, y) for a single pair of sparse vectors."""
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    spec = spec.resolve(x.dim)
    if spec.kind is KernelKind.LINEAR:
        return x.dot(y)
    if spec.kind is KernelKind.POLYNOMIAL:
        return float((spec.poly_scale * x.dot(y) + spec.poly_coef0) ** spec.poly_degree)
    if spec.kind is KernelKind.SIGMOID:
        return float(np.tanh(spec.sig_scale * x.dot(y) + spec.sig_coef0))
    # RBF: accumulate ||x - y||^2 over the union of nonzero columns, which
    # is exactly 0.0 when x == y.
    sq = 0.0
    for c, v in x.entries.items():
        d = v - y.entries.get(c, 0.0)
        sq += d * d
    for c, v in y.entries.items():
        if c not in x.entries:
            sq += v * v
    return float(np.exp(-sq / spec.rbf_width_c))


def _apply_on_products(spec: KernelSpec, prod: np.ndarray,
                       x_sq: np.ndarray, y_sq: np.ndarray) -> np.ndarray:
    """Map a matrix of inner products <x_i, y_j> through the kernel."""
    if spec.kind is KernelKind.LINEAR:
        return prod
    if spec.kind is KernelKind.POLYNOMIAL:
        return (spec.poly_scale * prod + spec.poly_coef0) ** spec.poly_degree
    if spec.kind is KernelKind.SIGMOID:
        return np.tanh(spec.sig_scale * prod + spec.sig_coef0)
    dist_sq = x_sq[:, None] + y_sq[None, :] - 2.0 * prod
    np.maximum(dist_sq, 0.0, out=dist_sq)
    return np.exp(-dist_sq / spec.rbf_width_c)


def gram_matrix(spec: KernelSpec, vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Dense symmetric Gram matrix G[i, j] = k(x_i, x_j)."""
    X = dense_matrix(vectors)
    spec = spec.resolve(X.shape[1])
    prod = X @ X.T
    sq = np.diag(prod).copy()
    G = _apply_on_products(spec, prod, sq, sq)
    # enforce exact symmetry against BLAS rounding asymmetries
    G = (G + G.T) / 2.0
    if spec.kind is KernelKind.RBF:
        np.fill_diagonal(G, 1.0)
    return G


def cross_gram(spec: KernelSpec, X: np.ndarray, x_sq: np.ndarray,
               Y: np.ndarray, y_sq: np.ndarray) -> np.ndarray:
    """Gram block k(X_i, Y_j) for pre-densified rows with cached sq norms."""
    spec = spec.resolve(X.shape[1])
    prod = X @ Y.T
    return _apply_on_products(spec, prod, x_sq, y_sq)
