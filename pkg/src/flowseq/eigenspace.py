"""Appearance vectors and eigenspace projection.

A partial action image of size W x H turns into an appearance vector of
length 2*W*H by raster-scanning its cells and emitting vx then vy per pixel.
Fitting collects such vectors as columns, centers them, and extracts the top
k eigenpairs of the 1/N covariance matrix; features are projections onto
that basis.

The decomposition runs as an SVD of the centered data matrix, which is
algebraically equivalent to the covariance eigenproblem but stays feasible
when the vector dimension far exceeds the sample count.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, InvalidInputError
from .flow import _frozen
from .segmentation import PartialActionImage

_ORTHO_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenspaceModel:
    """Mean vector plus top-k orthonormal eigenvectors and their eigenvalues."""

    mean: np.ndarray        # (D,)
    basis: np.ndarray       # (D, k), columns are eigenvectors
    eigenvalues: np.ndarray  # (k,), descending, >= 0

    def __post_init__(self):
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64))
        basis = np.ascontiguousarray(np.asarray(self.basis, dtype=np.float64))
        ev = np.ascontiguousarray(np.asarray(self.eigenvalues, dtype=np.float64))
        if mean.ndim != 1 or basis.ndim != 2 or ev.ndim != 1:
            raise InvalidInputError("model arrays have wrong rank")
        if basis.shape[0] != mean.size or basis.shape[1] != ev.size:
            raise InvalidInputError("model array shapes are inconsistent")
        gram = basis.T @ basis
        if np.abs(gram - np.eye(basis.shape[1])).max() > _ORTHO_TOL:
            raise InvalidInputError("basis columns are not orthonormal")
        if np.any(ev < 0) or np.any(np.diff(ev) > 0):
            raise InvalidInputError("eigenvalues must be non-negative and descending")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "basis", _frozen(basis))
        object.__setattr__(self, "eigenvalues", _frozen(ev))

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.mean.size


def vectorize(img: PartialActionImage) -> np.ndarray:
    """Appearance vector: raster order, vx then vy per pixel, zeros where absent."""
    return img.vectors.reshape(-1).copy()


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of each column positive."""
    out = basis.copy()
    for i in range(out.shape[1]):
        col = out[:, i]
        tol = 1e-12 * np.abs(col).max()
        idx = int(np.argmax(np.abs(col) > tol))
        if col[idx] < 0:
            out[:, i] = -col
    return out


def fit(vectors: Sequence[np.ndarray], k: int) -> EigenspaceModel:
    """Fit the eigenspace of a set of appearance vectors.

    Centers the vectors, takes the top ``k`` eigenpairs of the 1/N covariance
    matrix, and fixes each eigenvector's sign so its first nonzero component
    is positive. Requires 2 <= N and 1 <= k <= min(N-1, D).
    """
    vs = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    n = len(vs)
    if n < 2:
        raise InvalidInputError(f"need at least 2 vectors to fit, got {n}")
    d = vs[0].size
    if any(v.size != d for v in vs):
        raise InvalidInputError("appearance vectors differ in length")
    if not 1 <= k <= min(n - 1, d):
        raise InvalidInputError(
            f"k={k} out of range [1, {min(n - 1, d)}] for N={n}, D={d}"
        )
    x = np.column_stack(vs)
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    left, singular, _ = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = (singular * singular) / n
    if eigenvalues[0] <= 0.0:
        raise DegenerateDataError("all appearance vectors are identical")
    basis = _fix_signs(left[:, :k])
    return EigenspaceModel(mean, basis, eigenvalues[:k])


def project(model: EigenspaceModel, v: np.ndarray) -> np.ndarray:
    """Feature vector of ``v``: basis^T (v - mean)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != model.dim:
        raise InvalidInputError(
            f"vector length {v.size} does not match model dimension {model.dim}"
        )
    return model.basis.T @ (v - model.mean)


def save_eig(model: EigenspaceModel, path) -> None:
    """Write an ``.eig`` JSON file (basis stored one eigenvector per entry)."""
    Path(path).write_text(json.dumps(eig_to_json(model)), encoding="utf-8")


def load_eig(path) -> EigenspaceModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"cannot parse eigenspace model {path}: {e}") from e
    return eig_from_json(obj, origin=str(path))


def eig_to_json(model: EigenspaceModel) -> dict:
    return {
        "k": model.k,
        "mean": model.mean.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "basis": [model.basis[:, i].tolist() for i in range(model.k)],
    }


def eig_from_json(obj, origin: str = "<json>") -> EigenspaceModel:
    try:
        k = int(obj["k"])
        mean = np.array(obj["mean"], dtype=np.float64)
        eigenvalues = np.array(obj["eigenvalues"], dtype=np.float64)
        basis = np.column_stack([np.array(col, dtype=np.float64) for col in obj["basis"]])
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"malformed eigenspace model {origin}: {e}") from e
    if basis.ndim != 2 or basis.shape[1] != k or eigenvalues.size != k:
        raise InvalidInputError(f"eigenspace model {origin}: k disagrees with arrays")
    return EigenspaceModel(mean, basis, eigenvalues)
