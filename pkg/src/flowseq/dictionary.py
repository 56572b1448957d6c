"""Gesture dictionary: Gaussian clusters over feature vectors.

Each dictionary entry is a named sequence of clusters, one per partial
action, fitted from several repetitions of the gesture. Positions align
across repetitions: the i-th partial action of every repetition feeds
cluster i, so repetitions must decompose into the same number of partial
actions. Entries may flag "important" positions whose matching the matcher
can force.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve

from .eigenspace import EigenspaceModel, eig_from_json, eig_to_json
from .errors import CorruptDictionaryError, DegenerateDataError, InvalidInputError
from .flow import _frozen

_SYMMETRY_TOL = 1e-10
DEFAULT_MATCH_THRESHOLD = 3.0


@dataclass(frozen=True, eq=False)
class Cluster:
    """Gaussian over feature space: mean, covariance, cached inverse and log-det."""

    mean: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    log_det: float

    def __post_init__(self):
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64))
        cov = np.ascontiguousarray(np.asarray(self.covariance, dtype=np.float64))
        prec = np.ascontiguousarray(np.asarray(self.precision, dtype=np.float64))
        k = mean.size
        if cov.shape != (k, k) or prec.shape != (k, k):
            raise InvalidInputError("cluster matrices must be k x k")
        if np.abs(cov - cov.T).max() > _SYMMETRY_TOL:
            raise InvalidInputError("covariance is not symmetric")
        if np.abs(prec @ cov - np.eye(k)).max() > 1e-8:
            raise InvalidInputError("precision is not the inverse of covariance")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(cov))
        object.__setattr__(self, "precision", _frozen(prec))
        object.__setattr__(self, "log_det", float(self.log_det))

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def from_moments(cls, mean: np.ndarray, covariance: np.ndarray) -> "Cluster":
        """Build a cluster from mean and covariance, computing the caches."""
        mean = np.asarray(mean, dtype=np.float64).ravel()
        cov = np.asarray(covariance, dtype=np.float64)
        k = mean.size
        if cov.shape != (k, k):
            raise InvalidInputError(f"covariance shape {cov.shape} does not match k={k}")
        if np.abs(cov - cov.T).max() > _SYMMETRY_TOL:
            raise InvalidInputError("covariance is not symmetric")
        try:
            lower = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise DegenerateDataError(f"covariance is singular or not positive definite: {e}") from e
        log_det = 2.0 * float(np.log(np.diag(lower)).sum())
        precision = cho_solve((lower, True), np.eye(k))
        precision = 0.5 * (precision + precision.T)
        return cls(mean, cov, precision, log_det)


def fit_cluster(features: Sequence[np.ndarray], ridge: float | None = None) -> Cluster:
    """Fit a Gaussian cluster: sample mean and 1/N covariance plus a ridge.

    ``ridge`` adds ``ridge * I`` to the covariance; by default it is
    ``1e-6 * trace(cov) / k``, which keeps well-spread data essentially
    untouched while flooring near-singular fits.
    """
    fs = [np.asarray(f, dtype=np.float64).ravel() for f in features]
    n = len(fs)
    if n < 2:
        raise InvalidInputError(f"need at least 2 feature vectors, got {n}")
    k = fs[0].size
    if any(f.size != k for f in fs):
        raise InvalidInputError("feature vectors differ in dimension")
    x = np.vstack(fs)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    if ridge is None:
        ridge = 1e-6 * float(np.trace(cov)) / k
    elif ridge < 0:
        raise InvalidInputError("ridge must be >= 0")
    cov = cov + ridge * np.eye(k)
    return Cluster.from_moments(mean, cov)


def mahalanobis(cluster: Cluster, u: np.ndarray) -> float:
    """sqrt((u - mean)^T precision (u - mean))."""
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size != cluster.dim:
        raise InvalidInputError(
            f"feature dimension {u.size} does not match cluster dimension {cluster.dim}"
        )
    d = u - cluster.mean
    q = float(d @ cluster.precision @ d)
    return math.sqrt(max(q, 0.0))


def density(cluster: Cluster, x: np.ndarray) -> float:
    """Gaussian density at ``x`` using the cached precision and log-det."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != cluster.dim:
        raise InvalidInputError(
            f"feature dimension {x.size} does not match cluster dimension {cluster.dim}"
        )
    d = x - cluster.mean
    q = float(d @ cluster.precision @ d)
    k = cluster.dim
    return math.exp(-0.5 * (k * math.log(2.0 * math.pi) + cluster.log_det + q))


@dataclass(frozen=True, eq=False)
class GestureEntry:
    """Named cluster sequence with 1-based important-position flags."""

    name: str
    clusters: tuple[Cluster, ...]
    important: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "important", frozenset(int(i) for i in self.important))
        if not self.clusters:
            raise InvalidInputError(f"gesture {self.name!r} has no clusters")
        dims = {c.dim for c in self.clusters}
        if len(dims) > 1:
            raise InvalidInputError(f"gesture {self.name!r} mixes cluster dimensions")
        bad = [i for i in self.important if not 1 <= i <= len(self.clusters)]
        if bad:
            raise InvalidInputError(
                f"gesture {self.name!r}: important indices {sorted(bad)} outside "
                f"[1, {len(self.clusters)}]"
            )


@dataclass(frozen=True, eq=False)
class GestureDictionary:
    """Shared eigenspace, gesture entries, and the Mahalanobis match threshold."""

    eigenspace: EigenspaceModel
    entries: tuple[GestureEntry, ...]
    match_threshold: float = DEFAULT_MATCH_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.match_threshold <= 0:
            raise InvalidInputError("match threshold must be positive")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise InvalidInputError(f"duplicate entry names: {dupes}")
        for e in self.entries:
            if e.clusters[0].dim != self.eigenspace.k:
                raise InvalidInputError(
                    f"gesture {e.name!r} cluster dimension {e.clusters[0].dim} "
                    f"does not match eigenspace k={self.eigenspace.k}"
                )

    def entry(self, name: str) -> GestureEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def fit_entry(
    name: str,
    repetitions: Sequence[Sequence[np.ndarray]],
    important: Sequence[int] = (),
    ridge: float | None = None,
) -> GestureEntry:
    """Fit one entry from several repetitions' feature sequences.

    Repetitions align positionally, so they must all contain the same number
    of partial actions; a mismatch is rejected with the gesture named.
    """
    if len(repetitions) < 2:
        raise InvalidInputError(
            f"gesture {name!r}: need at least 2 repetitions, got {len(repetitions)}"
        )
    counts = sorted({len(rep) for rep in repetitions})
    if len(counts) != 1:
        raise InvalidInputError(
            f"gesture {name!r}: repetitions disagree on partial-action count "
            f"(saw {counts}); cannot align clusters positionally"
        )
    length = counts[0]
    if length == 0:
        raise InvalidInputError(f"gesture {name!r}: repetitions contain no partial actions")
    clusters = tuple(
        fit_cluster([rep[i] for rep in repetitions], ridge) for i in range(length)
    )
    return GestureEntry(name, clusters, frozenset(important))


def strip_importance(dictionary: GestureDictionary) -> GestureDictionary:
    """Copy of the dictionary with every important set emptied."""
    entries = tuple(replace(e, important=frozenset()) for e in dictionary.entries)
    return GestureDictionary(dictionary.eigenspace, entries, dictionary.match_threshold)


def save_dictionary(dictionary: GestureDictionary, path) -> None:
    """Write a ``.gdict`` JSON file. Floats round-trip exactly."""
    obj = {
        "tau": dictionary.match_threshold,
        "eigenspace": eig_to_json(dictionary.eigenspace),
        "entries": [
            {
                "name": e.name,
                "important": sorted(e.important),
                "clusters": [
                    {"mean": c.mean.tolist(), "cov": c.covariance.tolist()}
                    for c in e.clusters
                ],
            }
            for e in dictionary.entries
        ],
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_dictionary(path) -> GestureDictionary:
    """Read a ``.gdict`` file; any parse or invariant failure is a corrupt file."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptDictionaryError(f"cannot parse dictionary {path}: {e}") from e
    try:
        eigenspace = eig_from_json(obj["eigenspace"], origin=str(path))
        entries = []
        for rec in obj["entries"]:
            clusters = tuple(
                Cluster.from_moments(
                    np.array(c["mean"], dtype=np.float64),
                    np.array(c["cov"], dtype=np.float64),
                )
                for c in rec["clusters"]
            )
            entries.append(
                GestureEntry(str(rec["name"]), clusters, frozenset(rec.get("important", ())))
            )
        return GestureDictionary(eigenspace, tuple(entries), float(obj["tau"]))
    except (InvalidInputError, DegenerateDataError, KeyError, TypeError, ValueError) as e:
        raise CorruptDictionaryError(f"invalid dictionary {path}: {e}") from e
