"""Parameterized unnormalized models: log f and its parameter gradient.

- `BoltzmannModel`: fully visible Boltzmann machine on {-1,+1}^D,
  log f(y) = y'Wy with W symmetric and zero-diagonal. Since y_i^2 = 1 a
  diagonal entry only shifts log f by a constant, which homogeneous scores
  ignore, so W is stored as its strict upper triangle (D(D-1)/2 parameters).
- `ConditionalModel`: per-label weight vectors, log f(y|x) = theta_y . x.
  Deliberately overparameterized (no gauge fixed by default).
- `TabularModel`: one free log value per point; the saturated model used by
  oracle-side tests.

Models are immutable; fitting produces new parameter snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InputError
from .potentials import Probability
from .spaces import SampleSpace, indices_to_signs, parse_space_spec, signs_to_index


def upper_pairs(dim: int) -> list[tuple[int, int]]:
    """Parameter order of the strict upper triangle: (0,1),(0,2),...,(D-2,D-1)."""
    return [(i, j) for i in range(dim) for j in range(i + 1, dim)]


def _freeze(arr, dtype=np.float64) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BoltzmannModel:
    dim: int
    upper: np.ndarray  # strict upper triangle of W, length D(D-1)/2

    def __post_init__(self):
        n = self.dim * (self.dim - 1) // 2
        upper = np.asarray(self.upper, dtype=np.float64)
        if upper.shape != (n,):
            raise InputError(f"expected {n} upper-triangle entries, got {upper.shape}")
        if not np.all(np.isfinite(upper)):
            raise InputError("parameters must be finite")
        object.__setattr__(self, "upper", _freeze(upper))

    @staticmethod
    def zeros(dim: int) -> "BoltzmannModel":
        return BoltzmannModel(dim=dim, upper=np.zeros(dim * (dim - 1) // 2))

    @staticmethod
    def from_matrix(w) -> "BoltzmannModel":
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InputError("W must be square")
        if not np.allclose(w, w.T, atol=0, rtol=0):
            raise InputError("W must be symmetric")
        if np.any(np.diag(w) != 0):
            raise InputError("W must have a zero diagonal")
        dim = w.shape[0]
        upper = np.array([w[i, j] for i, j in upper_pairs(dim)])
        return BoltzmannModel(dim=dim, upper=upper)

    @property
    def matrix(self) -> np.ndarray:
        w = np.zeros((self.dim, self.dim))
        for k, (i, j) in enumerate(upper_pairs(self.dim)):
            w[i, j] = w[j, i] = self.upper[k]
        return w

    @property
    def space(self) -> SampleSpace:
        return SampleSpace.hypercube(self.dim)

    def pair_features(self, indices) -> np.ndarray:
        """Feature rows 2*y_i*y_j for states given by index; log f = F @ upper."""
        signs = indices_to_signs(indices, self.dim).astype(np.float64)
        cols = [2.0 * signs[:, i] * signs[:, j] for i, j in upper_pairs(self.dim)]
        return np.stack(cols, axis=1)

    def log_f_batch(self, indices) -> np.ndarray:
        return self.pair_features(indices) @ self.upper


@dataclass(frozen=True)
class ConditionalModel:
    num_labels: int
    feature_dim: int
    theta: np.ndarray  # (L, d)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (self.num_labels, self.feature_dim):
            raise InputError(
                f"theta must be ({self.num_labels},{self.feature_dim}), got {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise InputError("parameters must be finite")
        object.__setattr__(self, "theta", _freeze(theta))

    @staticmethod
    def zeros(num_labels: int, feature_dim: int) -> "ConditionalModel":
        return ConditionalModel(num_labels, feature_dim, np.zeros((num_labels, feature_dim)))

    @property
    def space(self) -> SampleSpace:
        return SampleSpace.label_range(self.num_labels)

    def log_f_labels(self, x) -> np.ndarray:
        """log f(. | x): one value per label."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.feature_dim,):
            raise InputError(f"feature vector must have length {self.feature_dim}")
        return self.theta @ x

    def log_z(self, x) -> float:
        return float(logsumexp(self.log_f_labels(x)))


@dataclass(frozen=True)
class TabularModel:
    space: SampleSpace
    eta: np.ndarray  # log f per point

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.float64)
        if eta.shape != (self.space.size,):
            raise InputError(f"eta must have length {self.space.size}")
        if not np.all(np.isfinite(eta)):
            raise InputError("parameters must be finite")
        object.__setattr__(self, "eta", _freeze(eta))

    @staticmethod
    def zeros(space: SampleSpace) -> "TabularModel":
        return TabularModel(space=space, eta=np.zeros(space.size))

    def log_f_batch(self, indices) -> np.ndarray:
        return self.eta[np.asarray(indices, dtype=np.int64)]


def _point_index(model, y) -> int:
    if np.ndim(y) == 0:
        return int(y)
    if isinstance(model, BoltzmannModel):
        return signs_to_index(np.asarray(y).tolist())
    raise InputError(f"point {y!r} is not an index")


def log_f(model, y, x=None) -> float:
    """Log unnormalized value at a point (hypercube points may be given as
    sign vectors). Conditional models need the feature vector x."""
    if isinstance(model, ConditionalModel):
        if x is None:
            raise InputError("conditional models need features x")
        return float(model.log_f_labels(x)[int(y)])
    idx = _point_index(model, y)
    if isinstance(model, BoltzmannModel):
        return float(model.log_f_batch([idx])[0])
    if isinstance(model, TabularModel):
        return float(model.eta[idx])
    raise InputError(f"unknown model type {type(model).__name__}")


def grad_log_f(model, y, x=None):
    """Parameter gradient of log f at a point, in the model's native layout."""
    if isinstance(model, BoltzmannModel):
        idx = _point_index(model, y)
        return model.pair_features([idx])[0]
    if isinstance(model, TabularModel):
        out = np.zeros(model.space.size)
        out[int(y)] = 1.0
        return out
    if isinstance(model, ConditionalModel):
        if x is None:
            raise InputError("conditional models need features x")
        out = np.zeros((model.num_labels, model.feature_dim))
        out[int(y)] = np.asarray(x, dtype=np.float64)
        return out
    raise InputError(f"unknown model type {type(model).__name__}")


def _all_log_f(model) -> np.ndarray:
    space = model.space
    space.require_enumerable("normalization")
    return model.log_f_batch(np.arange(space.size))


def exact_log_z(model) -> float:
    """log sum_y f(y), computed stably over the enumerated space."""
    return float(logsumexp(_all_log_f(model)))


def normalize(model) -> Probability:
    """The normalized probability f / Z over the enumerated space."""
    logs = _all_log_f(model)
    return Probability(weights=np.exp(logs - logsumexp(logs)))


# ---------------------------------------------------------------------------
# persistence


def model_to_dict(model) -> dict:
    if isinstance(model, BoltzmannModel):
        return {"kind": "boltzmann", "D": model.dim, "upper": model.upper.tolist()}
    if isinstance(model, ConditionalModel):
        return {
            "kind": "conditional",
            "L": model.num_labels,
            "d": model.feature_dim,
            "theta": model.theta.tolist(),
        }
    if isinstance(model, TabularModel):
        return {
            "kind": "tabular",
            "space": model.space.spec_string(),
            "eta": model.eta.tolist(),
        }
    raise InputError(f"unknown model type {type(model).__name__}")


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "boltzmann":
        return BoltzmannModel(dim=int(doc["D"]), upper=np.array(doc["upper"]))
    if kind == "conditional":
        return ConditionalModel(
            num_labels=int(doc["L"]),
            feature_dim=int(doc["d"]),
            theta=np.array(doc["theta"]),
        )
    if kind == "tabular":
        return TabularModel(space=parse_space_spec(doc["space"]), eta=np.array(doc["eta"]))
    raise InputError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not a model file: {exc}") from exc
    return model_from_dict(doc)
