"""Empirical score minimization over model parameters.

The optimizer is plain gradient descent with Armijo backtracking: descent is
guaranteed, every run is deterministic, and at desk scale nothing faster is
needed. Objectives assemble their parameter gradient analytically by chaining
the score's partials with respect to log f through each model's feature map;
finite differences only appear in tests.

Unconditional objectives aggregate duplicate samples by frequency and touch
only the union of the sampled points' neighborhoods, so fitting never
enumerates the space. Conditional (per-feature-vector) objectives work on
dense (n, labels) matrices since label sets are small.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InputError
from .models import BoltzmannModel, ConditionalModel, TabularModel
from .potentials import LocalPotentialFamily, Probability, ScoreSpec
from .scoring import score_and_logf_gradient

STEP_FLOOR = 1e-20


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 10000
    gradient_tolerance: float = 1e-6  # infinity norm
    initial_step: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    l2_penalty: float = 0.0
    deterministic_reduction: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InputError("max_iterations must be positive")
        if self.gradient_tolerance <= 0 or self.initial_step <= 0:
            raise InputError("tolerance and initial step must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack_factor < 1:
            raise InputError("armijo_c and backtrack_factor must lie in (0,1)")
        if self.l2_penalty < 0:
            raise InputError("l2_penalty must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    parameters: object  # fitted model
    final_objective: float
    gradient_norm: float
    iterations_used: int
    converged: bool
    trace: tuple[tuple[float, float], ...] = field(repr=False)

    def report_lines(self) -> list[str]:
        lines = [
            "record=fit "
            f"objective={self.final_objective!r} grad_norm={self.gradient_norm!r} "
            f"iterations={self.iterations_used} converged={self.converged}"
        ]
        lines += [
            f"record=trace iteration={i} objective={obj!r} grad_norm={gn!r}"
            for i, (obj, gn) in enumerate(self.trace)
        ]
        return lines


class NonFiniteObjectiveError(InputError):
    """Objective became non-finite and backtracking could not recover."""

    def __init__(self, sample_index, message: str):
        self.sample_index = sample_index
        super().__init__(message)


# ---------------------------------------------------------------------------
# unconditional score objectives


def bind_spec(spec: ScoreSpec, graph):
    """Bind a parsed score spec to a graph: (family, standard_cl objective
    flag), the shape `fit`/`empirical_score` accept."""
    return spec.family(graph), spec.standard_cl


class _ParamMap:
    """Model parameters as a flat vector plus the log-f pullback."""

    def __init__(self, model):
        self.template = model
        if isinstance(model, BoltzmannModel):
            self.x0 = model.upper.copy()
        elif isinstance(model, TabularModel):
            self.x0 = model.eta.copy()
        else:
            raise InputError("unconditional fitting needs a Boltzmann or tabular model")

    def bind(self, points: np.ndarray) -> None:
        self.points = points
        if isinstance(self.template, BoltzmannModel):
            self.features = self.template.pair_features(points)

    def logs(self, x: np.ndarray) -> np.ndarray:
        if isinstance(self.template, BoltzmannModel):
            return self.features @ x
        return x[self.points]

    def pullback(self, g: np.ndarray) -> np.ndarray:
        if isinstance(self.template, BoltzmannModel):
            return self.features.T @ g
        out = np.zeros_like(self.x0)
        np.add.at(out, self.points, g)
        return out

    def model(self, x: np.ndarray):
        if isinstance(self.template, BoltzmannModel):
            return BoltzmannModel(dim=self.template.dim, upper=x)
        return TabularModel(space=self.template.space, eta=x)


class _ScoreObjective:
    """Mean score over sampled states, aggregated by state frequency."""

    def __init__(self, family, model, samples, weights=None, standard_cl=False, l2=0.0):
        samples = np.asarray(samples, dtype=np.int64).reshape(-1)
        if samples.size == 0:
            raise InputError("samples must be nonempty")
        if family.space.spec_string() != model.space.spec_string():
            raise InputError(
                f"score family lives on {family.space.spec_string()}, "
                f"model on {model.space.spec_string()}"
            )
        if samples.min() < 0 or samples.max() >= family.space.size:
            raise InputError("sample index outside the space")
        if weights is None:
            states, counts = np.unique(samples, return_counts=True)
            w = counts / counts.sum()
        else:
            states = samples
            w = np.asarray(weights, dtype=np.float64)
        self.family = family
        self.standard_cl = standard_cl
        self.l2 = l2
        self.states = states
        self.weights = w
        self.params = _ParamMap(model)
        self._compile()

    def _compile(self):
        fam = self.family
        states = self.states
        if self.standard_cl:
            blocks = [fam.block_lists(int(y)) for y in states]
            pts = [states] + [
                np.concatenate([b[i] for b in blocks]) for i in range(len(blocks[0]))
            ]
            flat = np.concatenate(pts)
        else:
            nbrs = [fam.neighbors(int(y)) for y in states]
            pieces = [states, np.concatenate(nbrs)]
            if not fam.additive:
                for bn in nbrs:
                    pieces.append(np.concatenate([fam.neighbors(int(z)) for z in bn]))
            flat = np.concatenate(pieces)
        self.universe = np.unique(flat)
        self.params.bind(self.universe)
        self._slot = dict(zip(self.universe.tolist(), range(len(self.universe))))
        self.ypos = np.array([self._slot[int(y)] for y in states], dtype=np.int64)
        degs = {len(fam.neighbors(int(y))) for y in states}
        self._uniform_degree = len(degs) == 1 and fam.active is None
        if self.standard_cl and fam.active is not None:
            raise InputError("standard CL objectives assume the whole-space active set")
        if self.standard_cl:
            self._nblocks = [
                np.stack([
                    np.array([self._slot[int(z)] for z in fam.block_lists(int(y))[i]])
                    for y in states
                ])
                for i in range(len(fam.block_lists(int(states[0]))))
            ]
        elif self._uniform_degree:
            self.nbpos = np.stack(
                [np.array([self._slot[int(z)] for z in fam.neighbors(int(y))]) for y in states]
            )
            if not fam.additive:
                inner = []
                for y in states:
                    rows = []
                    for z in fam.neighbors(int(y)):
                        rows.append([self._slot[int(wpt)] for wpt in fam.neighbors(int(z))])
                    inner.append(rows)
                self.inner = np.array(inner, dtype=np.int64)

    @property
    def x0(self):
        return self.params.x0

    def model(self, x):
        return self.params.model(x)

    def _score_terms(self, logs):
        """(per-state scores, dJ/d logs) for the current log values."""
        fam = self.family
        n_u = len(self.universe)
        if self.standard_cl:
            return self._standard_cl_terms(logs, n_u)
        if not self._uniform_degree:
            return self._ragged_terms(logs, n_u)
        ly = logs[self.ypos]
        if fam.additive:
            value_term, grad_term = fam.edge_terms()
            d = logs[self.nbpos] - ly[:, None]
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                vals = np.sum(value_term(d), axis=1)
                g = grad_term(d)
            dj = np.bincount(
                self.nbpos.ravel(), weights=(g * self.weights[:, None]).ravel(), minlength=n_u
            )
            dj -= np.bincount(self.ypos, weights=g.sum(axis=1) * self.weights, minlength=n_u)
            return vals, dj
        if fam.kind == "ps":
            return self._ps_terms(logs, n_u)
        return self._ragged_terms(logs, n_u)

    def _ps_terms(self, logs, n_u):
        gamma = self.family.gamma
        ly = logs[self.ypos]
        lz = logs[self.nbpos]
        lw = logs[self.inner]
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            log_norm = logsumexp((1.0 + gamma) * (lw - lz[:, :, None]), axis=2) / (1.0 + gamma)
            log_norm = log_norm + lz  # log ||f over b(z)|| in absolute scale
            t = np.exp(gamma * (ly[:, None] - log_norm))
            vals = -t.sum(axis=1)
            p = np.exp((1.0 + gamma) * (lw - log_norm[:, :, None]))
            contrib = gamma * t[:, :, None] * p * self.weights[:, None, None]
        dj = np.bincount(self.inner.ravel(), weights=contrib.ravel(), minlength=n_u)
        dj -= np.bincount(
            self.ypos, weights=gamma * t.sum(axis=1) * self.weights, minlength=n_u
        )
        return vals, dj

    def _standard_cl_terms(self, logs, n_u):
        ly = logs[self.ypos]
        vals = np.zeros(len(self.states))
        dj = np.zeros(n_u)
        for nb in self._nblocks:
            lblk = logs[nb]
            lse = logsumexp(np.concatenate([lblk, ly[:, None]], axis=1), axis=1)
            vals += lse - ly
            soft = np.exp(lblk - lse[:, None])
            dj += np.bincount(nb.ravel(), weights=(soft * self.weights[:, None]).ravel(), minlength=n_u)
            dj += np.bincount(self.ypos, weights=(np.exp(ly - lse) - 1.0) * self.weights, minlength=n_u)
        return vals, dj

    def _ragged_terms(self, logs, n_u):
        slot = self._slot
        logf = lambda i: logs[slot[int(i)]]
        vals = np.zeros(len(self.states))
        dj = np.zeros(n_u)
        for k, y in enumerate(self.states):
            value, idx, grad = score_and_logf_gradient(self.family, int(y), logf)
            vals[k] = value
            for i, g in zip(idx, grad):
                dj[slot[int(i)]] += self.weights[k] * g
        return vals, dj

    def value_and_grad(self, x):
        # exploratory line-search steps overflow by design; non-finite
        # values are treated as rejections upstream
        with np.errstate(all="ignore"):
            logs = self.params.logs(x)
            vals, dj = self._score_terms(logs)
            value = float(vals @ self.weights) + self.l2 * float(x @ x)
            grad = self.params.pullback(dj) + 2.0 * self.l2 * x
        return value, grad

    def value(self, x):
        with np.errstate(all="ignore"):
            logs = self.params.logs(x)
            vals, _ = self._score_terms(logs)
            return float(vals @ self.weights) + self.l2 * float(x @ x)

    def offending_sample(self, x) -> int | None:
        """Index (into the deduplicated state list) of the first state whose
        score is non-finite at x; None if all are finite."""
        with np.errstate(all="ignore"):
            logs = self.params.logs(x)
            vals, _ = self._score_terms(logs)
        bad = np.flatnonzero(~np.isfinite(vals))
        return int(bad[0]) if bad.size else None


class _MleObjective:
    """Negative mean log-likelihood with the exact normalization constant."""

    def __init__(self, model, samples, weights=None, l2=0.0):
        samples = np.asarray(samples, dtype=np.int64).reshape(-1)
        if samples.size == 0:
            raise InputError("samples must be nonempty")
        self.params = _ParamMap(model)
        space = model.space
        space.require_enumerable("mle_fit")
        self.params.bind(np.arange(space.size))
        if weights is None:
            self.emp = np.bincount(samples, minlength=space.size) / samples.size
        else:
            self.emp = np.zeros(space.size)
            np.add.at(self.emp, samples, np.asarray(weights, dtype=np.float64))
        self.l2 = l2

    @property
    def x0(self):
        return self.params.x0

    def model(self, x):
        return self.params.model(x)

    def value_and_grad(self, x):
        logs = self.params.logs(x)
        lz = float(logsumexp(logs))
        value = lz - float(self.emp @ logs) + self.l2 * float(x @ x)
        q = np.exp(logs - lz)
        grad = self.params.pullback(q - self.emp) + 2.0 * self.l2 * x
        return value, grad

    def value(self, x):
        logs = self.params.logs(x)
        return float(logsumexp(logs)) - float(self.emp @ logs) + self.l2 * float(x @ x)

    def offending_sample(self, x):
        return None


# ---------------------------------------------------------------------------
# conditional objectives (per-sample label spaces sharing one graph)


def _label_masks(graph):
    size = graph.space.size
    b = np.zeros((size, size), dtype=bool)
    for i in range(size):
        b[i, graph.neighbors(i)] = True
    n = b.copy()
    np.fill_diagonal(n, True)
    return b, n


class _ConditionalObjective:
    """Mean conditional score over (x_i, y_i) pairs; kind-specific dense
    kernels over (n, labels) matrices."""

    def __init__(self, kind, gamma, graph, model, features, labels, *, standard_cl=False,
                 edge_terms=None, l2=0.0, gauge_fix_last=False, mle=False):
        self.kind = kind
        self.gamma = gamma
        self.mle = mle
        self.standard_cl = standard_cl
        self.edge_terms = edge_terms
        self.l2 = l2
        self.gauge_fix_last = gauge_fix_last
        self.model_template = model
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise InputError("features and labels must align")
        if y.size == 0:
            raise InputError("samples must be nonempty")
        if x.shape[1] != model.feature_dim:
            raise InputError("feature dimension does not match the model")
        if y.min() < 0 or y.max() >= model.num_labels:
            raise InputError("labels outside the model's range")
        self.x = x
        self.y = y
        self.rows = np.arange(y.size)
        if not mle:
            self.bmask, self.nmask = _label_masks(graph)
        self.shape = (model.num_labels, model.feature_dim)

    @property
    def x0(self):
        return self.model_template.theta.ravel().copy()

    def model(self, flat):
        return ConditionalModel(*self.shape, theta=flat.reshape(self.shape))

    def _matrices(self, flat):
        theta = flat.reshape(self.shape)
        lmat = self.x @ theta.T
        # scores and per-x log losses are shift invariant; shifting rows
        # keeps exponentials in range
        return lmat - lmat.max(axis=1, keepdims=True)

    def _kernel(self, ls):
        rows, y = self.rows, self.y
        if self.mle:
            lse = logsumexp(ls, axis=1)
            vals = lse - ls[rows, y]
            g = np.exp(ls - lse[:, None])
            g[rows, y] -= 1.0
            return vals, g
        bm = self.bmask[y]
        if self.kind in ("pl", "rm", "dp", "custom"):
            value_term, grad_term = self.edge_terms
            d = np.where(bm, ls - ls[rows, y][:, None], 0.0)
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                vals = np.sum(np.where(bm, value_term(d), 0.0), axis=1)
                g = np.where(bm, grad_term(d), 0.0)
            g[rows, y] = 0.0
            g[rows, y] = -g.sum(axis=1)
            return vals, g
        if self.kind == "ps":
            gamma = self.gamma
            with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
                a = np.exp((1.0 + gamma) * ls)
                den = a @ self.bmask
                log_norm = np.log(den) / (1.0 + gamma)
                t = np.where(bm, np.exp(gamma * (ls[rows, y][:, None] - log_norm)), 0.0)
                vals = -t.sum(axis=1)
                # masked-out columns may have a fully underflowed ball; keep
                # their zero weight from poisoning the gradient
                den_safe = np.where(den > 0.0, den, 1.0)
                g = gamma * a * ((t / den_safe) @ self.bmask)
            g[rows, y] -= gamma * t.sum(axis=1)
            return vals, g
        # cl / mcl with the single whole-neighborhood block
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            f = np.exp(ls)
            nden = f @ self.nmask
            ny = self.nmask[y]
            nden_safe = np.where(nden > 0.0, nden, 1.0)
            if self.standard_cl:
                vals = np.log(nden[rows, y]) - ls[rows, y]
                g = ny * f / nden_safe[rows, y][:, None]
                g[rows, y] -= 1.0
                return vals, g
            c = f / nden_safe
            vals = np.log(nden[rows, y]) - ls[rows, y] + (ny * c).sum(axis=1) - 1.0
            g = (
                ny * f / nden_safe[rows, y][:, None]
                + ny * c
                - f * ((ny * c / nden_safe) @ self.nmask)
            )
            g[rows, y] -= 1.0
        return vals, g

    def value_and_grad(self, flat):
        with np.errstate(all="ignore"):
            ls = self._matrices(flat)
            vals, g = self._kernel(ls)
            n = len(self.y)
            value = float(vals.mean()) + self.l2 * float(flat @ flat)
            gtheta = (g.T @ self.x) / n + 2.0 * self.l2 * flat.reshape(self.shape)
        if self.gauge_fix_last:
            gtheta[-1] = 0.0
        return value, gtheta.ravel()

    def value(self, flat):
        with np.errstate(all="ignore"):
            ls = self._matrices(flat)
            vals, _ = self._kernel(ls)
            return float(vals.mean()) + self.l2 * float(flat @ flat)

    def offending_sample(self, flat):
        with np.errstate(all="ignore"):
            ls = self._matrices(flat)
            vals, _ = self._kernel(ls)
        bad = np.flatnonzero(~np.isfinite(vals))
        return int(bad[0]) if bad.size else None


# ---------------------------------------------------------------------------
# the optimizer


def _minimize(objective, config: FitConfig) -> FitResult:
    x = np.array(objective.x0, dtype=np.float64)
    fx, gx = objective.value_and_grad(x)
    if not np.isfinite(fx):
        bad = objective.offending_sample(x)
        raise NonFiniteObjectiveError(
            bad, f"objective non-finite at the initial point (sample {bad})"
        )
    trace = [(fx, float(np.max(np.abs(gx))) if gx.size else 0.0)]
    step = config.initial_step
    iterations = 0
    converged = trace[0][1] <= config.gradient_tolerance
    while not converged and iterations < config.max_iterations:
        direction = -gx
        with np.errstate(all="ignore"):
            slope = float(gx @ direction)  # -||g||^2
        t = step
        while True:
            with np.errstate(all="ignore"):
                xt = x + t * direction
            ft = objective.value(xt)
            if np.isfinite(ft) and ft <= fx + config.armijo_c * t * slope:
                break
            t *= config.backtrack_factor
            if t < STEP_FLOOR:
                if not np.isfinite(ft):
                    # non-finite persists at vanishing steps: genuinely broken
                    bad = objective.offending_sample(xt)
                    raise NonFiniteObjectiveError(
                        bad,
                        f"objective non-finite during line search (sample {bad}); "
                        "parameters at the failing trial step are reported",
                    )
                # float noise beats the decrease test; stop where we are
                t = 0.0
                break
        if t == 0.0:
            break
        x = x + t * direction
        fx, gx = objective.value_and_grad(x)
        step = 2.0 * t
        iterations += 1
        gnorm = float(np.max(np.abs(gx)))
        trace.append((fx, gnorm))
        converged = gnorm <= config.gradient_tolerance
    return FitResult(
        parameters=objective.model(x),
        final_objective=trace[-1][0],
        gradient_norm=trace[-1][1],
        iterations_used=iterations,
        converged=converged,
        trace=tuple(trace),
    )


# ---------------------------------------------------------------------------
# public operations


def _build_objective(spec_or_family, model, samples, features, config, weights=None):
    l2 = config.l2_penalty
    if isinstance(model, ConditionalModel):
        if features is None:
            raise InputError("conditional models need features")
        if isinstance(spec_or_family, ScoreSpec):
            raise InputError("bind the ScoreSpec to a label graph first (bind_spec)")
        fam = spec_or_family
        if isinstance(fam, tuple):
            fam, standard_cl = fam
        else:
            standard_cl = False
        if fam.space.size != model.num_labels:
            raise InputError("family's label space does not match the model")
        edge = fam.edge_terms() if fam.additive else None
        return _ConditionalObjective(
            fam.kind, fam.gamma, fam.graph, model, features, samples,
            standard_cl=standard_cl, edge_terms=edge, l2=l2,
        )
    fam, standard_cl = (
        spec_or_family if isinstance(spec_or_family, tuple) else (spec_or_family, False)
    )
    if not isinstance(fam, LocalPotentialFamily):
        raise InputError("expected a potential family (bind ScoreSpecs to a graph first)")
    if standard_cl and fam.kind != "cl":
        raise InputError("standard CL objectives need a composite-likelihood family")
    return _ScoreObjective(fam, model, samples, weights=weights, standard_cl=standard_cl, l2=l2)


def empirical_score(spec_or_family, model, samples, features=None) -> float:
    """Mean score of the samples under the model's unnormalized values."""
    config = FitConfig()
    obj = _build_objective(spec_or_family, model, samples, features, config)
    return obj.value(obj.x0)


def fit(spec_or_family, model_init, samples, config: FitConfig | None = None,
        features=None, gauge_fix_last: bool = False) -> FitResult:
    """Minimize the empirical score over the model's parameters.

    `spec_or_family` is a LocalPotentialFamily (gradient score objective) or
    a (family, standard_cl) pair for the plain composite likelihood.
    Conditional models take labels in `samples` and a feature matrix.
    """
    config = config or FitConfig()
    obj = _build_objective(spec_or_family, model_init, samples, features, config)
    if gauge_fix_last:
        if not isinstance(model_init, ConditionalModel):
            raise InputError("gauge fixing applies to conditional models")
        obj.gauge_fix_last = True
    return _minimize(obj, config)


def mle_fit(model_init, samples, config: FitConfig | None = None, features=None) -> FitResult:
    """Minimize the exact negative log-likelihood (enumerable spaces, or
    conditional models whose label sets normalize directly)."""
    config = config or FitConfig()
    if isinstance(model_init, ConditionalModel):
        if features is None:
            raise InputError("conditional models need features")
        obj = _ConditionalObjective(
            "mle", None, None, model_init, features, samples, l2=config.l2_penalty, mle=True
        )
    else:
        obj = _MleObjective(model_init, samples, l2=config.l2_penalty)
    return _minimize(obj, config)


def population_gradient(spec_or_family, model, p: Probability) -> np.ndarray:
    """Gradient of the population objective sum_y p_y S(y, f_theta) at the
    model's parameters, over the enumerated space."""
    space = model.space
    space.require_enumerable("population_gradient")
    config = FitConfig()
    states = np.arange(space.size, dtype=np.int64)
    obj = _build_objective(spec_or_family, model, states, None, config, weights=p.weights)
    _, grad = obj.value_and_grad(obj.x0)
    return grad


def negative_log_loss(model, test_samples, log_z: float | None = None, features=None) -> float:
    """Mean of log Z - log f over test samples; conditional models normalize
    per feature vector exactly."""
    if isinstance(model, ConditionalModel):
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(test_samples, dtype=np.int64).reshape(-1)
        lmat = x @ model.theta.T
        lse = logsumexp(lmat, axis=1)
        return float(np.mean(lse - lmat[np.arange(y.size), y]))
    if log_z is None:
        raise InputError("supply log_z (exact or estimated) for unconditional models")
    idx = np.asarray(test_samples, dtype=np.int64).reshape(-1)
    return float(np.mean(log_z - model.log_f_batch(idx)))


def classify(model: ConditionalModel, x) -> int:
    """Most plausible label; ties resolve to the smallest label."""
    return int(np.argmax(model.log_f_labels(x)))


def classify_batch(model: ConditionalModel, features) -> np.ndarray:
    lmat = np.asarray(features, dtype=np.float64) @ model.theta.T
    return np.argmax(lmat, axis=1)


def test_error(model: ConditionalModel, features, labels) -> float:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise InputError("test set must be nonempty")
    return float(np.mean(classify_batch(model, features) != labels))
