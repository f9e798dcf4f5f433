"""Seeded random generation: exact sampling, Gibbs chains, and annealed
importance sampling for log-partition estimates.

Randomness always flows through an `RngStream`, a (seed, stream_id) pair
mapped to numpy's PCG64 via a SeedSequence spawn key. PCG64 output is stable
across platforms and numpy releases; the generator algorithm is fixed for
the life of this package, so every operation here is a pure function of its
inputs and the stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InputError
from .models import BoltzmannModel
from .potentials import Probability
from .spaces import SampleSpace, indices_to_signs, parse_space_spec, signs_matrix_to_indices


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def stream(self, stream_id: int) -> "RngStream":
        return RngStream(seed=self.seed, stream_id=stream_id)


@dataclass(frozen=True)
class AisConfig:
    num_temperatures: int = 1000
    num_chains: int = 100
    schedule: str = "linear"
    sweeps_per_temperature: int = 1

    def __post_init__(self):
        if self.num_temperatures < 2:
            raise InputError("AIS needs at least 2 temperatures")
        if self.num_chains < 1 or self.sweeps_per_temperature < 1:
            raise InputError("chain count and sweeps must be positive")
        if self.schedule != "linear":
            raise InputError(f"unknown schedule {self.schedule!r}")


def exact_sample(p: Probability, n: int, rng: RngStream) -> np.ndarray:
    """n i.i.d. state indices drawn by inverse CDF over the enumerated space."""
    if n < 1:
        raise InputError("sample count must be positive")
    cdf = np.cumsum(p.weights)
    u = rng.generator().random(n)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def _sweep_states(states: np.ndarray, w: np.ndarray, logit_u: np.ndarray, beta: float) -> None:
    """One systematic-scan sweep over every row of `states`, in place.

    Site i flips to +1 when logit(u) < 4*beta*h_i, the log odds of the
    conditional distribution given the other coordinates."""
    dim = states.shape[1]
    for i in range(dim):
        h = states @ w[:, i]
        states[:, i] = np.where(logit_u[:, i] < 4.0 * beta * h, 1.0, -1.0)


def gibbs_sample(
    model: BoltzmannModel,
    n: int,
    burn_in: int | None = None,
    thinning: int = 1,
    rng: RngStream = RngStream(0),
) -> np.ndarray:
    """Systematic-scan single-site Gibbs chain for a Boltzmann machine.

    `burn_in` counts full sweeps and defaults to 100*D; after burn-in the
    state is recorded every `thinning` sweeps until n states are collected.
    Returns canonical state indices.
    """
    if n < 1:
        raise InputError("sample count must be positive")
    if thinning < 1:
        raise InputError("thinning must be positive")
    dim = model.dim
    if burn_in is None:
        burn_in = 100 * dim
    w = model.matrix
    gen = rng.generator()
    state = (2.0 * gen.integers(0, 2, size=(1, dim)) - 1.0).astype(np.float64)
    out = np.empty(n, dtype=np.int64)
    total_sweeps = burn_in + n * thinning
    taken = 0
    sweeps_done = 0
    chunk = 4096
    while sweeps_done < total_sweeps:
        block = min(chunk, total_sweeps - sweeps_done)
        u = gen.random((block, dim))
        logit_u = np.log(u) - np.log1p(-u)
        for t in range(block):
            _sweep_states(state, w, logit_u[t : t + 1], 1.0)
            sweeps_done += 1
            if sweeps_done > burn_in and (sweeps_done - burn_in) % thinning == 0:
                out[taken] = signs_matrix_to_indices(state)[0]
                taken += 1
    return out


def _energies(states: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", states @ w, states)


def ais_log_z(
    model: BoltzmannModel, config: AisConfig = AisConfig(), rng: RngStream = RngStream(0)
) -> tuple[float, float]:
    """Annealed importance sampling estimate of log Z with a delta-method
    standard error.

    The path runs from the uniform base (beta=0, log Z0 = D log 2) to the
    target (beta=1) along a linear schedule; each chain accumulates
    sum_k (beta_{k+1}-beta_k) * y'Wy at its current state, then takes
    `sweeps_per_temperature` Gibbs sweeps at the new temperature. The
    estimate is log-mean-exp of the chain weights plus D log 2.
    """
    dim = model.dim
    w = model.matrix
    gen = rng.generator()
    m = config.num_chains
    betas = np.linspace(0.0, 1.0, config.num_temperatures)
    states = (2.0 * gen.integers(0, 2, size=(m, dim)) - 1.0).astype(np.float64)
    log_w = np.zeros(m)
    for k in range(len(betas) - 1):
        log_w += (betas[k + 1] - betas[k]) * _energies(states, w)
        for _ in range(config.sweeps_per_temperature):
            u = gen.random((m, dim))
            logit_u = np.log(u) - np.log1p(-u)
            _sweep_states(states, w, logit_u, betas[k + 1])
    log_base = dim * np.log(2.0)
    estimate = float(log_base + logsumexp(log_w) - np.log(m))
    shifted = np.exp(log_w - log_w.max())
    mean = shifted.mean()
    if m > 1:
        std_error = float(shifted.std(ddof=1) / (mean * np.sqrt(m)))
    else:
        std_error = float("inf")
    return estimate, std_error


# ---------------------------------------------------------------------------
# sample files: one sample per line, `# space <kind> <param> seed <seed>` header


def write_samples(path, space: SampleSpace, indices, seed: int) -> None:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    param = space.dim if space.kind == "hypercube" else space.size
    lines = [f"# space {space.kind} {param} seed {seed}"]
    if space.kind == "hypercube":
        signs = indices_to_signs(idx, space.dim)
        lines += [" ".join(f"{s:+d}" for s in row) for row in signs]
    else:
        lines += [str(int(i)) for i in idx]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_samples(path) -> tuple[SampleSpace, np.ndarray, int]:
    with open(path) as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw or not raw[0].startswith("# space "):
        raise InputError(f"{path}: missing `# space <kind> <param> seed <seed>` header")
    parts = raw[0].split()
    try:
        kind, param, seed = parts[2], int(parts[3]), int(parts[5])
    except (IndexError, ValueError) as exc:
        raise InputError(f"{path}: bad header {raw[0]!r}") from exc
    space = parse_space_spec(f"{kind}:{param}")
    rows = []
    for lineno, line in enumerate(raw[1:], start=2):
        try:
            if space.kind == "hypercube":
                signs = [int(t) for t in line.split()]
                if len(signs) != space.dim:
                    raise ValueError(f"expected {space.dim} coordinates")
                rows.append(signs)
            else:
                rows.append(int(line))
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
    if space.kind == "hypercube":
        idx = signs_matrix_to_indices(np.array(rows, dtype=np.int64))
    else:
        idx = np.array(rows, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= space.size):
            raise InputError(f"{path}: sample outside the space")
    return space, idx, seed
