"""Sampling: GUE matrices, unitary-ensemble eigenvalues, perturbed spectra,
and nonintersecting Brownian bridges via the Hermitian-bridge device.

All randomness flows through RngStream (seed, index): identical pairs give
bitwise-identical sample sequences, and replicas use disjoint stream indices
so aggregation order never matters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, EigenFailure, EmptyRange, MixingWarning
from .measure import PotentialSpec


@dataclass(frozen=True)
class RngStream:
    """Deterministic (seed, stream-index) random source."""

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.index,))
        return np.random.default_rng(ss)

    def child(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.index + offset)


def _gen(rng: Union[RngStream, np.random.Generator]) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


def sample_gue(n: int, rng) -> np.ndarray:
    """One GUE matrix with density proportional to exp(-n/2 tr H^2).

    Diagonal entries are N(0, 1/n); off-diagonal real and imaginary parts
    are N(0, 1/(2n)) each.
    """
    g = _gen(rng)
    h = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    sd = math.sqrt(0.5 / n)
    re = g.normal(0.0, sd, size=len(iu[0]))
    im = g.normal(0.0, sd, size=len(iu[0]))
    h[iu] = re + 1j * im
    h = h + h.conj().T
    h[np.diag_indices(n)] = g.normal(0.0, math.sqrt(1.0 / n), size=n)
    return h


def sample_perturbed(eigs_or_matrix, tau: float, rng) -> np.ndarray:
    """Sorted eigenvalues of M + sqrt(tau) H for GUE H.

    When only eigenvalues are given, M is taken diagonal: the GUE is
    unitarily invariant, so the law of the perturbed spectrum is unchanged.
    """
    if tau < 0:
        raise ConfigError("tau must be >= 0")
    m = np.asarray(eigs_or_matrix)
    if m.ndim == 1:
        if tau == 0.0:
            return np.sort(m.real.astype(float))
        mat = np.diag(m.astype(complex))
    elif m.ndim == 2 and m.shape[0] == m.shape[1]:
        if tau == 0.0:
            try:
                return np.sort(np.linalg.eigvalsh(m))
            except np.linalg.LinAlgError as exc:
                raise EigenFailure(str(exc)) from exc
        mat = m.astype(complex)
    else:
        raise ConfigError("expected eigenvalue vector or square matrix")
    n = mat.shape[0]
    x = mat + math.sqrt(tau) * sample_gue(n, rng)
    try:
        return np.sort(np.linalg.eigvalsh(x))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


# ---------------------------------------------------------------------------
# unitary-ensemble eigenvalues by Metropolis


def _log_weight_delta(x: np.ndarray, sites: np.ndarray, prop: np.ndarray,
                      potential: PotentialSpec, n: int) -> np.ndarray:
    rows = np.arange(x.shape[0])
    cur = x[rows, sites]
    diff_new = prop[:, None] - x
    diff_old = cur[:, None] - x
    diff_new[rows, sites] = 1.0
    diff_old[rows, sites] = 1.0
    log_new = np.sum(np.log(np.maximum(np.abs(diff_new), 1e-300)), axis=1)
    log_old = np.sum(np.log(np.maximum(np.abs(diff_old), 1e-300)), axis=1)
    return 2.0 * (log_new - log_old) - n * (potential(prop) - potential(cur))


def sample_ue_eigs_batch(potential: PotentialSpec, n: int, rng, draws: int,
                         mcmc: Optional[dict] = None) -> np.ndarray:
    """Batch of draws from the density ~ Delta(x)^2 prod exp(-n V(x_j)).

    Single-coordinate Metropolis updates run vectorized across independent
    chains; the proposal width is tuned to ~0.35 acceptance during burn-in
    and the post-burn-in acceptance rate is checked against [0.2, 0.6].
    """
    if n > 64:
        raise ConfigError("unitary-ensemble sampler capped at n <= 64")
    mcmc = dict(mcmc or {})
    steps = int(mcmc.get("steps", 10 * n))
    sigma = float(mcmc.get("step_size", 0.5))
    burn_in = int(mcmc.get("burn_in", 300 * n))
    g = _gen(rng)
    chains = min(draws, 2048)
    rounds = -(-draws // chains)
    x = g.normal(0.0, 1.0, size=(chains, n))

    accepted = 0
    proposed = 0

    def step(x, sigma, tune):
        nonlocal accepted, proposed
        sites = g.integers(n, size=chains)
        prop = x[np.arange(chains), sites] + g.normal(0.0, sigma, size=chains)
        delta = _log_weight_delta(x, sites, prop, potential, n)
        accept = np.log(g.random(chains)) < delta
        x[np.arange(chains)[accept], sites[accept]] = prop[accept]
        if not tune:
            accepted += int(np.sum(accept))
            proposed += chains
        return float(np.mean(accept))

    for i in range(burn_in):
        rate = step(x, sigma, tune=True)
        if i % 20 == 19:
            sigma *= math.exp(0.25 * (rate - 0.35))
    out = np.empty((rounds * chains, n))
    for r in range(rounds):
        for _ in range(steps):
            step(x, sigma, tune=False)
        out[r * chains:(r + 1) * chains] = np.sort(x, axis=1)
    rate = accepted / max(proposed, 1)
    if not 0.2 <= rate <= 0.6:
        warnings.warn(f"MCMC acceptance rate {rate:.2f} outside [0.2, 0.6]",
                      MixingWarning)
    return out[:draws]


def sample_ue_eigs(potential: PotentialSpec, n: int, rng,
                   mcmc: Optional[dict] = None) -> np.ndarray:
    """One draw of sorted unitary-ensemble eigenvalues."""
    return sample_ue_eigs_batch(potential, n, rng, 1, mcmc)[0]


# ---------------------------------------------------------------------------
# nonintersecting Brownian bridges


@dataclass
class PathEnsemble:
    """Nonintersecting-bridge trajectories observed at fixed times.

    paths has shape (replicas, len(times), n); within each replica and time
    the particle values are strictly increasing.
    """

    times: np.ndarray
    paths: np.ndarray
    n: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.paths = np.asarray(self.paths, dtype=float)
        if np.any(np.diff(self.paths, axis=2) <= 0):
            raise EigenFailure("particle ordering violated in a replica")

    @property
    def replicas(self) -> int:
        return self.paths.shape[0]

    def at_time(self, k: int) -> np.ndarray:
        return self.paths[:, k, :]


def sample_nibm(initial: Union[Callable, np.ndarray], times: Sequence[float],
                n: int, replicas: int, rng: RngStream,
                max_retries: int = 10) -> PathEnsemble:
    """Nonintersecting Brownian bridges ending together at 0 at time 1.

    Uses the Hermitian-bridge device: the particle configuration at time t
    has the law of the eigenvalues of (1-t) M + (1-t) W(t/(1-t)) where W is
    a Hermitian Brownian motion with entrywise variance scale 1/n.  The
    single-time marginal coincides with the spectrum of
    (1-t) M + sqrt(t(1-t)) H.
    """
    times = np.asarray(sorted(times), dtype=float)
    if times.size == 0 or times[0] <= 0 or times[-1] >= 1:
        raise ConfigError("times must be strictly inside (0, 1)")
    if not isinstance(rng, RngStream):
        raise ConfigError("sample_nibm needs an RngStream for replica streams")
    paths = np.empty((replicas, times.size, n))
    rejected = 0
    for r in range(replicas):
        for attempt in range(max_retries):
            g = rng.child(r * max_retries + attempt).generator()
            init = initial(g) if callable(initial) else np.asarray(initial)
            if init.shape != (n,):
                raise ConfigError("initial sampler must produce n eigenvalues")
            m = np.diag(init.astype(complex))
            w = np.zeros((n, n), dtype=complex)
            s_prev = 0.0
            ok = True
            for k, t in enumerate(times):
                s = t / (1.0 - t)
                w = w + math.sqrt(s - s_prev) * sample_gue(n, g)
                s_prev = s
                try:
                    eigs = np.sort(np.linalg.eigvalsh((1.0 - t) * (m + w)))
                except np.linalg.LinAlgError as exc:
                    raise EigenFailure(str(exc)) from exc
                if np.any(np.diff(eigs) < 1e-13):
                    ok = False
                    break
                paths[r, k] = eigs
            if ok:
                break
            rejected += 1
        else:
            raise EigenFailure(
                f"replica {r} kept colliding after {max_retries} retries")
    ens = PathEnsemble(times, paths, n)
    if rejected:
        warnings.warn(f"resampled {rejected} colliding replicas", RuntimeWarning)
    return ens


# ---------------------------------------------------------------------------
# histograms


def empirical_density(samples: Sequence[float], bins: dict):
    """Density-normalized histogram: heights trapezoid-integrate to the
    fraction of samples inside [lo, hi]."""
    lo, hi, count = float(bins["lo"]), float(bins["hi"]), int(bins["count"])
    if not hi > lo or count < 2:
        raise EmptyRange("need hi > lo and count >= 2")
    samples = np.asarray(samples, dtype=float)
    counts, edges = np.histogram(samples, bins=count, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        raise EmptyRange("no samples inside the histogram range")
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    heights = counts / (samples.size * width)
    fraction = total / samples.size
    tz = float(np.trapezoid(heights, centers))
    if tz > 0:
        heights = heights * (fraction / tz)
    return centers, heights
