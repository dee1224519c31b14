"""Differential evolution (DE/rand/1/bin) for non-smooth criteria."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, OptimizationError


@dataclass
class DEConfig:
    """Settings for :func:`de_minimize`.

    ``population_size`` of ``None`` means ``10 * dim`` (at least 8).
    ``bounds`` of ``None`` means ``[-10, 10]`` on every coordinate.
    The search stops early once the population energies have spread at most
    ``atol + tol * |mean|`` for ``patience`` consecutive generations; set
    ``patience=0`` to always run ``max_generations``.  Independently, a
    positive ``stall_generations`` stops the search once the best energy has
    not improved for that many generations.
    """

    population_size: int = None
    differential_weight: float = 0.8
    crossover_rate: float = 0.9
    max_generations: int = 300
    bounds: object = None
    seed: int = 0
    tol: float = 0.0
    atol: float = 0.0
    patience: int = 0
    stall_generations: int = 0

    def __post_init__(self):
        if not 0.0 < self.differential_weight < 2.0:
            raise ConfigurationError("differential_weight must lie in (0, 2)")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigurationError("crossover_rate must lie in [0, 1]")
        if self.population_size is not None and self.population_size < 4:
            raise ConfigurationError("population_size must be at least 4")
        if self.max_generations < 1:
            raise ConfigurationError("max_generations must be at least 1")
        if self.patience < 0:
            raise ConfigurationError("patience must be nonnegative")
        if self.stall_generations < 0:
            raise ConfigurationError("stall_generations must be nonnegative")

    def resolved_bounds(self, dim):
        if self.bounds is None:
            b = np.tile([-10.0, 10.0], (dim, 1))
        else:
            b = np.array(self.bounds, dtype=float).reshape(-1, 2)
            if b.shape[0] == 1 and dim > 1:
                b = np.tile(b, (dim, 1))
        if b.shape != (dim, 2):
            raise ConfigurationError(f"bounds must have shape ({dim}, 2)")
        if np.any(b[:, 0] >= b[:, 1]):
            raise ConfigurationError("each bound needs lo < hi")
        return b

    def with_seed(self, seed):
        return DEConfig(self.population_size, self.differential_weight,
                        self.crossover_rate, self.max_generations, self.bounds,
                        seed, self.tol, self.atol, self.patience, self.stall_generations)


def _evaluate(objective, pop, vectorized):
    if vectorized:
        f = np.asarray(objective(pop), dtype=float).reshape(-1)
    else:
        f = np.array([objective(x) for x in pop], dtype=float)
    f[~np.isfinite(f)] = np.inf
    return f


def de_minimize(objective, config, dim=None, vectorized=False):
    """Minimize ``objective`` over the box in ``config``.

    ``objective`` maps a 1-d array to a float, or with ``vectorized=True`` a
    ``(pop, dim)`` array to a vector.  Non-finite values count as ``+inf``.
    Returns ``(x_best, f_best, generations_used)``.
    """
    if dim is None:
        if config.bounds is None:
            raise ConfigurationError("dim is required when bounds are not given")
        dim = np.array(config.bounds, dtype=float).reshape(-1, 2).shape[0]
    bounds = config.resolved_bounds(dim)
    lo, hi = bounds[:, 0], bounds[:, 1]
    npop = config.population_size or max(8, 10 * dim)
    rng = np.random.default_rng(config.seed)
    F, CR = config.differential_weight, config.crossover_rate

    pop = lo + rng.random((npop, dim)) * (hi - lo)
    energy = _evaluate(objective, pop, vectorized)
    if not np.isfinite(energy).any():
        raise OptimizationError("objective is non-finite on the whole initial population")

    idx = np.arange(npop)
    calm = 0
    stall = 0
    best_f = energy.min()
    gen = 0
    for gen in range(1, config.max_generations + 1):
        # three distinct partners per member, all different from the member
        r = np.argsort(rng.random((npop, npop - 1)), axis=1)[:, :3]
        r += r >= idx[:, None]
        mutant = pop[r[:, 0]] + F * (pop[r[:, 1]] - pop[r[:, 2]])
        np.clip(mutant, lo, hi, out=mutant)
        cross = rng.random((npop, dim)) < CR
        cross[idx, rng.integers(0, dim, npop)] = True
        trial = np.where(cross, mutant, pop)
        f_trial = _evaluate(objective, trial, vectorized)
        if not np.isfinite(f_trial).any() and not np.isfinite(energy).any():
            raise OptimizationError(f"all candidates non-finite in generation {gen}")
        better = f_trial <= energy
        pop[better] = trial[better]
        energy[better] = f_trial[better]

        if config.stall_generations:
            if energy.min() < best_f:
                best_f = energy.min()
                stall = 0
            else:
                stall += 1
                if stall >= config.stall_generations:
                    break

        if config.patience:
            finite = energy[np.isfinite(energy)]
            spread = np.ptp(finite) if finite.size == npop else np.inf
            if spread <= config.atol + config.tol * abs(finite.mean()):
                calm += 1
                if calm >= config.patience:
                    break
            else:
                calm = 0

    best = int(np.argmin(energy))
    return pop[best].copy(), float(energy[best]), gen
