"""Synthetic scattered-data experiments and the convergence-rate study."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .estimator import EstimatorState, SplineFit
from .verification import l2_norm

DEFAULT_SIGMA2 = 5e-5
STUDY_SIGMA2 = 1e-4
DEFAULT_SWEEP = tuple(range(50, 111, 10))
FULL_SWEEP = tuple(range(50, 251, 10))
DEFAULT_CAP_SAMPLES = 60_000_000
CHUNK = 1 << 20


class ResourceCapExceeded(RuntimeError):
    pass


class PointDistribution(str, enum.Enum):
    """Observation-point laws: piecewise-uniform mixtures on [0, 1]."""

    UNIFORM = "uniform"
    LEFT = "left"
    BOTH_ENDS = "both-ends"

    @property
    def segments(self) -> tuple[tuple[float, float, float], ...]:
        """``(left, right, mass)`` for each uniform component."""
        if self is PointDistribution.UNIFORM:
            return ((0.0, 1.0, 1.0),)
        if self is PointDistribution.LEFT:
            return ((0.0, 0.5, 0.95), (0.5, 1.0, 0.05))
        return ((0.0, 0.2, 0.475), (0.2, 0.8, 0.05), (0.8, 1.0, 0.475))

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for lo, hi, mass in self.segments:
            out = np.where((x >= lo) & (x <= hi) & (out == 0.0), mass / (hi - lo), out)
        return out

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        segs = self.segments
        if len(segs) == 1:
            lo, hi, _ = segs[0]
            return lo + (hi - lo) * rng.random(n)
        cum = np.cumsum([m for _, _, m in segs])
        which = np.minimum(np.searchsorted(cum, rng.random(n), side="right"), len(segs) - 1)
        lo = np.array([s[0] for s in segs])[which]
        hi = np.array([s[1] for s in segs])[which]
        return lo + (hi - lo) * rng.random(n)


def truth_f(x):
    """Test function ``(x^2 + 3x + sin(4 pi x) + 2 exp(-8 (x - 2/5)^2)) / 100``."""
    x = np.asarray(x, dtype=np.float64)
    return (x * x + 3.0 * x + np.sin(4.0 * np.pi * x) + 2.0 * np.exp(-8.0 * (x - 0.4) ** 2)) / 100.0


def truth_fprime(x):
    x = np.asarray(x, dtype=np.float64)
    g = np.exp(-8.0 * (x - 0.4) ** 2)
    return (2.0 * x + 3.0 + 4.0 * np.pi * np.cos(4.0 * np.pi * x) - 32.0 * (x - 0.4) * g) / 100.0


def truth_fsecond(x):
    x = np.asarray(x, dtype=np.float64)
    g = np.exp(-8.0 * (x - 0.4) ** 2)
    return (2.0 - 16.0 * np.pi ** 2 * np.sin(4.0 * np.pi * x)
            + (512.0 * (x - 0.4) ** 2 - 32.0) * g) / 100.0


@dataclass(frozen=True)
class ExperimentConfig:
    M: int = 40
    N: int = 600
    sigma2: float = DEFAULT_SIGMA2
    distribution: PointDistribution = PointDistribution.UNIFORM
    repetitions: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "distribution", PointDistribution(self.distribution))
        if self.M < 1 or self.N < self.M:
            raise ValueError("need M >= 1 and N >= M")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and a spawn key such as ``(M, rep)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def generate(config: ExperimentConfig, rep: int = 0, chunk: int = CHUNK):
    """Yield ``(x, y)`` chunks for repetition ``rep``; ``y = f(x) + N(0, sigma2)``."""
    rng = make_rng(config.seed, config.M, config.N, rep)
    sd = math.sqrt(config.sigma2)
    remaining = config.N
    while remaining > 0:
        n = min(chunk, remaining)
        x = config.distribution.sample(rng, n)
        y = truth_f(x) + sd * rng.standard_normal(n)
        yield x, y
        remaining -= n


def sample(config: ExperimentConfig, rep: int = 0) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = zip(*generate(config, rep))
    return np.concatenate(xs), np.concatenate(ys)


def run_once(config: ExperimentConfig, rep: int = 0) -> tuple[EstimatorState, SplineFit]:
    state = EstimatorState(config.M, config.sigma2)
    for x, y in generate(config, rep):
        state.ingest_many(x, y)
    return state, state.fit("prior")


def reconstruction_errors(fit: SplineFit, interval=(0.0, 1.0), f=truth_f,
                          fprime=truth_fprime) -> tuple[float, float]:
    """``||f_N - f||`` and ``||f_N' - f'||`` in ``L^2(interval)``."""
    M = fit.basis.M
    e = l2_norm(lambda x: fit.value(x) - f(x), interval, M=M)
    ep = l2_norm(lambda x: fit.derivative(x) - fprime(x), interval, M=M)
    return e, ep


def choose_m(N: int, c: float = 1.0) -> int:
    """Knot count ``max(3, round(c * N**(1/5)))``."""
    if N < 1:
        raise ValueError("N must be positive")
    return max(3, int(round(c * N ** 0.2)))


def schedule_n(M: int) -> int:
    """Sample size paired with ``M`` in the rate study: ``M^5 / 10^4``."""
    return int(round(M ** 5 / 10_000))


def loglog_slope(n, err) -> float:
    """Least-squares slope of ``log(err)`` against ``log(n)``."""
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(err, float)), 1)[0])


@dataclass
class ConvergenceResult:
    rows: list[tuple[int, int, int, float, float]] = field(default_factory=list)
    slope_f: float | None = None
    slope_fprime: float | None = None

    def table(self) -> list[tuple[int, int, float, float]]:
        """Per-(M, N) means over repetitions, in schedule order."""
        out = []
        for M, N in dict.fromkeys((r[0], r[1]) for r in self.rows):
            sel = [r for r in self.rows if r[0] == M and r[1] == N]
            out.append((M, N, float(np.mean([r[3] for r in sel])), float(np.mean([r[4] for r in sel]))))
        return out

    def summary(self) -> dict:
        out = {
            "table": [
                {"M": M, "N": N, "mean_e_l2": e, "mean_eprime_l2": ep} for M, N, e, ep in self.table()
            ],
        }
        if self.slope_f is not None:
            out["slope_f"] = self.slope_f
            out["slope_fprime"] = self.slope_fprime
        return out


def convergence_study(M_list=DEFAULT_SWEEP, repetitions: int = 12, seed: int = 0,
                      sigma2: float = STUDY_SIGMA2, cap_samples: int = DEFAULT_CAP_SAMPLES,
                      progress=None) -> ConvergenceResult:
    """Mean reconstruction errors along ``N = M^5 / 10^4`` with uniform points."""
    M_list = [int(M) for M in M_list]
    if not M_list or min(M_list) < 3:
        raise ValueError("every M must be >= 3")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    pairs = [(M, schedule_n(M)) for M in M_list]
    for M, N in pairs:
        if N < M:
            raise ValueError(f"M={M} gives N={N} < M")
    total = repetitions * sum(N for _, N in pairs)
    if total > cap_samples:
        raise ResourceCapExceeded(f"study needs {total} samples, cap is {cap_samples}")

    result = ConvergenceResult()
    for M, N in pairs:
        config = ExperimentConfig(M=M, N=N, sigma2=sigma2, repetitions=repetitions, seed=seed)
        for rep in range(repetitions):
            _, fit = run_once(config, rep)
            e, ep = reconstruction_errors(fit)
            result.rows.append((M, N, rep, e, ep))
            if progress is not None:
                progress(M, N, rep, e, ep)
    if len(pairs) >= 2:
        table = result.table()
        ns = [t[1] for t in table]
        result.slope_f = loglog_slope(ns, [t[2] for t in table])
        result.slope_fprime = loglog_slope(ns, [t[3] for t in table])
    return result
