"""Expectation engine: every integral against a model goes through here.

Both backends reduce an expectation to a weighted sum over a set of nodes
(a :class:`Rule`). The exact backend uses the reference points with weights
``f_p(x) w(x)``; the Monte Carlo backend uses draws with weights ``1/n``.

Monte Carlo draws are generated in fixed-size chunks. Chunk ``c`` gets its
own Philox (counter-based) stream keyed by ``SeedSequence(seed, spawn_key=(c,))``
and chunks are concatenated in index order, so the draws depend only on
``(seed, mc_samples)`` and not on how many workers produce them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import ExpectationError
from .model_space import MAX_EXACT_DIM, MAX_EXACT_POINTS, TINY_DENSITY, ParametricFamily

MC_CHUNK = 8192
MIN_VARIANCE_SAMPLES = 1000


@dataclass(frozen=True)
class ExpectationMethod:
    kind: str = "exact"
    mc_samples: int = 100_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in ("exact", "mc"):
            raise ValueError(f"expectation kind must be 'exact' or 'mc', got {self.kind!r}")
        if self.kind == "mc":
            if int(self.mc_samples) != self.mc_samples or self.mc_samples < 1:
                raise ValueError(f"mc_samples must be a positive integer, got {self.mc_samples}")
            if not 0 <= self.seed < 2**64:
                raise ValueError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def exact(cls) -> "ExpectationMethod":
        return cls("exact")

    @classmethod
    def monte_carlo(cls, mc_samples: int = 100_000, seed: int = 0,
                    workers: int = 1) -> "ExpectationMethod":
        return cls("mc", int(mc_samples), int(seed), int(workers))

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"

    def describe(self) -> dict:
        if self.is_exact:
            return {"kind": "exact"}
        return {"kind": "mc", "samples": self.mc_samples, "seed": self.seed}


EXACT = ExpectationMethod.exact()


class Rule(NamedTuple):
    """Nodes and probability weights realizing ``E(. | p)`` as a weighted sum."""

    points: np.ndarray
    weights: np.ndarray
    exact: bool

    @property
    def size(self) -> int:
        return self.weights.size


def chunk_stream(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def mc_draws(family: ParametricFamily, p, method: ExpectationMethod) -> np.ndarray:
    p = family.check(p)
    n = method.mc_samples
    sizes = [min(MC_CHUNK, n - start) for start in range(0, n, MC_CHUNK)]

    def draw(c):
        return family.sample(p, chunk_stream(method.seed, c), sizes[c])

    if method.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=method.workers) as pool:
            parts = list(pool.map(draw, range(len(sizes))))
    else:
        parts = [draw(c) for c in range(len(sizes))]
    return np.vstack(parts)


def rule(family: ParametricFamily, p, method: ExpectationMethod = EXACT) -> Rule:
    p = family.check(p)
    if method.is_exact:
        space = family.space
        if space.dim > MAX_EXACT_DIM or space.size > MAX_EXACT_POINTS:
            raise ExpectationError(
                f"exact expectation is unavailable on a space of dimension {space.dim} with "
                f"{space.size} points; use Monte Carlo")
        dens = family.density(p, space.points)
        probs = dens * space.weights
        # points with underflowed density carry no mass and are ineligible for scores
        keep = dens > TINY_DENSITY
        if keep.all():
            return Rule(space.points, probs, True)
        return Rule(space.points[keep], probs[keep], True)
    draws = mc_draws(family, p, method)
    return Rule(draws, np.full(draws.shape[0], 1.0 / draws.shape[0]), False)


def integrate(values, r: Rule) -> float:
    """Weighted sum of per-node values; numpy's pairwise summation in node order."""
    v = np.broadcast_to(np.asarray(values, dtype=float), r.weights.shape)
    if not r.exact:
        return float(np.sum(v)) / r.size
    return float(np.sum(v * r.weights))


def evaluate_on(g: Callable[[np.ndarray], np.ndarray], r: Rule) -> np.ndarray:
    out = np.asarray(g(r.points), dtype=float)
    if out.ndim == 0:
        return np.full(r.size, float(out))
    if out.shape != (r.size,):
        raise ValueError(f"integrand returned shape {out.shape}, expected ({r.size},)")
    return out


def expect(g: Callable[[np.ndarray], np.ndarray], family: ParametricFamily, p,
           method: ExpectationMethod = EXACT) -> float:
    """``E(g | p)`` for a vectorized integrand ``g`` taking points of shape ``(n, d)``."""
    r = rule(family, p, method)
    return integrate(evaluate_on(g, r), r)


def expect_pair(g, h, family: ParametricFamily, p,
                method: ExpectationMethod = EXACT) -> tuple[float, float, float]:
    """``(E g, E h, E gh)`` over one rule (the same draws for Monte Carlo)."""
    r = rule(family, p, method)
    gv, hv = evaluate_on(g, r), evaluate_on(h, r)
    return integrate(gv, r), integrate(hv, r), integrate(gv * hv, r)
