"""Small shared helpers: seeding, exact means, Wilson intervals, worker pools."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from math import sqrt
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# z quantile for a two-sided 99% Wilson score interval (Phi^-1(0.995))
Z99 = 2.5758293035489004

MASK64 = (1 << 64) - 1


def derive_seed(master: int, *indices: int) -> int:
    """Stable 64-bit child seed from a master seed and an index path.

    Hash-based so that parallel and serial trial orders see identical streams.
    """
    h = hashlib.sha256()
    h.update(int(master & MASK64).to_bytes(8, "little"))
    for ix in indices:
        h.update(int(ix & MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest()[:8], "little")


def rng_from(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & MASK64)


def bit_mean(bits: Sequence[int]) -> Fraction:
    """Exact average of a 0/1 vector. Empty vectors are the caller's problem."""
    return Fraction(int(sum(bits)), len(bits))


def ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def floor_frac(x: Fraction) -> int:
    return x.numerator // x.denominator


def threshold_count(theta: Fraction, fan_in: int) -> int:
    """Smallest number of ones meeting mean >= theta on fan_in inputs."""
    return ceil_frac(theta * fan_in)


def wilson_interval(successes: int, trials: int, z: float = Z99) -> tuple[float, float]:
    """Wilson score interval; stable at frequencies near 0 and 1."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = (z / denom) * sqrt(p * (1.0 - p) / trials + z2 / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Map preserving order; jobs > 1 fans out on threads.

    Results are collected by index so worker count never changes the output.
    """
    seq = list(items)
    if jobs <= 1 or len(seq) <= 1:
        return [fn(x) for x in seq]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, seq))


def frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_frac(text: str) -> Fraction:
    return Fraction(text)
