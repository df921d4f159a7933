"""Input models: i.i.d. order streams and replayed instances.

Randomness is counter based: every random value is a pure function of
(seed, order index, slot) through a splitmix64 finalizer, so order j of any
instance can be regenerated alone, trials never share state, and streams
are identical across runs and platforms for a fixed build.  Gaussians use
Box-Muller on two counter slots (rejection-free, so the slot layout is
static); the method is recorded in report headers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (CapacitySpec, ConfigError, ModelBounds, Order,
                   UNDECLARED_BOUNDS, instance_arrays)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_SALT_PART = np.uint64(0xD1342543DE82EF95)
_TRIAL_SALT = np.uint64(0xA0761D6478BD642F)
_SHUFFLE_SALT = np.uint64(0xE7037ED1A0B428DB)


def _finalize(x):
    """splitmix64 output function, vectorized over uint64 arrays."""
    with np.errstate(over="ignore"):  # uint64 wraparound is the point
        z = (x + _GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * _MIX_A
        z = (z ^ (z >> np.uint64(27))) * _MIX_B
        return z ^ (z >> np.uint64(31))


def mix64(seed, *parts):
    """Hash a seed with integer parts (scalars or arrays) into uint64."""
    h = _finalize(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for part in parts:
        p = np.asarray(part, dtype=np.uint64)
        with np.errstate(over="ignore"):
            h = _finalize(h ^ (p * _SALT_PART))
    return h


def counter_uniform(seed, index, slot):
    """Uniform(0, 1) exclusive of both ends, from (seed, index, slot)."""
    h = mix64(seed, index, np.uint64(slot))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def counter_normal(seed, index, slot_pair):
    """Standard normal via Box-Muller on slots (slot_pair, slot_pair + 1)."""
    u1 = counter_uniform(seed, index, slot_pair)
    u2 = counter_uniform(seed, index, slot_pair + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def derive_trial_seed(base_seed: int, trial_index: int) -> int:
    """Per-trial seed; independent of the trial count (seed isolation)."""
    return int(mix64(base_seed ^ int(_TRIAL_SALT), np.uint64(trial_index)))


RNG_METHOD = "splitmix64-counter+box-muller"


# ---------------------------------------------------------------------------


class InputModel:
    """Distribution over orders; subclasses fill in sample_arrays."""

    kind: str = "abstract"

    @property
    def m(self) -> int:
        raise NotImplementedError

    def bounds(self) -> ModelBounds:
        return UNDECLARED_BOUNDS

    def sample_arrays(self, seed: int, n: int):
        """Rewards (n,) and columns (n, m) for order indices 0..n-1."""
        raise NotImplementedError

    def order_at(self, seed: int, j: int) -> Order:
        """Order j alone; identical to position j of the full stream."""
        r, a = self.sample_arrays_at(seed, np.array([j], dtype=np.uint64))
        return Order(float(r[0]), a[0])

    def sample_arrays_at(self, seed: int, idx: np.ndarray):
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind


class _CounterModel(InputModel):
    """Base for models generated purely from (seed, index, slot) counters."""

    def sample_arrays(self, seed: int, n: int):
        return self.sample_arrays_at(seed, np.arange(n, dtype=np.uint64))


@dataclass(frozen=True)
class RandomInputI(_CounterModel):
    """Rewards uniform on [0, 10]; entries uniform on [-0.5, 1], independent."""
    dim: int = 4
    kind: str = field(default="random_input_i", init=False)

    @property
    def m(self):
        return self.dim

    def bounds(self):
        return ModelBounds(r_bar=10.0, a_bar=float(np.sqrt(self.dim)),
                           d_lower=0.05, d_upper=1.5, declared=True)

    def sample_arrays_at(self, seed, idx):
        r = 10.0 * counter_uniform(seed, idx, 0)
        a = np.empty((idx.size, self.dim))
        for i in range(self.dim):
            a[:, i] = -0.5 + 1.5 * counter_uniform(seed, idx, 1 + i)
        return r, a


@dataclass(frozen=True)
class RandomInputII(_CounterModel):
    """Entries normal(0.5, 1); the reward is the column sum (degenerate)."""
    dim: int = 4
    kind: str = field(default="random_input_ii", init=False)

    @property
    def m(self):
        return self.dim

    def bounds(self):
        return UNDECLARED_BOUNDS

    def sample_arrays_at(self, seed, idx):
        a = np.empty((idx.size, self.dim))
        for i in range(self.dim):
            a[:, i] = 0.5 + counter_normal(seed, idx, 1 + 2 * i)
        return a.sum(axis=1), a


@dataclass(frozen=True)
class MultiSecretary(_CounterModel):
    """Single unit resource, unit columns, uniform rewards on [lo, hi]."""
    lo: float = 0.0
    hi: float = 1.0
    kind: str = field(default="multi_secretary", init=False)

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigError("multi_secretary needs hi > lo")

    @property
    def m(self):
        return 1

    def bounds(self):
        return ModelBounds(r_bar=max(abs(self.lo), abs(self.hi)), a_bar=1.0,
                           d_lower=0.01, d_upper=1.5, declared=True)

    def sample_arrays_at(self, seed, idx):
        r = self.lo + (self.hi - self.lo) * counter_uniform(seed, idx, 0)
        return r, np.ones((idx.size, 1))

    def analytic_pstar(self, d: float) -> float:
        """Population quantile price: smallest v with P(r <= v) >= 1 - d."""
        frac = min(max(1.0 - float(d), 0.0), 1.0)
        return self.lo + (self.hi - self.lo) * frac


@dataclass(frozen=True)
class UniformSquare(_CounterModel):
    """Rewards and entries all independent uniform on [0, 1]."""
    dim: int = 4
    kind: str = field(default="uniform_square", init=False)

    @property
    def m(self):
        return self.dim

    def bounds(self):
        return ModelBounds(r_bar=1.0, a_bar=float(np.sqrt(self.dim)),
                           d_lower=0.01, d_upper=1.5, declared=True)

    def sample_arrays_at(self, seed, idx):
        r = counter_uniform(seed, idx, 0)
        a = np.empty((idx.size, self.dim))
        for i in range(self.dim):
            a[:, i] = counter_uniform(seed, idx, 1 + i)
        return r, a


@dataclass(frozen=True)
class FiniteSupport(_CounterModel):
    """Discrete atoms (prob_k, reward_k, column_k)."""
    probs: tuple
    rewards: tuple
    columns: tuple  # tuple of tuples, each length m
    kind: str = field(default="finite_support", init=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("finite_support probs must be nonnegative and sum to 1")
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2 or cols.shape[0] != p.size or len(self.rewards) != p.size:
            raise ConfigError("finite_support atoms must align: probs, rewards, columns")

    @property
    def m(self):
        return len(self.columns[0])

    def bounds(self):
        cols = np.asarray(self.columns, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        return ModelBounds(r_bar=float(np.max(np.abs(r))),
                           a_bar=float(np.max(np.linalg.norm(cols, axis=1))),
                           d_lower=1e-9, d_upper=np.inf, declared=True)

    def sample_arrays_at(self, seed, idx):
        u = counter_uniform(seed, idx, 0)
        cum = np.cumsum(np.asarray(self.probs, dtype=float))
        atom = np.searchsorted(cum, u, side="right")
        atom = np.minimum(atom, len(self.probs) - 1)
        r = np.asarray(self.rewards, dtype=float)[atom]
        a = np.asarray(self.columns, dtype=float)[atom]
        return r, a


class Replay(InputModel):
    """Fixed order stream loaded from a file (optional seeded shuffle)."""

    kind = "replay"

    def __init__(self, path: str):
        self.path = str(path)
        self._r, self._a = load_replay(self.path)

    @property
    def m(self):
        return self._a.shape[1]

    @property
    def fixed_n(self):
        return self._r.size

    def bounds(self):
        return UNDECLARED_BOUNDS

    def sample_arrays(self, seed: int, n: int):
        if n != self._r.size:
            raise ConfigError(
                f"replay file {self.path} holds n={self._r.size} orders; "
                f"requested n={n}")
        return self._r.copy(), self._a.copy()

    def sample_arrays_at(self, seed, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return self._r[idx].copy(), self._a[idx].copy()

    def describe(self):
        return f"replay:{self.path}"


def fisher_yates(n: int, seed: int) -> np.ndarray:
    """Deterministic permutation of range(n) from a splitmix64 stream."""
    perm = np.arange(n)
    draws = mix64(seed ^ int(_SHUFFLE_SALT), np.arange(n, dtype=np.uint64))
    for i in range(n - 1, 0, -1):
        j = int(draws[i] % np.uint64(i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def load_replay(path: str):
    """Parse a replay file into (rewards, columns).

    Format: optional '#' comment and blank lines anywhere; a header line
    'olp v1 n=<int> m=<int>'; an optional 'shuffle seed=<uint64>' directive
    before the data; then exactly n lines of m+1 floats (reward then
    column).  Parse errors carry the 1-based line number.
    """
    header = None
    shuffle_seed = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if header is None:
                parts = line.split()
                if len(parts) != 4 or parts[0] != "olp" or parts[1] != "v1":
                    raise ConfigError(
                        f"{path}:{lineno}: expected header 'olp v1 n=<int> m=<int>'")
                try:
                    kv = dict(p.split("=", 1) for p in parts[2:])
                    n = int(kv["n"])
                    m = int(kv["m"])
                except (ValueError, KeyError) as exc:
                    raise ConfigError(
                        f"{path}:{lineno}: bad header fields {parts[2:]}") from exc
                if n < 1 or m < 1:
                    raise ConfigError(f"{path}:{lineno}: n and m must be positive")
                header = (n, m)
                continue
            if line.startswith("shuffle"):
                if rows:
                    raise ConfigError(
                        f"{path}:{lineno}: shuffle directive must precede data")
                parts = line.split()
                if len(parts) != 2 or not parts[1].startswith("seed="):
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'shuffle seed=<uint64>'")
                try:
                    shuffle_seed = int(parts[1][5:])
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}:{lineno}: shuffle seed must be an integer") from exc
                continue
            vals = line.split()
            if len(vals) != header[1] + 1:
                raise ConfigError(
                    f"{path}:{lineno}: expected {header[1] + 1} numbers, "
                    f"got {len(vals)}")
            try:
                rows.append([float(v) for v in vals])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-numeric value") from exc
    if header is None:
        raise ConfigError(f"{path}:1: empty replay file (missing header)")
    n, m = header
    if len(rows) != n:
        raise ConfigError(
            f"{path}: header declares n={n} but file has {len(rows)} data rows")
    data = np.asarray(rows, dtype=float)
    r, a = data[:, 0], data[:, 1:]
    if shuffle_seed is not None:
        perm = fisher_yates(n, shuffle_seed)
        r, a = r[perm], a[perm].copy()
    return r, a


# ---------------------------------------------------------------------------


def generate_instance(model: InputModel, n: int, d, seed: int,
                      m: Optional[int] = None):
    """Draw one instance: (orders, CapacitySpec with b = n * d).

    d may be a scalar, a length-m vector, or a pattern string accepted by
    resolve_d.  Declared model bounds are attached to the capacity spec
    and asserted on every draw.
    """
    if m is not None and m != model.m:
        raise ConfigError(f"model {model.kind} has m={model.m}, requested m={m}")
    if isinstance(model, Replay) and n != model.fixed_n:
        raise ConfigError(
            f"replay instances use the file's n={model.fixed_n}; requested n={n}")
    r, a = model.sample_arrays(seed, n)
    bounds = model.bounds()
    if bounds.declared:
        if np.any(np.abs(r) > bounds.r_bar * (1 + 1e-12)):
            raise ValueError(f"model {model.kind} violated its reward bound")
        if np.any(np.linalg.norm(a, axis=1) > bounds.a_bar * (1 + 1e-12)):
            raise ValueError(f"model {model.kind} violated its column bound")
    capacity = CapacitySpec.from_rate(n, resolve_d(d, model.m), m=model.m,
                                      bounds=bounds)
    orders = [Order(float(r[j]), a[j]) for j in range(n)]
    return orders, capacity


def empirical_a_bar(orders: Sequence[Order]) -> float:
    """Largest column norm of an instance (stand-in when bounds undeclared)."""
    _, a = instance_arrays(orders)
    return float(np.max(np.linalg.norm(a, axis=1)))


def resolve_d(d_spec, m: int) -> np.ndarray:
    """Expand a capacity rate spec: scalar, vector, or alternating pattern."""
    if isinstance(d_spec, str):
        parts = d_spec.split()
        if parts and parts[0] == "alternating":
            vals = [float(v) for v in parts[1:]]
            if not vals:
                raise ConfigError("d: alternating pattern needs at least one value")
            return np.array([vals[i % len(vals)] for i in range(m)])
        vals = [float(v) for v in parts]
        if len(vals) == 1:
            return np.full(m, vals[0])
        if len(vals) != m:
            raise ConfigError(f"d: expected 1 or {m} values, got {len(vals)}")
        return np.array(vals)
    arr = np.atleast_1d(np.asarray(d_spec, dtype=float))
    if arr.size == 1:
        return np.full(m, float(arr[0]))
    if arr.size != m:
        raise ConfigError(f"d: expected 1 or {m} values, got {arr.size}")
    return arr


_MODEL_KINDS = {}


def make_model(kind: str, **params) -> InputModel:
    """Construct a model by kind name (CLI entry point)."""
    try:
        ctor = _MODEL_KINDS[kind]
    except KeyError:
        raise ConfigError(
            f"model.kind {kind!r} unknown; expected one of {sorted(_MODEL_KINDS)}")
    return ctor(**params)


_MODEL_KINDS.update({
    "random_input_i": lambda m=4: RandomInputI(dim=int(m)),
    "random_input_ii": lambda m=4: RandomInputII(dim=int(m)),
    "multi_secretary": lambda lo=0.0, hi=1.0, m=1: MultiSecretary(float(lo), float(hi)),
    "uniform_square": lambda m=4: UniformSquare(dim=int(m)),
    "finite_support": lambda probs, rewards, columns:
        FiniteSupport(tuple(probs), tuple(rewards),
                      tuple(tuple(c) for c in columns)),
    "replay": lambda path: Replay(path),
})
