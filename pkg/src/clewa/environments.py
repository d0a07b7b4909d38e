"""Oblivious reward adversaries and the stochastic constraint model.

A trace is generated up front from a seed and never sees the learner, so the
same (process, model, T, seed) always yields the same sequence.

Trace CSV layout (one row per round and action)::

    # clewa-trace v1
    # seed=<u64>
    # c0=<float>
    # constraint_mean=<c_1>,...,<c_K>
    round,action,reward,constraint
    1,0,<r_1^1>,<c_1^1>
    ...

Rounds are 1-based, actions 0-based; floats carry 17 significant digits.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

STREAM_REWARDS = 0
STREAM_CONSTRAINTS = 1
STREAM_LEARNER = 2


def _unit_vector(values, name: str) -> Tuple[float, ...]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return tuple(float(v) for v in arr)


def stream(seed: int, purpose: int, *key: int) -> np.random.Generator:
    """Independent generator for one purpose derived from a single seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(purpose, *key))
    return np.random.Generator(np.random.PCG64(ss))


def learner_stream(seed: int, label: str) -> np.random.Generator:
    return stream(seed, STREAM_LEARNER, zlib.crc32(label.encode("utf-8")))


@dataclass(frozen=True)
class ConstraintModel:
    """Per-action Bernoulli constraint realizations with means ``mean`` and threshold ``threshold``."""

    mean: Tuple[float, ...]
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "mean", _unit_vector(self.mean, "constraint mean"))
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold c0 must lie in [0, 1]")

    @property
    def num_actions(self) -> int:
        return len(self.mean)

    @property
    def feasible(self) -> bool:
        return max(self.mean) >= self.threshold

    @property
    def c0(self) -> float:
        return self.threshold

    def vector(self) -> np.ndarray:
        return np.array(self.mean)

    def realize(self, T: int, rng: np.random.Generator) -> np.ndarray:
        return (rng.random((T, self.num_actions)) < self.vector()).astype(np.float64)


@dataclass(frozen=True)
class IIDBernoulli:
    means: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "means", _unit_vector(self.means, "reward means"))

    @property
    def num_actions(self) -> int:
        return len(self.means)

    def rewards(self, T: int, rng: np.random.Generator) -> np.ndarray:
        return (rng.random((T, self.num_actions)) < np.array(self.means)).astype(np.float64)


@dataclass(frozen=True)
class Switching:
    """Bernoulli rewards whose means alternate between two vectors every ``period`` rounds."""

    means_a: Tuple[float, ...]
    means_b: Tuple[float, ...]
    period: int

    def __post_init__(self):
        object.__setattr__(self, "means_a", _unit_vector(self.means_a, "means_a"))
        object.__setattr__(self, "means_b", _unit_vector(self.means_b, "means_b"))
        if len(self.means_a) != len(self.means_b):
            raise ValueError("means_a and means_b differ in length")
        if self.period < 1:
            raise ValueError("period must be positive")

    @property
    def num_actions(self) -> int:
        return len(self.means_a)

    def rewards(self, T: int, rng: np.random.Generator) -> np.ndarray:
        phase = (np.arange(T) // self.period) % 2
        means = np.where(phase[:, None] == 0, np.array(self.means_a), np.array(self.means_b))
        return (rng.random((T, self.num_actions)) < means).astype(np.float64)


@dataclass(frozen=True)
class LowVariation:
    """Deterministic rewards ``base + amplitude * s_t`` with ``s_t = sin(2 pi t / T) / 2``.

    Every coordinate stays inside an interval of width ``amplitude`` (after
    clipping to [0, 1]), so each round deviates from the mean reward vector by
    at most ``amplitude`` in sup-norm.
    """

    base: Tuple[float, ...]
    amplitude: float

    def __post_init__(self):
        object.__setattr__(self, "base", _unit_vector(self.base, "base"))
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0, 1]")

    @property
    def num_actions(self) -> int:
        return len(self.base)

    def rewards(self, T: int, rng: np.random.Generator) -> np.ndarray:
        s = 0.5 * np.sin(2.0 * math.pi * np.arange(T) / T)
        r = np.array(self.base)[None, :] + self.amplitude * s[:, None]
        return np.clip(r, 0.0, 1.0)


RewardProcess = Union[IIDBernoulli, Switching, LowVariation]


@dataclass(frozen=True)
class EnvironmentTrace:
    rewards: np.ndarray
    constraints: np.ndarray
    model: ConstraintModel
    seed: int

    def __post_init__(self):
        if self.rewards.shape != self.constraints.shape or self.rewards.ndim != 2:
            raise ValueError("rewards and constraints must both have shape (T, K)")
        if self.rewards.shape[1] != self.model.num_actions:
            raise ValueError("trace width does not match the constraint model")
        for arr in (self.rewards, self.constraints):
            arr.setflags(write=False)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    def __len__(self) -> int:
        return self.horizon


def generate(process: RewardProcess, model: ConstraintModel, T: int, seed: int) -> EnvironmentTrace:
    """Draw a length-``T`` trace; rewards and constraints use separate streams of ``seed``."""
    if T < 1:
        raise ValueError("horizon must be positive")
    if process.num_actions != model.num_actions:
        raise ValueError("reward process and constraint model disagree on K")
    rewards = process.rewards(T, stream(seed, STREAM_REWARDS))
    constraints = model.realize(T, stream(seed, STREAM_CONSTRAINTS))
    for arr in (rewards, constraints):
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise AssertionError("generated value outside [0, 1]")
    return EnvironmentTrace(rewards, constraints, model, int(seed))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace(trace: EnvironmentTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# clewa-trace v1\n")
        fh.write(f"# seed={trace.seed}\n")
        fh.write(f"# c0={_fmt(trace.model.threshold)}\n")
        fh.write("# constraint_mean=" + ",".join(_fmt(v) for v in trace.model.mean) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "action", "reward", "constraint"])
        for s in range(trace.horizon):
            for i in range(trace.num_actions):
                w.writerow([s + 1, i, _fmt(trace.rewards[s, i]), _fmt(trace.constraints[s, i])])
    return path


def read_trace(path) -> EnvironmentTrace:
    meta = {}
    rows = []
    with Path(path).open(newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
            else:
                lines.append(line)
        reader = csv.DictReader(lines)
        for row in reader:
            rows.append((int(row["round"]), int(row["action"]), float(row["reward"]),
                         float(row["constraint"])))
    if "c0" not in meta or "constraint_mean" not in meta:
        raise ValueError(f"{path}: missing c0 / constraint_mean header")
    mean = [float(v) for v in meta["constraint_mean"].split(",")]
    model = ConstraintModel(mean, float(meta["c0"]))
    K = len(mean)
    T = max(r[0] for r in rows) if rows else 0
    if len(rows) != T * K:
        raise ValueError(f"{path}: expected {T * K} rows, found {len(rows)}")
    rewards = np.empty((T, K))
    constraints = np.empty((T, K))
    for t, i, r, c in rows:
        rewards[t - 1, i] = r
        constraints[t - 1, i] = c
    return EnvironmentTrace(rewards, constraints, model, int(meta.get("seed", 0)))
