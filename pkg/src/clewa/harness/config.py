"""Experiment configuration: a flat INI file with one section per learner.

Example::

    [experiment]
    horizons = 1024, 2048, 4096
    replicates = 20
    master_seed = 7
    output_dir = results

    [environment]
    process = iid_bernoulli
    means = 0.9, 0.7, 0.5, 0.3
    constraint_mean = 0.2, 0.4, 0.6, 0.8
    c0 = 0.5

    [learner.LEWA]
    kind = LEWA

    [learner.LEWA-fast]
    kind = LEWA
    eta = 0.05

    [thresholds]
    regret = 0.75
    violation = 0.85

``process`` is one of ``iid_bernoulli`` (keys: means), ``switching`` (means_a,
means_b, period) or ``low_variation`` (base, amplitude). Learner sections take
``kind`` plus any parameter override (eta, delta, gamma, epsilon, alpha,
alpha1, beta, dual_regularizer, explore).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

from clewa.algorithms import OVERRIDE_KEYS, LearnerKind
from clewa.environments import (
    ConstraintModel,
    IIDBernoulli,
    LowVariation,
    RewardProcess,
    Switching,
)

SEED_ENV_VAR = "CLEWA_SEED"
PROCESS_KINDS = ("iid_bernoulli", "switching", "low_variation")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerSpec:
    label: str
    kind: LearnerKind
    overrides: Tuple[Tuple[str, object], ...] = ()

    @classmethod
    def of(cls, kind, label: Optional[str] = None, **overrides) -> "LearnerSpec":
        kind = LearnerKind.parse(kind)
        return cls(label or kind.value, kind, tuple(sorted(overrides.items())))

    @property
    def override_map(self) -> Dict[str, object]:
        return dict(self.overrides)


@dataclass(frozen=True)
class EnvironmentSpec:
    process: str
    params: Tuple[Tuple[str, object], ...]
    constraint_mean: Tuple[float, ...]
    c0: float

    def reward_process(self) -> RewardProcess:
        p = dict(self.params)
        try:
            if self.process == "iid_bernoulli":
                return IIDBernoulli(p["means"])
            if self.process == "switching":
                return Switching(p["means_a"], p["means_b"], int(p["period"]))
            if self.process == "low_variation":
                return LowVariation(p["base"], float(p["amplitude"]))
        except KeyError as exc:
            raise ConfigError(f"{self.process} environment needs key {exc.args[0]!r}") from None
        raise ConfigError(f"unknown reward process {self.process!r}; expected one of {PROCESS_KINDS}")

    def constraint_model(self) -> ConstraintModel:
        return ConstraintModel(self.constraint_mean, self.c0)


@dataclass(frozen=True)
class ExperimentConfig:
    learners: Tuple[LearnerSpec, ...]
    environment: EnvironmentSpec
    horizons: Tuple[int, ...]
    replicates: int = 1
    master_seed: int = 0
    output_dir: str = "results"
    thresholds: Tuple[Tuple[str, float], ...] = field(default=())
    record_wall_time: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.horizons:
            raise ConfigError("horizons must be non-empty")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ConfigError("horizons must be strictly increasing")
        if self.horizons[0] < 1:
            raise ConfigError("horizons must be positive")
        if not self.learners:
            raise ConfigError("at least one learner section is required")
        labels = [s.label for s in self.learners]
        if len(set(labels)) != len(labels):
            raise ConfigError("learner labels must be unique")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        self.reward_process()
        model = self.constraint_model()
        if self.reward_process().num_actions != model.num_actions:
            raise ConfigError("reward process and constraint mean disagree on K")

    def reward_process(self) -> RewardProcess:
        return self.environment.reward_process()

    def constraint_model(self) -> ConstraintModel:
        return self.environment.constraint_model()

    @property
    def threshold_map(self) -> Dict[str, float]:
        return dict(self.thresholds)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> Tuple[int, ...]:
    out = []
    for v in text.split(","):
        v = v.strip()
        if v:
            out.append(int(float(v)) if "e" in v.lower() else int(v, 0))
    return tuple(out)


def _parse_override(key: str, value: str):
    return value.strip() if key == "dual_regularizer" else float(value)


def parse_config(text: str, seed: Optional[int] = None,
                 environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    """Parse INI text; seed precedence is ``seed`` argument > $CLEWA_SEED > file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if "experiment" not in cp or "environment" not in cp:
        raise ConfigError("config needs [experiment] and [environment] sections")
    ex, env = cp["experiment"], cp["environment"]
    environ = os.environ if environ is None else environ

    process = env.get("process", "iid_bernoulli").strip()
    params = []
    for key in ("means", "means_a", "means_b", "base"):
        if key in env:
            params.append((key, _floats(env[key])))
    for key in ("period", "amplitude"):
        if key in env:
            params.append((key, float(env[key])))
    if "constraint_mean" not in env or "c0" not in env:
        raise ConfigError("[environment] needs constraint_mean and c0")
    environment = EnvironmentSpec(process, tuple(params), _floats(env["constraint_mean"]),
                                  float(env["c0"]))

    learners = []
    for name in cp.sections():
        if not name.startswith("learner"):
            continue
        sec = cp[name]
        label = name.split(".", 1)[1].strip() if "." in name else sec.get("kind", "")
        if "kind" not in sec:
            raise ConfigError(f"[{name}] needs a kind")
        overrides = {}
        for key, value in sec.items():
            if key == "kind":
                continue
            if key not in OVERRIDE_KEYS:
                raise ConfigError(f"[{name}] unknown key {key!r}")
            overrides[key] = _parse_override(key, value)
        try:
            learners.append(LearnerSpec.of(sec["kind"], label or None, **overrides))
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}") from None

    if seed is None and environ.get(SEED_ENV_VAR):
        seed = int(environ[SEED_ENV_VAR], 0)
    if seed is None:
        seed = int(ex.get("master_seed", "0"), 0)

    thresholds = ()
    if "thresholds" in cp:
        thresholds = tuple((k, float(v)) for k, v in cp["thresholds"].items())

    return ExperimentConfig(
        learners=tuple(learners),
        environment=environment,
        horizons=_ints(ex.get("horizons", "")),
        replicates=ex.getint("replicates", 1),
        master_seed=seed,
        output_dir=ex.get("output_dir", "results"),
        thresholds=thresholds,
        record_wall_time=ex.getboolean("record_wall_time", False),
    )


def load_config(path, seed: Optional[int] = None,
                environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(), seed=seed, environ=environ)
