"""Seeded synthetic multi-view prediction sets with long-tailed labels.

Each study gets per-class Bernoulli labels. Every image's score for a class
is ``sigmoid(signal * (2y - 1) + noise)`` with Gaussian noise whose scale
depends on the image's view, so lateral images can be made less
informative than frontal ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .types import LabelTable, PredictionRecord, ViewKind


def geometric_prevalence(k: int, start: float = 0.3, ratio: float = 0.7) -> tuple[float, ...]:
    return tuple(start * ratio**j for j in range(k))


@dataclass(frozen=True)
class SynthConfig:
    n_studies: int = 1000
    k_classes: int = 20
    prevalence: tuple[float, ...] | None = None
    frontal_noise: float = 1.5
    lateral_noise: float = 3.0
    p_has_lateral: float = 0.8
    seed: int = 0
    signal: float = 2.0
    p_extra_frontal: float = 0.25
    prevalence_vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_studies < 0 or self.k_classes < 1:
            raise InvalidConfig("need n_studies >= 0 and k_classes >= 1")
        prev = self.prevalence if self.prevalence is not None else geometric_prevalence(self.k_classes)
        prev = np.array(prev, dtype=np.float64)
        if prev.shape != (self.k_classes,):
            raise InvalidConfig(f"prevalence has {prev.size} entries for {self.k_classes} classes")
        if not ((prev > 0) & (prev <= 1)).all():
            raise InvalidConfig("prevalence values must lie in (0, 1]")
        if not (0 <= self.frontal_noise <= self.lateral_noise):
            raise InvalidConfig("need 0 <= frontal_noise <= lateral_noise")
        if not (0 <= self.p_has_lateral <= 1 and 0 <= self.p_extra_frontal <= 1):
            raise InvalidConfig("view probabilities must lie in [0, 1]")
        if self.seed < 0:
            raise InvalidConfig("seed must be non-negative")
        if not self.signal >= 0:
            raise InvalidConfig("signal must be non-negative")
        prev.setflags(write=False)
        object.__setattr__(self, "prevalence_vector", prev)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def generate_models(config: SynthConfig, n_models: int = 1):
    """Labels plus ``n_models`` prediction sets over the same images.

    The sets share study structure and labels and differ only in their
    noise draws. ``generate_models(c, 1)`` equals ``generate(c)``.
    """
    if n_models < 1:
        raise InvalidConfig("n_models must be at least 1")
    rng = np.random.default_rng(config.seed)
    n, k = config.n_studies, config.k_classes
    labels = (rng.random((n, k)) < config.prevalence_vector).astype(np.uint8)
    n_front = 1 + (rng.random(n) < config.p_extra_frontal)
    n_lat = (rng.random(n) < config.p_has_lateral).astype(np.int64)

    width = len(str(max(n - 1, 0)))
    study_ids = [f"s{i:0{width}d}" for i in range(n)]
    meta = []
    for i, sid in enumerate(study_ids):
        for j in range(n_front[i]):
            meta.append((f"{sid}_f{j}", sid, ViewKind.FRONTAL, i))
        for j in range(n_lat[i]):
            meta.append((f"{sid}_l{j}", sid, ViewKind.LATERAL, i))
    owner = np.array([m[3] for m in meta], dtype=np.intp)
    sigma = np.array(
        [config.frontal_noise if m[2] is ViewKind.FRONTAL else config.lateral_noise for m in meta]
    )[:, None]
    centre = config.signal * (2.0 * labels[owner] - 1.0)

    sets = []
    for _ in range(n_models):
        scores = _sigmoid(centre + sigma * rng.standard_normal((len(meta), k)))
        sets.append([PredictionRecord(iid, sid, view, scores[r]) for r, (iid, sid, view, _) in enumerate(meta)])
    names = tuple(f"class_{j:02d}" for j in range(k))
    return sets, LabelTable(names, tuple(study_ids), labels)


def generate(config: SynthConfig):
    """One prediction set and its label table."""
    sets, labels = generate_models(config, 1)
    return sets[0], labels
