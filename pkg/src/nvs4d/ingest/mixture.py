"""Dataset descriptors and the training-data mixture sampler."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ParseError

# Street View style 4D sampling window per model size (views per example -> K).
WINDOW_FOR_VIEWS = {8: 5, 32: 20}


class DatasetKind(enum.Enum):
    UNPOSED_VIDEO = "unposed_video"
    POSED_3D = "posed_3d"
    POSED_4D = "posed_4d"


@dataclass(frozen=True)
class DatasetDescriptor:
    """One training source.

    ``window`` (K) is required for 4D datasets and forbidden otherwise.
    ``scene_length`` is the number of timesteps per 4D scene; windows are
    placed inside it.
    """

    name: str
    kind: DatasetKind
    scene_count: int
    window: int | None = None
    scene_length: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DatasetKind(self.kind))
        if int(self.scene_count) != self.scene_count or self.scene_count < 1:
            raise ConfigError(f"{self.name}: scene_count must be a positive integer")
        if self.kind is DatasetKind.POSED_4D:
            if self.window is None or self.window < 1:
                raise ConfigError(f"{self.name}: 4D datasets need a positive window K")
            length = self.window if self.scene_length is None else self.scene_length
            if length < self.window:
                raise ConfigError(f"{self.name}: scene_length {length} shorter than K={self.window}")
            object.__setattr__(self, "scene_length", int(length))
        elif self.window is not None:
            raise ConfigError(f"{self.name}: only 4D datasets take a window K")

    @property
    def posed(self) -> bool:
        return self.kind is not DatasetKind.UNPOSED_VIDEO


@dataclass(frozen=True)
class MixtureDraw:
    dataset: int
    name: str
    scene: int
    kind: DatasetKind
    window: tuple[int, ...] | None = None

    @property
    def is_video(self) -> bool:
        return self.kind is DatasetKind.UNPOSED_VIDEO


def window_for_views(n_views: int) -> int:
    try:
        return WINDOW_FOR_VIEWS[n_views]
    except KeyError:
        raise ConfigError(f"no window K defined for {n_views}-view models") from None


def mixture_weights(datasets, video_prob: float = 0.3) -> np.ndarray:
    """Probability of picking each dataset."""
    datasets = list(datasets)
    if not 0 <= video_prob <= 1:
        raise ConfigError("video_prob must be in [0, 1]")
    video = [i for i, d in enumerate(datasets) if not d.posed]
    posed = [i for i, d in enumerate(datasets) if d.posed]
    if video_prob > 0 and not video:
        raise ConfigError("video_prob > 0 but no unposed video dataset is configured")
    if video_prob < 1 and not posed:
        raise ConfigError("video_prob < 1 but no posed dataset is configured")
    p = np.zeros(len(datasets))
    for i in video:
        p[i] = video_prob / len(video)
    total = sum(datasets[i].scene_count for i in posed)
    for i in posed:
        p[i] = (1 - video_prob) * datasets[i].scene_count / total
    return p


def mixture_sample(datasets, rng, video_prob: float = 0.3) -> MixtureDraw:
    """Pick a dataset, a scene and (for 4D data) a window of K timesteps.

    Unposed video is chosen with ``video_prob`` (uniform over video
    datasets); otherwise a posed dataset with probability proportional to
    its scene count. 4D windows start uniformly over all valid offsets.
    """
    datasets = list(datasets)
    video = [i for i, d in enumerate(datasets) if not d.posed]
    posed = [i for i, d in enumerate(datasets) if d.posed]
    mixture_weights(datasets, video_prob)  # validates the configuration
    if video and rng.random() < video_prob:
        idx = video[int(rng.integers(len(video)))]
    else:
        counts = np.array([datasets[i].scene_count for i in posed], dtype=np.float64)
        idx = posed[int(rng.choice(len(posed), p=counts / counts.sum()))]
    d = datasets[idx]
    scene = int(rng.integers(d.scene_count))
    window = None
    if d.kind is DatasetKind.POSED_4D:
        start = int(rng.integers(d.scene_length - d.window + 1))
        window = tuple(range(start, start + d.window))
    return MixtureDraw(idx, d.name, scene, d.kind, window)


def load_descriptors(path) -> list[DatasetDescriptor]:
    """Read ``{"datasets": [{"name", "kind", "scene_count", "window"?, "scene_length"?}]}``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from None
    return descriptors_from_config(doc.get("datasets", []))


def descriptors_from_config(entries) -> list[DatasetDescriptor]:
    out = []
    for e in entries:
        try:
            out.append(
                DatasetDescriptor(
                    e["name"], DatasetKind(e["kind"]), e["scene_count"], e.get("window"), e.get("scene_length")
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad dataset descriptor {e!r}: {exc}") from None
    return out
