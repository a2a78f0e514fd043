"""Torso keypoint convention, 2D observations and confidence filtering.

Only six keypoints are used: the nose bridge, the base of the neck, and the
two shoulders and hips. Detectors that emit more joints are supported; the
extra ids are skipped at ingestion and tallied in
:attr:`ObservationReader.unknown_ids`.

Stream format (one JSON object per image)::

    {"frame": 0, "side": "left",
     "keypoints": [{"id": "ls", "u": 301.5, "v": 212.0, "p": 0.93}, ...]}
"""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping

from .errors import InsufficientKeypoints, StreamParseError

log = logging.getLogger(__name__)

DEFAULT_P_CUTOFF = 0.05


class KeypointId(str, enum.Enum):
    NOSE_BRIDGE = "b"
    NECK_BASE = "n"
    RIGHT_SHOULDER = "rs"
    RIGHT_HIP = "rh"
    LEFT_HIP = "lh"
    LEFT_SHOULDER = "ls"

    def __str__(self) -> str:
        return self.value


#: Canonical ordering used for serialization and array layouts.
REQUIRED = tuple(KeypointId)


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Keypoint2D:
    id: KeypointId
    u: float
    v: float
    p: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "id", KeypointId(self.id))
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError(f"keypoint {self.id.value}: u, v must be finite")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"keypoint {self.id.value}: p={self.p} outside [0, 1]")


@dataclass(frozen=True)
class PoseObservation2D:
    """Detections of one image of a stereo pair.

    ``keypoints`` may be given as any iterable of :class:`Keypoint2D` or as a
    mapping keyed by id; it is stored as a read-only mapping.
    """

    frame_id: int
    side: Side
    keypoints: Mapping[KeypointId, Keypoint2D] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        kps = self.keypoints
        items = kps.values() if isinstance(kps, Mapping) else kps
        table: dict[KeypointId, Keypoint2D] = {}
        for kp in items:
            if kp.id in table:
                raise ValueError(f"duplicate keypoint id {kp.id.value!r}")
            table[kp.id] = kp
        object.__setattr__(self, "keypoints", MappingProxyType(table))

    def __contains__(self, kid) -> bool:
        return KeypointId(kid) in self.keypoints

    def __getitem__(self, kid) -> Keypoint2D:
        return self.keypoints[KeypointId(kid)]

    def uv(self, kid) -> tuple[float, float]:
        kp = self[kid]
        return kp.u, kp.v

    def to_json(self) -> dict:
        return {
            "frame": self.frame_id,
            "side": self.side.value,
            "keypoints": [
                {"id": k.value, "u": self.keypoints[k].u,
                 "v": self.keypoints[k].v, "p": self.keypoints[k].p}
                for k in REQUIRED if k in self.keypoints
            ],
        }


def filter_by_confidence(obs: PoseObservation2D,
                         p_cutoff: float = DEFAULT_P_CUTOFF) -> PoseObservation2D:
    """Keep only keypoints whose confidence strictly exceeds ``p_cutoff``."""
    if not 0.0 <= p_cutoff <= 1.0:
        raise ValueError(f"p_cutoff must lie in [0, 1], got {p_cutoff}")
    kept = [kp for kp in obs.keypoints.values() if kp.p > p_cutoff]
    return PoseObservation2D(obs.frame_id, obs.side, kept)


def missing_ids(obs: PoseObservation2D) -> list[KeypointId]:
    return sorted((k for k in REQUIRED if k not in obs.keypoints),
                  key=lambda k: k.value)


def require_complete(obs: PoseObservation2D) -> PoseObservation2D:
    missing = missing_ids(obs)
    if missing:
        raise InsufficientKeypoints(missing)
    return obs


# -- JSON Lines ingestion -----------------------------------------------------

def _number(obj: dict, key: str, line: int) -> float:
    if key not in obj:
        raise StreamParseError(line, "missing", field=key)
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise StreamParseError(line, f"expected a number, got {value!r}", field=key)
    return float(value)


def parse_observation(obj, line: int = 0,
                      unknown: Counter | None = None) -> PoseObservation2D:
    """Build an observation from one decoded stream record.

    Unknown keypoint ids are skipped and counted into ``unknown``.
    """
    if not isinstance(obj, dict):
        raise StreamParseError(line, "record must be a JSON object")
    if "frame" not in obj:
        raise StreamParseError(line, "missing", field="frame")
    frame = obj["frame"]
    if isinstance(frame, bool) or not isinstance(frame, int):
        raise StreamParseError(line, f"expected an integer, got {frame!r}", field="frame")
    try:
        side = Side(obj.get("side"))
    except ValueError:
        raise StreamParseError(line, f"expected 'left' or 'right', got {obj.get('side')!r}",
                               field="side") from None
    raw = obj.get("keypoints")
    if not isinstance(raw, list):
        raise StreamParseError(line, "expected a list", field="keypoints")

    kps = []
    for i, item in enumerate(raw):
        where = f"keypoints[{i}]"
        if not isinstance(item, dict):
            raise StreamParseError(line, "expected an object", field=where)
        try:
            kid = KeypointId(item.get("id"))
        except ValueError:
            if unknown is not None:
                unknown[str(item.get("id"))] += 1
            continue
        u = _number(item, "u", line)
        v = _number(item, "v", line)
        p = _number(item, "p", line) if "p" in item else 1.0
        try:
            kps.append(Keypoint2D(kid, u, v, p))
        except ValueError as exc:
            raise StreamParseError(line, str(exc), field=where) from None
    try:
        return PoseObservation2D(frame, side, kps)
    except ValueError as exc:
        raise StreamParseError(line, str(exc), field="keypoints") from None


class ObservationReader:
    """Iterate observations from a JSON Lines stream, one record at a time."""

    def __init__(self, fp: IO[str]):
        self.fp = fp
        self.unknown_ids: Counter = Counter()

    def __iter__(self) -> Iterator[PoseObservation2D]:
        for lineno, text in enumerate(self.fp, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise StreamParseError(lineno, f"invalid JSON ({exc.msg})") from None
            yield parse_observation(obj, lineno, self.unknown_ids)
        if self.unknown_ids:
            log.warning("ignored unknown keypoint ids: %s", dict(self.unknown_ids))


def read_observations(fp: IO[str]) -> Iterator[PoseObservation2D]:
    return iter(ObservationReader(fp))


def write_observations(fp: IO[str], observations: Iterable[PoseObservation2D]) -> None:
    for obs in observations:
        fp.write(json.dumps(obs.to_json()) + "\n")
