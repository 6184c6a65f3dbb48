"""Frame sequences: the common carrier between simulator, map builder and tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geometry import OdometryStep, Pose2


@dataclass(frozen=True, eq=False)
class Frame:
    """One time step of a traverse.

    ``descriptor`` is a float32 appearance vector.  ``odom`` is the relative
    pose from the previous frame and is ``None`` exactly on the first frame
    of a traverse.  ``gt_pose`` is an optional global pose used only by the
    evaluation harness, never by inference.
    """

    descriptor: np.ndarray
    odom: OdometryStep | None = None
    gt_pose: Pose2 | None = None

    def __post_init__(self):
        d = np.asarray(self.descriptor, dtype=np.float32)
        if d.ndim != 1 or d.size == 0:
            raise DataError("frame descriptor must be a non-empty 1-D vector")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "descriptor", d)


@dataclass(eq=False)
class Traverse:
    """An ordered frame sequence with one odometry step per consecutive pair.

    Invariants checked on construction: at least one frame, no odometry on
    the first frame, odometry on every later frame, a single descriptor
    dimension throughout, and ground truth present either on all frames or
    on none.
    """

    frames: list[Frame] = field(default_factory=list)

    def __post_init__(self):
        if not self.frames:
            raise DataError("traverse must contain at least one frame")
        dim = self.frames[0].descriptor.size
        has_gt = self.frames[0].gt_pose is not None
        for t, fr in enumerate(self.frames):
            if fr.descriptor.size != dim:
                raise DataError(
                    f"descriptor dimension mismatch at frame {t}: "
                    f"{fr.descriptor.size} != {dim}"
                )
            if (fr.gt_pose is not None) != has_gt:
                raise DataError("ground truth must be present on all frames or none")
            if t == 0 and fr.odom is not None:
                raise DataError("first frame must not carry odometry")
            if t > 0 and fr.odom is None:
                raise DataError(f"frame {t} is missing odometry")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def descriptor_dim(self) -> int:
        return self.frames[0].descriptor.size

    @property
    def has_gt(self) -> bool:
        return self.frames[0].gt_pose is not None

    def descriptor_matrix(self) -> np.ndarray:
        """All descriptors stacked into a float32 (T, d) matrix."""
        return np.stack([fr.descriptor for fr in self.frames])

    def gt_array(self) -> np.ndarray:
        """Ground-truth poses as a float64 (T, 3) array; error when absent."""
        if not self.has_gt:
            raise DataError("traverse carries no ground truth")
        return np.array([fr.gt_pose.as_array() for fr in self.frames])
