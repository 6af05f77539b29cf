"""
Window schedule - partition of a frame sequence into temporal windows.
"""

from __future__ import annotations

from dataclasses import dataclass

from core.errors import GapError, ShapeError


@dataclass(frozen=True)
class WindowSchedule:
    """
    Windows start at 0, stride, 2*stride, ... and hold at most L frames.

    Invariant: every frame index in [0, n_frames) is in at least one window.
    """
    windows: list[range]
    length: int
    stride: int
    n_frames: int

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    def __getitem__(self, k: int) -> range:
        return self.windows[k]

    @property
    def is_overlapping(self) -> bool:
        return self.stride < self.length

    def covered(self) -> set[int]:
        return {i for w in self.windows for i in w}


def make_windows(n_frames: int, length: int, stride: int) -> WindowSchedule:
    """
    Args:
        n_frames: Sequence length (>= 1)
        length: Frames per window L
        stride: Spacing of window starts, 1 <= stride <= L

    Returns:
        WindowSchedule; the last window may be shorter than L
    """
    if n_frames < 1:
        raise ShapeError(f"make_windows: need at least one frame, got {n_frames}")
    if length < 1 or stride < 1:
        raise ShapeError(f"make_windows: length {length} and stride {stride} must be >= 1")
    if stride > length:
        raise GapError(f"stride {stride} > window length {length} leaves frames uncovered")

    windows = []
    start = 0
    while True:
        stop = min(start + length, n_frames)
        windows.append(range(start, stop))
        if stop >= n_frames:
            break
        start += stride
    return WindowSchedule(windows=windows, length=length, stride=stride, n_frames=n_frames)
