"""Monitoring: per-node observation frames and bounded histories."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from depguard.core import OBSERVABLES, Observable
from depguard.simulator import SimState


@dataclass(frozen=True)
class ObservationFrame:
    tick: int
    node: int
    values: tuple[float, float, float, float]  # catalog order, see OBSERVABLES
    reachable: bool = True

    @property
    def stale(self) -> bool:
        return not self.reachable

    def __getitem__(self, obs: Observable) -> float:
        return self.values[obs.index]


def sample(state: SimState, window: int, previous: dict | None = None) -> list[ObservationFrame]:
    """One frame per node at ``state.tick`` from the last ``window`` ticks of link records.

    Nodes that emitted nothing during the window are unreachable; their values
    are carried forward from ``previous`` (node -> last frame) when available.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    recent = []
    for rec in reversed(state.records):
        if rec.tick <= state.tick - window or len(recent) == window:
            break
        recent.append(rec)
    n = len(state.nodes)
    floor = state.environment.noise_floor
    if recent:
        emitted = np.sum([r.broadcasts for r in recent], axis=0)
        counts = np.sum([r.counts for r in recent], axis=0)
        weighted = np.sum([r.rssi * r.counts for r in recent], axis=0)
    else:
        emitted = np.zeros(n)
        counts = np.zeros((n, n))
        weighted = np.zeros((n, n))
    linked = counts > 0
    neighbors = linked.sum(axis=0)
    received = counts.sum(axis=0)
    per_link = np.divide(weighted, counts, out=np.zeros((n, n)), where=linked)
    rssi_mean = np.divide(per_link.sum(axis=0), neighbors, out=np.full(n, floor),
                          where=neighbors > 0)
    frames = []
    for idx, node in enumerate(state.nodes):
        if emitted[idx] == 0:
            last = previous.get(node.id) if previous else None
            values = last.values if last is not None else (floor, 0.0, 0.0, node.battery)
            frames.append(ObservationFrame(state.tick, node.id, values, reachable=False))
            continue
        values = (float(rssi_mean[idx]), float(neighbors[idx]), float(received[idx]),
                  float(node.battery))
        frames.append(ObservationFrame(state.tick, node.id, values))
    return frames


class History:
    """Per-node ring buffers of frames, oldest evicted first."""

    def __init__(self, capacity: int = 512):
        if capacity <= 0:
            raise ValueError("capacity must be > 0")
        self.capacity = capacity
        self._frames: dict[int, deque] = {}
        # When every push carries one frame per node for a single tick (the control
        # loop's pattern) the frames are also mirrored into a tick x node grid so the
        # trend fitter can work on all nodes at once.  Rows [end - rows, end) are live.
        self._grid_nodes: tuple | None = None
        self._grid: list | None = None
        self._grid_ok = True

    def push(self, frames) -> "History":
        frames = list(frames)
        for frame in frames:
            self._check(frame)
        for frame in frames:
            buf = self._frames.get(frame.node)
            if buf is None:
                buf = self._frames[frame.node] = deque(maxlen=self.capacity)
            buf.append(frame)
        if self._grid_ok:
            self._grid_push(frames)
        return self

    def _grid_push(self, frames) -> None:
        nodes = tuple(f.node for f in frames)
        if self._grid_nodes is None:
            self._grid_nodes = nodes
            size = 2 * self.capacity
            self._grid = [np.empty(size), np.empty((size, len(nodes), len(OBSERVABLES))),
                          np.empty((size, len(nodes)), dtype=bool), 0, 0]
        if nodes != self._grid_nodes or any(f.tick != frames[0].tick for f in frames):
            self._grid_ok = False
            self._grid = None
            return
        g = self._grid
        ticks, values, reach, end, rows = g
        if end == len(ticks):
            keep = self.capacity - 1
            ticks[:keep] = ticks[end - keep:end]
            values[:keep] = values[end - keep:end]
            reach[:keep] = reach[end - keep:end]
            end = keep
            rows = min(rows, keep)
        ticks[end] = frames[0].tick
        values[end] = [f.values for f in frames]
        reach[end] = [f.reachable for f in frames]
        g[3], g[4] = end + 1, min(rows + 1, self.capacity)

    def grid(self, length: int):
        """(node ids, ticks, values[t, node, obs], reachable[t, node]) for the last
        ``length`` ticks, or None when pushes have not been tick-synchronized."""
        if not self._grid_ok or self._grid is None:
            return None
        ticks, values, reach, end, rows = self._grid
        start = end - min(length, rows)
        return self._grid_nodes, ticks[start:end], values[start:end], reach[start:end]

    def _check(self, frame) -> None:
        buf = self._frames.get(frame.node)
        if buf and frame.tick <= buf[-1].tick:
            raise ValueError(f"node {frame.node}: frame tick {frame.tick} "
                             f"not after last stored tick {buf[-1].tick}")

    @property
    def nodes(self) -> list[int]:
        return list(self._frames)

    def __len__(self) -> int:
        return sum(len(b) for b in self._frames.values())

    def count(self, node: int) -> int:
        return len(self._frames.get(node, ()))

    def latest(self, node: int) -> ObservationFrame | None:
        buf = self._frames.get(node)
        return buf[-1] if buf else None

    def latest_frames(self) -> dict[int, ObservationFrame]:
        return {node: buf[-1] for node, buf in self._frames.items() if buf}

    def frames(self, node: int, length: int) -> list[ObservationFrame]:
        if length < 1:
            raise ValueError("length must be >= 1")
        if node not in self._frames:
            raise KeyError(f"unknown node {node}")
        buf = self._frames[node]
        start = max(0, len(buf) - length)
        return [buf[i] for i in range(start, len(buf))]

    def window(self, node: int, length: int) -> list[tuple[int, tuple]]:
        """Most recent ``min(length, stored)`` (tick, values) pairs, oldest first."""
        return [(f.tick, f.values) for f in self.frames(node, length)]

    def series(self, node: int, obs: Observable, length: int, include_stale: bool = False):
        """(ticks, values) arrays for one observable over the last ``length`` frames."""
        frames = self.frames(node, length)
        if not include_stale:
            frames = [f for f in frames if f.reachable]
        ticks = np.array([f.tick for f in frames], dtype=float)
        values = np.array([f.values[obs.index] for f in frames], dtype=float)
        return ticks, values


def push(history: History, frames) -> History:
    return history.push(frames)


def window(history: History, node: int, length: int):
    return history.window(node, length)


__all__ = ["ObservationFrame", "History", "sample", "push", "window", "OBSERVABLES"]
