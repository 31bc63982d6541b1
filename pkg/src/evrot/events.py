"""Event containers.

Events are stored column-wise (timestamps, pixel coordinates, polarities) so
batches are cheap numpy views. Timestamps are seconds and must be
non-decreasing; polarities are +1/-1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InsufficientDataError


@dataclass(frozen=True)
class Event:
    """A single event; convenience view, not the storage format."""

    t: float
    x: float
    y: float
    p: int


class EventArray:
    """Column store for a time-sorted event stream."""

    __slots__ = ("t", "xy", "p")

    def __init__(self, t, xy, p, check=True):
        self.t = np.asarray(t, dtype=float)
        self.xy = np.asarray(xy, dtype=float)
        self.p = np.asarray(p, dtype=np.int8)
        if check:
            if self.t.ndim != 1 or self.xy.shape != (self.t.size, 2):
                raise DataFormatError("event columns have inconsistent shapes")
            if self.p.shape != self.t.shape:
                raise DataFormatError("polarity column has wrong length")
            if self.t.size and np.any(np.diff(self.t) < 0):
                raise DataFormatError("event timestamps must be non-decreasing")
            if self.p.size and not np.all((self.p == 1) | (self.p == -1)):
                raise DataFormatError("polarities must be +1 or -1")

    def __len__(self):
        return self.t.size

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            return Event(float(self.t[key]), float(self.xy[key, 0]),
                         float(self.xy[key, 1]), int(self.p[key]))
        return EventArray(self.t[key], self.xy[key], self.p[key], check=False)

    def slice(self, start, stop):
        """View of events [start, stop) without revalidation."""
        return EventArray(self.t[start:stop], self.xy[start:stop],
                          self.p[start:stop], check=False)


class EventBatch(EventArray):
    """Events over a declared time window [t_start, t_end].

    The window is carried explicitly rather than derived from the first and
    last event so that deliberately generated or sliced batches keep their
    nominal span.
    """

    __slots__ = ("t_start", "t_end")

    def __init__(self, t, xy, p, window, check=True):
        super().__init__(t, xy, p, check=check)
        t_start, t_end = float(window[0]), float(window[1])
        if check:
            if not t_end > t_start:
                raise DataFormatError("batch window must have positive length")
            if self.t.size and (self.t[0] < t_start - 1e-12 or
                                self.t[-1] > t_end + 1e-12):
                raise DataFormatError("events fall outside the declared window")
        self.t_start = t_start
        self.t_end = t_end

    @property
    def duration(self):
        return self.t_end - self.t_start

    @property
    def half_duration(self):
        return 0.5 * (self.t_end - self.t_start)

    @property
    def midpoint(self):
        return self.t_start + 0.5 * (self.t_end - self.t_start)

    def split_count(self):
        """Number of events in the first temporal half.

        This is the largest count M such that the M-th event's timestamp does
        not exceed the window midpoint. Raises InsufficientDataError when
        either half would be empty, since a one-sided batch cannot be
        registered.
        """
        m = int(np.searchsorted(self.t, self.midpoint, side="right"))
        if m == 0 or m == len(self):
            raise InsufficientDataError(
                f"temporal split left one half empty (M={m}, N={len(self)})"
            )
        return m

    @classmethod
    def from_array(cls, events, window=None):
        """Wrap an EventArray, defaulting the window to the event span."""
        if window is None:
            if not len(events):
                raise InsufficientDataError("cannot infer a window from no events")
            window = (events.t[0], events.t[-1])
        return cls(events.t, events.xy, events.p, window, check=True)
