"""Time sources for workers and sub-MIP solves.

Both clocks answer `now()` in seconds since their origin. The branch-and-bound
backend calls `tick()` once per node; only the simulated clock moves on it,
which makes a run's time line a function of node counts alone.
"""
import time

from parbalans.cli import config


class WallClock(object):
    simulated = False

    def __init__(self, origin=None):
        # time.monotonic is system-wide on Linux, so an origin taken in the
        # parent process is valid in pool workers
        self.origin = time.monotonic() if origin is None else origin

    def now(self):
        return time.monotonic() - self.origin

    def tick(self, nodes=1):
        pass


class SimulatedClock(object):
    simulated = True

    def __init__(self, seconds_per_node=None):
        if seconds_per_node is None:
            seconds_per_node = float(config.c('clock', 'seconds_per_node'))
        if seconds_per_node <= 0:
            raise ValueError("seconds_per_node must be positive, got %s" % seconds_per_node)
        self.seconds_per_node = seconds_per_node
        self._nodes = 0

    def now(self):
        # derived from an integer count so repeated runs agree bit for bit
        return self._nodes * self.seconds_per_node

    def tick(self, nodes=1):
        self._nodes += nodes


def make_clock(mode=None, origin=None):
    """Return a fresh clock of the given mode ('simulated' or 'wall')"""
    mode = mode or config.c('clock', 'mode')
    if mode == 'simulated':
        return SimulatedClock()
    if mode == 'wall':
        return WallClock(origin)
    raise ValueError("Unknown clock mode '%s'" % mode)
