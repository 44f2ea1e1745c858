"""Types shared by every sub-MIP backend."""
from dataclasses import dataclass, field

from parbalans.cli.actions.utils import ParBalansException

__all__ = ['SolveBudget', 'MipResult', 'OPTIMAL', 'FEASIBLE', 'INFEASIBLE', 'UNKNOWN']

OPTIMAL, FEASIBLE, INFEASIBLE, UNKNOWN = 'optimal', 'feasible', 'infeasible', 'unknown'


@dataclass(frozen=True)
class SolveBudget:
    wall_seconds: float = float('inf')
    node_limit: int = None
    gap_limit: float = 1e-6
    # logical cores reserved for the solve; the reference backend uses one
    thread_hint: int = 1

    def __post_init__(self):
        if self.wall_seconds < 0:
            raise ParBalansException("wall_seconds must be >= 0, got %s" % self.wall_seconds)
        if self.wall_seconds == float('inf') and self.node_limit is None:
            raise ParBalansException("A solve budget needs a finite time or node limit")
        if self.gap_limit < 0:
            raise ParBalansException("gap_limit must be >= 0, got %s" % self.gap_limit)
        if self.thread_hint < 1:
            raise ParBalansException("thread_hint must be >= 1, got %s" % self.thread_hint)


@dataclass(frozen=True, eq=False)
class MipResult:
    status: str
    incumbent: object = None
    dual_bound: float = -float('inf')
    nodes: int = 0
    elapsed: float = 0.0
    # (seconds since start, objective) for every improving incumbent
    history: list = field(default_factory=list)
