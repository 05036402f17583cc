"""Engagement states and the state sets used by each pipeline mode."""
from enum import IntEnum


class EngagementState(IntEnum):
    DISENGAGEMENT = 1
    RELAXED_ENGAGEMENT = 2
    INVOLVED_ENGAGEMENT = 3
    INTENTION_TO_ACT = 4
    ACTION = 5
    INVOLVED_ACTION = 6

    @property
    def label(self) -> str:
        return self.name.replace("_", " ").title()


THREE_STATE = (
    EngagementState.DISENGAGEMENT,
    EngagementState.INTENTION_TO_ACT,
    EngagementState.ACTION,
)
SIX_STATE = tuple(EngagementState)

MODES = ("three_state", "six_state")


def state_set(mode: str) -> tuple:
    """Return the ordered states a pipeline mode may emit."""
    if mode == "three_state":
        return THREE_STATE
    if mode == "six_state":
        return SIX_STATE
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
