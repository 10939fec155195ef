__all__ = [
    "EventBus",
    "ChainLevelEvent",
    "Event",
    "PieceCertifiedEvent",
    "ProductSparsifiedEvent",
    "ResampleEvent",
    "SampleEvent",
    "ScaleLevelEvent",
    "SolveEvent",
    "StationaryRoundEvent",
    "publish",
]

from .event_bus import EventBus, publish
from .events import (
    ChainLevelEvent,
    Event,
    PieceCertifiedEvent,
    ProductSparsifiedEvent,
    ResampleEvent,
    SampleEvent,
    ScaleLevelEvent,
    SolveEvent,
    StationaryRoundEvent,
)
