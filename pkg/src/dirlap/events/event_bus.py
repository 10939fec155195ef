
from typing import Callable, Iterable, TypeAlias

from .events import Event

CallbackType: TypeAlias = Callable[[Event], None]


class EventBus:
    """
    Event bus used to dispatch events to subscribed callbacks.

    Callbacks run synchronously in the publishing thread, in subscription order.
    Operations that fan out to worker threads publish from those threads,
    so callbacks must be thread-safe.

    Parameters
    ----------
    callbacks : Iterable[Callable[[Event], None]], optional
        Callbacks to subscribe to the event bus.

    """

    _callbacks: dict[CallbackType, None]

    def __init__(self, callbacks: Iterable[CallbackType] | None = None) -> None:
        self._callbacks = {}
        for callback in callbacks or []:
            self.subscribe_callback(callback)

    def subscribe_callback(self, callback: CallbackType) -> None:
        """
        Subscribe a callback to the event bus.

        Subscribing the same callback twice keeps a single subscription at
        its original position.

        """
        self._callbacks[callback] = None

    def unsubscribe_callback(self, callback: CallbackType) -> None:
        """Remove a callback; unknown callbacks are ignored."""
        self._callbacks.pop(callback, None)

    def publish_event(self, event: Event) -> None:
        """Publish an event and dispatch it to all subscribed callbacks."""
        for callback in list(self._callbacks):
            callback(event)


def publish(event_bus: "EventBus | None", event: Event) -> None:
    """Publish `event` if a bus was supplied."""
    if event_bus is not None:
        event_bus.publish_event(event)
