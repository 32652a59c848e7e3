import asyncio
import json
import time
from pathlib import Path
from typing import Iterable, Optional

from .notification_channel import NotificationChannel


class JsonlNotificationChannel(NotificationChannel):
    """Grava cada notificação como uma linha JSON com o horário de parede."""

    def __init__(self, path: Path | str, events: Optional[Iterable[str]] = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.events = set(events) if events is not None else None

    async def send_notification(self, event: str, payload: dict) -> None:
        if self.events is not None and event not in self.events:
            return
        line = json.dumps({"event": event, **payload, "wall_time": time.time()}, sort_keys=True)

        def _append():
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

        await asyncio.to_thread(_append)
