import asyncio
import logging
from typing import List, Optional

from .notification_channel import NotificationChannel

logger = logging.getLogger(__name__)


class NotificationService:
    def __init__(self, channels: Optional[List[NotificationChannel]] = None):
        self.channels = channels or []

    async def notify(self, event: str, payload: dict) -> None:
        """Envia o evento a todos os canais; a falha de um canal não bloqueia os demais."""
        results = await asyncio.gather(
            *(channel.send_notification(event, payload) for channel in self.channels),
            return_exceptions=True,
        )
        for channel, result in zip(self.channels, results):
            if isinstance(result, Exception):
                logger.warning("Canal %s falhou ao notificar %s: %s", type(channel).__name__, event, result)
