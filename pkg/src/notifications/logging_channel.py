import logging

from .notification_channel import NotificationChannel

logger = logging.getLogger("ndtwin.notifications")


class LoggingNotificationChannel(NotificationChannel):
    async def send_notification(self, event: str, payload: dict) -> None:
        logger.info("%s %s", event, payload)
