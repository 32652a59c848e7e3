from .jsonl_channel import JsonlNotificationChannel
from .logging_channel import LoggingNotificationChannel
from .notification_channel import NotificationChannel
from .notification_service import NotificationService

__all__ = [
    "JsonlNotificationChannel",
    "LoggingNotificationChannel",
    "NotificationChannel",
    "NotificationService",
]
