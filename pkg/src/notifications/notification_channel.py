from abc import ABC, abstractmethod


class NotificationChannel(ABC):
    @abstractmethod
    async def send_notification(self, event: str, payload: dict) -> None:
        pass
