import json
import logging
from unittest.mock import AsyncMock, MagicMock

from src.notifications import JsonlNotificationChannel, LoggingNotificationChannel, NotificationChannel, NotificationService


async def test_notify_reaches_every_channel():
    first = MagicMock(spec=NotificationChannel)
    first.send_notification = AsyncMock()
    second = MagicMock(spec=NotificationChannel)
    second.send_notification = AsyncMock()

    await NotificationService([first, second]).notify("deployed", {"version": 2})

    first.send_notification.assert_awaited_once_with("deployed", {"version": 2})
    second.send_notification.assert_awaited_once_with("deployed", {"version": 2})


async def test_failing_channel_does_not_block_others(caplog):
    broken = MagicMock(spec=NotificationChannel)
    broken.send_notification = AsyncMock(side_effect=OSError("disco cheio"))
    healthy = MagicMock(spec=NotificationChannel)
    healthy.send_notification = AsyncMock()

    with caplog.at_level(logging.WARNING):
        await NotificationService([broken, healthy]).notify("retrain_started", {"version": 3})

    healthy.send_notification.assert_awaited_once()
    assert "disco cheio" in caplog.text


async def test_notify_without_channels():
    await NotificationService().notify("drift", {})


async def test_jsonl_channel_appends_lines(tmp_path):
    path = tmp_path / "logs" / "control.jsonl"
    channel = JsonlNotificationChannel(path)

    await channel.send_notification("retrain_started", {"version": 2})
    await channel.send_notification("deployed", {"version": 2})

    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert [line["event"] for line in lines] == ["retrain_started", "deployed"]
    assert all(line["version"] == 2 and "wall_time" in line for line in lines)


async def test_jsonl_channel_filters_events(tmp_path):
    path = tmp_path / "drift.jsonl"
    channel = JsonlNotificationChannel(path, events=["drift"])

    await channel.send_notification("deployed", {"version": 2})
    assert not path.exists()

    await channel.send_notification("drift", {"sample_index": 120})
    assert json.loads(path.read_text(encoding="utf-8"))["sample_index"] == 120


async def test_logging_channel(caplog):
    with caplog.at_level(logging.INFO, logger="ndtwin.notifications"):
        await LoggingNotificationChannel().send_notification("rollback", {"version": 1})

    assert "rollback" in caplog.text
