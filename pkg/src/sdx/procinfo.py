"""Process accounting for the live-status surface (CPU %, memory)."""

from __future__ import annotations

import psutil


class ProcessStats:
    """Snapshot CPU and memory of this process.

    cpu_percent is normalized to a single core (psutil semantics), so values
    above 100 indicate multi-core usage; no bound is asserted anywhere.
    """

    def __init__(self):
        self._proc = psutil.Process()
        self._proc.cpu_percent(None)  # prime the delta window

    def snapshot(self) -> dict:
        mem = self._proc.memory_info()
        return {
            "cpu_percent": self._proc.cpu_percent(None),
            "resident_memory_bytes": mem.rss,
            "virtual_memory_bytes": mem.vms,
        }
