"""
In-process cache for posterior factorizations.

Factorizing Sigma^j + diag(s^2 xi^2)^-1 dominates a sampler iteration. A
factor depends only on (j, s^2, statistics version), so repeated Move II
proposals between scale or path updates reuse it.
"""

from collections import OrderedDict
from typing import Any, Hashable, Optional, Tuple

from app.core.logging import get_logger

logger = get_logger(__name__)

FactorKey = Tuple[int, float, int]


class FactorCache:
    """Least-recently-used cache keyed by (j, s_sq, stats version)."""

    def __init__(self, capacity: int = 64):
        """Initialize cache; a capacity of 0 disables caching."""
        self.capacity = capacity
        self._entries: "OrderedDict[Hashable, Any]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    @staticmethod
    def key(j: int, s_sq: float, version: int) -> FactorKey:
        return int(j), float(s_sq), int(version)

    def get(self, key: Hashable) -> Optional[Any]:
        """
        Get cached value by key.

        Args:
            key: Cache key

        Returns:
            Cached value or None if not found
        """
        value = self._entries.get(key)
        if value is None:
            self.misses += 1
            logger.debug("Cache miss", key=key)
            return None
        self.hits += 1
        self._entries.move_to_end(key)
        logger.debug("Cache hit", key=key)
        return value

    def set(self, key: Hashable, value: Any) -> bool:
        """
        Store a value, evicting the least recently used entry when full.

        Returns:
            True if stored, False when caching is disabled
        """
        if self.capacity <= 0:
            return False
        self._entries[key] = value
        self._entries.move_to_end(key)
        while len(self._entries) > self.capacity:
            evicted, _ = self._entries.popitem(last=False)
            logger.debug("Cache evict", key=evicted)
        return True

    def invalidate(self, version: int) -> int:
        """
        Drop entries computed from other statistics versions.

        Returns:
            Number of entries removed
        """
        stale = [key for key in self._entries if isinstance(key, tuple) and key[-1] != version]
        for key in stale:
            del self._entries[key]
        if stale:
            logger.debug("Cache invalidate", version=version, count=len(stale))
        return len(stale)

    def clear(self) -> None:
        self._entries.clear()
