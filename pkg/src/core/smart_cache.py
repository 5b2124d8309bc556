#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
轻量计算缓存（内存版）
按稳定 JSON 摘要缓存 Ω 集合、Φ 系数等中间结果
提供最小可用接口：get、set、get_or_compute、get_stats、clear_all
"""

import json
import threading
import hashlib
from typing import Any, Callable, Dict, Optional


class SmartCache:
    def __init__(self, max_memory_size: int = 256):
        self.max_memory_size = max_memory_size
        self._store: Dict[str, Any] = {}
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def _make_key(self, namespace: str, payload: Any) -> str:
        # 使用稳定序列化保证同一输入生成相同key
        text = json.dumps({"n": namespace, "p": payload}, ensure_ascii=False,
                          separators=(",", ":"), sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def get(self, namespace: str, payload: Any) -> Optional[Any]:
        key = self._make_key(namespace, payload)
        with self._lock:
            if key not in self._store:
                self._misses += 1
                return None
            self._hits += 1
            return self._store[key]

    def set(self, namespace: str, payload: Any, value: Any) -> None:
        key = self._make_key(namespace, payload)
        with self._lock:
            if key not in self._store and len(self._store) >= self.max_memory_size:
                # 插入顺序近似FIFO
                self._store.pop(next(iter(self._store)))
            self._store[key] = value

    def get_or_compute(self, namespace: str, payload: Any, compute: Callable[[], Any]) -> Any:
        """命中则返回缓存值，否则计算并写入"""
        value = self.get(namespace, payload)
        if value is None:
            value = compute()
            self.set(namespace, payload, value)
        return value

    def get_stats(self) -> Dict[str, Any]:
        with self._lock:
            return {
                "items": len(self._store),
                "hits": self._hits,
                "misses": self._misses,
                "capacity": self.max_memory_size,
            }

    def clear_all(self) -> None:
        with self._lock:
            self._store.clear()
            self._hits = 0
            self._misses = 0


_shared_cache = SmartCache()


def get_cache() -> SmartCache:
    return _shared_cache
