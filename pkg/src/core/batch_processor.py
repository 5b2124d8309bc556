#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
轻量批处理封装（线程池版）
提供最小可用接口：map_ordered、get_stats、configure
以及工厂方法：get_batch_processor
结果按提交顺序返回，保证与线程数无关
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


class BatchProcessor:
    def __init__(self, max_workers: int = 0):
        if max_workers <= 0:
            max_workers = os.cpu_count() or 1
        self.max_workers = max_workers
        self._executor: Optional[ThreadPoolExecutor] = None
        self._submitted = 0
        self._batches = 0

    def _get_executor(self) -> ThreadPoolExecutor:
        # 延迟创建线程池
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=self.max_workers)
        return self._executor

    def map_ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """并行执行并按输入顺序返回结果"""
        items = list(items)
        self._batches += 1
        self._submitted += len(items)
        if self.max_workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        executor = self._get_executor()
        futures = [executor.submit(fn, item) for item in items]
        return [f.result() for f in futures]

    def split(self, items: Sequence[T], chunks: Optional[int] = None) -> List[Sequence[T]]:
        """把序列切成大致等长的若干块"""
        n = len(items)
        if n == 0:
            return []
        chunks = max(1, min(chunks or self.max_workers, n))
        step = (n + chunks - 1) // chunks
        return [items[i:i + step] for i in range(0, n, step)]

    def get_stats(self) -> Dict[str, Any]:
        return {
            "submitted": self._submitted,
            "batches": self._batches,
            "max_workers": self.max_workers,
        }

    def configure(self, **kwargs) -> None:
        """更新部分配置参数"""
        if "max_workers" in kwargs:
            self.shutdown()
            workers = int(kwargs["max_workers"])
            self.max_workers = workers if workers > 0 else (os.cpu_count() or 1)

    def shutdown(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None


_default_processor: Optional[BatchProcessor] = None


def get_batch_processor(max_workers: Optional[int] = None) -> BatchProcessor:
    """获取共享处理器；传入 max_workers 时按新值重新配置"""
    global _default_processor
    if _default_processor is None:
        _default_processor = BatchProcessor(max_workers=max_workers or 0)
    elif max_workers is not None and max_workers != _default_processor.max_workers:
        _default_processor.configure(max_workers=max_workers)
    return _default_processor
