#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
线程池、缓存与状态输出
"""

import io

from src.core.batch_processor import BatchProcessor, get_batch_processor
from src.core.smart_cache import SmartCache
from src.utils.status import StatusLogger


def test_map_ordered_keeps_input_order():
    processor = BatchProcessor(max_workers=4)
    try:
        assert processor.map_ordered(lambda x: x * x, range(20)) == [x * x for x in range(20)]
        stats = processor.get_stats()
        assert stats["submitted"] == 20
        assert stats["batches"] == 1
    finally:
        processor.shutdown()


def test_split_and_configure():
    processor = BatchProcessor(max_workers=3)
    parts = processor.split(list(range(10)))
    assert [len(p) for p in parts] == [4, 4, 2]
    assert processor.split([]) == []
    processor.configure(max_workers=1)
    assert processor.max_workers == 1
    assert get_batch_processor(2).max_workers == 2


def test_cache_hits_and_capacity():
    cache = SmartCache(max_memory_size=2)
    calls = []

    def compute():
        calls.append(1)
        return {"value": 1}

    assert cache.get_or_compute("omega", {"depth": 3}, compute) == {"value": 1}
    assert cache.get_or_compute("omega", {"depth": 3}, compute) == {"value": 1}
    assert len(calls) == 1
    cache.set("omega", {"depth": 4}, 4)
    cache.set("omega", {"depth": 5}, 5)
    assert cache.get("omega", {"depth": 3}) is None
    stats = cache.get_stats()
    assert stats["items"] == 2
    assert stats["hits"] == 1
    cache.clear_all()
    assert cache.get_stats()["items"] == 0


def test_status_format_and_quiet():
    stream = io.StringIO()
    logger = StatusLogger(stream=stream)
    logger.info("开始")
    logger.print_status("奇怪的级别", "trace")
    logger.quiet = True
    logger.success("不显示")
    logger.warning("注意")
    lines = stream.getvalue().splitlines()
    assert len(lines) == 3
    assert lines[0].endswith("[INFO] 开始")
    assert "[INFO] 奇怪的级别" in lines[1]
    assert lines[2].endswith("[WARNING] 注意")
    assert logger.get_stats()["SUCCESS"] == 1
    logger.reset_stats()
    assert logger.get_stats()["INFO"] == 0
