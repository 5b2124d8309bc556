#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
状态输出工具
统一格式 [HH:MM:SS] [LEVEL] message，写到 stderr，stdout 只留给 JSON 摘要
"""

import sys
import threading
from datetime import datetime
from typing import Dict, Optional, TextIO


class StatusLogger:
    COLORS: Dict[str, str] = {
        "INFO": "\033[36m",     # 青色
        "SUCCESS": "\033[32m",  # 绿色
        "WARNING": "\033[33m",  # 黄色
        "ERROR": "\033[31m",    # 红色
    }
    RESET = "\033[0m"

    def __init__(self, stream: Optional[TextIO] = None, quiet: bool = False):
        self.stream = stream
        self.quiet = quiet
        self._lock = threading.Lock()
        self._counts: Dict[str, int] = {level: 0 for level in self.COLORS}

    def print_status(self, message: str, status: str = "INFO") -> None:
        """打印带时间戳的状态信息"""
        status = status.upper()
        if status not in self.COLORS:
            status = "INFO"
        with self._lock:
            self._counts[status] += 1
            if self.quiet and status in ("INFO", "SUCCESS"):
                return
            stream = self.stream or sys.stderr
            timestamp = datetime.now().strftime("%H:%M:%S")
            use_color = hasattr(stream, "isatty") and stream.isatty()
            if use_color:
                line = f"{self.COLORS[status]}[{timestamp}] [{status}] {message}{self.RESET}"
            else:
                line = f"[{timestamp}] [{status}] {message}"
            print(line, file=stream)

    def info(self, message: str) -> None:
        self.print_status(message, "INFO")

    def success(self, message: str) -> None:
        self.print_status(message, "SUCCESS")

    def warning(self, message: str) -> None:
        self.print_status(message, "WARNING")

    def error(self, message: str) -> None:
        self.print_status(message, "ERROR")

    def get_stats(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._counts)

    def reset_stats(self) -> None:
        with self._lock:
            self._counts = {level: 0 for level in self.COLORS}


_logger = StatusLogger()


def get_logger() -> StatusLogger:
    """获取全局状态输出实例"""
    return _logger


def set_quiet(quiet: bool) -> None:
    _logger.quiet = quiet
