#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试公共夹具
"""

import sys
from pathlib import Path

import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.core.lattice import preset  # noqa: E402
from src.core.smart_cache import get_cache  # noqa: E402


@pytest.fixture(autouse=True)
def clear_cache():
    get_cache().clear_all()
    yield


@pytest.fixture
def bear():
    return preset("bear")


@pytest.fixture
def square():
    return preset("square")


@pytest.fixture
def dragon():
    return preset("dragon")


@pytest.fixture
def unit1d():
    return preset("unit1d")
