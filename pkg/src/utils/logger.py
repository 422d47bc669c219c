#!/usr/bin/env python3
"""
Logger - 日志配置

所有模块通过 logging.getLogger(__name__) 获取 logger，
由入口统一调用 setup_logger() 配置 "src" 与 "chokepoint" 两棵日志树。
"""

import logging
import os
from typing import Optional

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
DEFAULT_LOG_DIR = "~/.chokepoint/logs"

_configured = False


def setup_logger(debug: bool = False, log_file: Optional[str] = None) -> logging.Logger:
    """
    配置日志

    Args:
        debug: 是否输出 DEBUG 级别日志
        log_file: 日志文件路径（可选，None 时只输出到控制台）

    Returns:
        项目根 logger
    """
    global _configured

    level = logging.DEBUG if debug else logging.INFO
    logger = logging.getLogger("chokepoint")
    package_logger = logging.getLogger("src")

    if _configured:
        logger.setLevel(level)
        package_logger.setLevel(level)
        return logger

    formatter = logging.Formatter(LOG_FORMAT)
    handlers = []

    console = logging.StreamHandler()
    console.setFormatter(formatter)
    handlers.append(console)

    if log_file:
        log_file = os.path.expanduser(log_file)
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        handlers.append(file_handler)

    for target in (logger, package_logger):
        target.setLevel(level)
        target.propagate = False
        for handler in handlers:
            target.addHandler(handler)

    _configured = True
    return logger


def default_log_file(log_dir: Optional[str] = None) -> str:
    """日志文件默认路径"""
    return os.path.join(os.path.expanduser(log_dir or DEFAULT_LOG_DIR), "chokepoint.log")
