#!/usr/bin/env python3
"""
Config Manager - 配置管理

配置文件: ~/.chokepoint/config.json
支持点号路径读写，如 config.get("trace.max_ttl")

优先级: 命令行参数 > 环境变量 > 配置文件 > 内置默认值
"""

import copy
import json
import logging
import os
from typing import Any, Dict

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "~/.chokepoint/config.json"
OUTPUT_DIR_ENV = "CHOKEPOINT_OUTPUT_DIR"

DEFAULTS: Dict[str, Any] = {
    "output_dir": "~/.chokepoint/reports",
    "log_dir": "~/.chokepoint/logs",
    "log_to_file": False,
    "workers": 1,
    "trace": {
        "max_ttl": 16,
    },
    "netsim": {
        "default_ttl": 64,
    },
    "resolver": {
        "answer_ttl": 300,
    },
}


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigManager:
    """
    配置管理器

    读取 JSON 配置文件并叠加在内置默认值之上。
    文件不存在时仅使用默认值，不会自动创建。
    """

    def __init__(self, config_path: str = DEFAULT_CONFIG_PATH):
        self.config_path = os.path.expanduser(config_path)
        self.data: Dict[str, Any] = copy.deepcopy(DEFAULTS)
        self.load()

    def load(self) -> None:
        """从文件加载配置"""
        if not os.path.exists(self.config_path):
            logger.debug(f"配置文件不存在，使用默认配置: {self.config_path}")
            return

        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                user_config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"配置文件读取失败，使用默认配置: {e}")
            return

        if not isinstance(user_config, dict):
            logger.warning(f"配置文件顶层必须是对象: {self.config_path}")
            return

        self.data = _merge(DEFAULTS, user_config)
        logger.debug(f"已加载配置: {self.config_path}")

    def save(self) -> None:
        """保存配置到文件"""
        os.makedirs(os.path.dirname(self.config_path) or ".", exist_ok=True)
        with open(self.config_path, "w", encoding="utf-8") as f:
            json.dump(self.data, f, ensure_ascii=False, indent=2)
        logger.info(f"配置已保存: {self.config_path}")

    def get(self, key: str, default: Any = None) -> Any:
        """按点号路径读取配置项"""
        node: Any = self.data
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> None:
        """按点号路径写入配置项（不自动保存）"""
        parts = key.split(".")
        node = self.data
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value

    def output_dir(self) -> str:
        """报告默认输出目录，环境变量优先"""
        return os.path.expanduser(os.environ.get(OUTPUT_DIR_ENV) or self.get("output_dir"))
