"""通用工具: 日志、配置、异常"""

from .config_manager import ConfigManager
from .errors import ChokepointError
from .logger import setup_logger

__all__ = ["ConfigManager", "ChokepointError", "setup_logger"]
