"""
Chokepoint - 审查网关模拟器与主动测量探测套件
"""

__version__ = "1.0.0"
