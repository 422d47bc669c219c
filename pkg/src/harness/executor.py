#!/usr/bin/env python3
"""
Probe Executor - 探测任务执行器

把探测计划展开成的任务并发执行，结果始终按提交顺序返回，
输出顺序与完成顺序无关。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, List, Optional

from src.utils.errors import ChokepointError, ProbeRuntimeError

logger = logging.getLogger(__name__)


@dataclass
class ProbeTask:
    """一个探测任务；key 同时是出错时的上下文"""
    key: str
    run: Callable[[], Any]


@dataclass
class ExecutionResult:
    """执行结果"""
    key: str
    success: bool
    value: Any = None
    error: Optional[Exception] = None

    def unwrap(self) -> Any:
        if self.success:
            return self.value
        if isinstance(self.error, ChokepointError):
            raise ProbeRuntimeError(self.error.message, context=self.key, cause=self.error) from self.error
        raise ProbeRuntimeError(f"{type(self.error).__name__}: {self.error}", context=self.key,
                                cause=self.error) from self.error


def _execute(task: ProbeTask) -> ExecutionResult:
    try:
        return ExecutionResult(key=task.key, success=True, value=task.run())
    except Exception as e:
        logger.debug(f"任务 {task.key} 失败: {e}")
        return ExecutionResult(key=task.key, success=False, error=e)


class ProbeExecutor:
    """
    探测执行器

    Args:
        workers: 并发度；1 表示在当前线程顺序执行
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers 必须 >= 1: {workers}")
        self.workers = workers

    def execute(self, tasks: List[ProbeTask]) -> List[ExecutionResult]:
        if self.workers == 1 or len(tasks) <= 1:
            return [_execute(task) for task in tasks]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(_execute, tasks))

    def run_all(self, tasks: List[ProbeTask]) -> List[Any]:
        """
        执行并取值；按提交顺序第一个失败的任务被包装成 ProbeRuntimeError 抛出

        Raises:
            ProbeRuntimeError: 任一任务失败
        """
        results = self.execute(tasks)
        failed = sum(1 for r in results if not r.success)
        if failed:
            logger.error(f"{failed}/{len(results)} 个探测任务失败")
        return [result.unwrap() for result in results]
