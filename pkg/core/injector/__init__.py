"""
Injector - zero-initialised side branches feeding memory into attention.
"""

from core.injector.branch import append_memory_rows, attend_with_memory, inject_kv, zero_conv_branch
from core.injector.params import (
    INIT_STD,
    BranchParams,
    InjectorParams,
    LayerInjector,
    init_branch,
    init_injector,
)


__all__ = [
    "BranchParams",
    "LayerInjector",
    "InjectorParams",
    "INIT_STD",
    "init_branch",
    "init_injector",
    "zero_conv_branch",
    "inject_kv",
    "append_memory_rows",
    "attend_with_memory",
]
