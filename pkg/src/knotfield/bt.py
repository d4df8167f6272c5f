"""Minimal behavior tree: Sequence, memory Sequence*, memory Selector*, leaves.

A plain Sequence re-ticks every child each tick, which is what lets a
tracking leaf (keep the base on the moving anchor) stay active for the
whole task.  The starred composites remember their progress: Sequence*
skips children that already succeeded; Selector* resumes its running
child and only falls back to the next alternative on failure.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Sequence as Seq

from .errors import InvalidParameterError


class Status(Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE = "failure"


class Node:
    """Base node; subclasses implement tick(world) -> Status."""

    name = "node"

    def tick(self, world) -> Status:
        raise NotImplementedError

    def reset(self) -> None:
        pass

    def iter_nodes(self):
        yield self


class Leaf(Node):
    """Action leaf wrapping a tick function (or subclassed for state)."""

    def __init__(self, fn: Callable[[object], Status], name: str = "leaf"):
        self._fn = fn
        self.name = name

    def tick(self, world) -> Status:
        return self._fn(world)


class _Composite(Node):
    def __init__(self, children: Seq[Node], name: str):
        children = list(children)
        if not children:
            raise InvalidParameterError(f"{name} node needs at least one child")
        self.children = children
        self.name = name

    def reset(self) -> None:
        for child in self.children:
            child.reset()

    def iter_nodes(self):
        yield self
        for child in self.children:
            yield from child.iter_nodes()


class Sequence(_Composite):
    """Memoryless sequence: ticks children in order every tick, fails fast."""

    def __init__(self, children: Seq[Node], name: str = "sequence"):
        super().__init__(children, name)

    def tick(self, world) -> Status:
        for child in self.children:
            status = child.tick(world)
            if status is not Status.SUCCESS:
                return status
        return Status.SUCCESS


class Selector(_Composite):
    """Memoryless selector: ticks children in order, succeeds on the first
    child that does not fail."""

    def __init__(self, children: Seq[Node], name: str = "selector"):
        super().__init__(children, name)

    def tick(self, world) -> Status:
        for child in self.children:
            status = child.tick(world)
            if status is not Status.FAILURE:
                return status
        return Status.FAILURE


class SequenceStar(_Composite):
    """Sequence with memory: children that succeeded are not re-ticked."""

    def __init__(self, children: Seq[Node], name: str = "sequence*"):
        super().__init__(children, name)
        self._index = 0

    def reset(self) -> None:
        self._index = 0
        super().reset()

    def tick(self, world) -> Status:
        while self._index < len(self.children):
            status = self.children[self._index].tick(world)
            if status is Status.SUCCESS:
                self._index += 1
                continue
            return status
        return Status.SUCCESS


class SelectorStar(_Composite):
    """Memory selector: resumes the running child, falls back on failure."""

    def __init__(self, children: Seq[Node], name: str = "selector*"):
        super().__init__(children, name)
        self._index = 0

    def reset(self) -> None:
        self._index = 0
        super().reset()

    def tick(self, world) -> Status:
        while self._index < len(self.children):
            status = self.children[self._index].tick(world)
            if status is Status.FAILURE:
                self._index += 1
                continue
            if status is Status.SUCCESS:
                self._index = 0
            return status
        self._index = 0
        return Status.FAILURE


def tick_bt(node: Node, world) -> Status:
    """Tick the root of a behavior tree once against a mutable world."""
    if not isinstance(node, Node):
        raise InvalidParameterError("tick_bt expects a behavior tree Node")
    return node.tick(world)
