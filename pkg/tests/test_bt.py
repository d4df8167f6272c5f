"""Behavior-tree composites: tick order, memory, failure fallbacks."""

import pytest

from knotfield import (
    InvalidParameterError,
    Leaf,
    Selector,
    SelectorStar,
    Sequence,
    SequenceStar,
    Status,
    tick_bt,
)


class Script(Leaf):
    """Leaf that replays a scripted list of statuses and logs its ticks."""

    def __init__(self, name, statuses, log):
        super().__init__(self._run, name)
        self.statuses = list(statuses)
        self.i = 0
        self.log = log

    def _run(self, world):
        self.log.append(self.name)
        s = self.statuses[min(self.i, len(self.statuses) - 1)]
        self.i += 1
        return s

    def reset(self):
        self.i = 0


class TestSequence:
    def test_all_success(self):
        log = []
        seq = Sequence([Script("a", [Status.SUCCESS], log),
                        Script("b", [Status.SUCCESS], log)])
        assert tick_bt(seq, None) is Status.SUCCESS
        assert log == ["a", "b"]

    def test_fails_fast(self):
        log = []
        seq = Sequence([Script("a", [Status.FAILURE], log),
                        Script("b", [Status.SUCCESS], log)])
        assert tick_bt(seq, None) is Status.FAILURE
        assert log == ["a"]

    def test_running_blocks_later_children(self):
        log = []
        seq = Sequence([Script("a", [Status.RUNNING], log),
                        Script("b", [Status.SUCCESS], log)])
        assert tick_bt(seq, None) is Status.RUNNING
        assert log == ["a"]

    def test_memoryless_reticks_completed_children(self):
        # the tracking child must run again on every tick
        log = []
        seq = Sequence([Script("track", [Status.SUCCESS], log),
                        Script("work", [Status.RUNNING, Status.SUCCESS], log)])
        tick_bt(seq, None)
        tick_bt(seq, None)
        assert log == ["track", "work", "track", "work"]


class TestSequenceStar:
    def test_skips_succeeded_children(self):
        log = []
        seq = SequenceStar([Script("a", [Status.SUCCESS], log),
                            Script("b", [Status.RUNNING, Status.SUCCESS], log)])
        assert tick_bt(seq, None) is Status.RUNNING
        assert tick_bt(seq, None) is Status.SUCCESS
        assert log == ["a", "b", "b"]

    def test_reset_restores_progress(self):
        log = []
        seq = SequenceStar([Script("a", [Status.SUCCESS], log),
                            Script("b", [Status.SUCCESS], log)])
        tick_bt(seq, None)
        seq.reset()
        tick_bt(seq, None)
        assert log == ["a", "b", "a", "b"]

    def test_failure_propagates_without_advancing(self):
        log = []
        seq = SequenceStar([Script("a", [Status.FAILURE, Status.SUCCESS], log),
                            Script("b", [Status.SUCCESS], log)])
        assert tick_bt(seq, None) is Status.FAILURE
        assert tick_bt(seq, None) is Status.SUCCESS
        assert log == ["a", "a", "b"]


class TestSelector:
    def test_first_success_wins(self):
        log = []
        sel = Selector([Script("a", [Status.FAILURE], log),
                        Script("b", [Status.SUCCESS], log),
                        Script("c", [Status.SUCCESS], log)])
        assert tick_bt(sel, None) is Status.SUCCESS
        assert log == ["a", "b"]

    def test_all_fail(self):
        log = []
        sel = Selector([Script("a", [Status.FAILURE], log),
                        Script("b", [Status.FAILURE], log)])
        assert tick_bt(sel, None) is Status.FAILURE


class TestSelectorStar:
    def test_resumes_running_child(self):
        log = []
        sel = SelectorStar([Script("a", [Status.RUNNING, Status.SUCCESS], log),
                            Script("b", [Status.SUCCESS], log)])
        assert tick_bt(sel, None) is Status.RUNNING
        assert tick_bt(sel, None) is Status.SUCCESS
        # never touched the alternative
        assert log == ["a", "a"]

    def test_falls_back_on_failure(self):
        log = []
        sel = SelectorStar([Script("a", [Status.FAILURE], log),
                            Script("b", [Status.RUNNING, Status.SUCCESS], log)])
        assert tick_bt(sel, None) is Status.RUNNING
        assert tick_bt(sel, None) is Status.SUCCESS
        assert log == ["a", "b", "b"]

    def test_index_resets_after_success(self):
        log = []
        sel = SelectorStar([Script("a", [Status.FAILURE, Status.SUCCESS], log),
                            Script("b", [Status.SUCCESS], log)])
        assert tick_bt(sel, None) is Status.SUCCESS   # falls back to b
        assert tick_bt(sel, None) is Status.SUCCESS   # starts over from a
        assert log == ["a", "b", "a"]

    def test_exhausted_alternatives_fail(self):
        log = []
        sel = SelectorStar([Script("a", [Status.FAILURE], log),
                            Script("b", [Status.FAILURE], log)])
        assert tick_bt(sel, None) is Status.FAILURE


class TestPlumbing:
    def test_empty_composite_rejected(self):
        for cls in (Sequence, Selector, SequenceStar, SelectorStar):
            with pytest.raises(InvalidParameterError):
                cls([])

    def test_tick_bt_rejects_non_nodes(self):
        with pytest.raises(InvalidParameterError):
            tick_bt(object(), None)

    def test_iter_nodes_walks_the_tree(self):
        log = []
        leafs = [Script(str(i), [Status.SUCCESS], log) for i in range(3)]
        tree = Sequence([leafs[0], SelectorStar(leafs[1:])])
        names = [n.name for n in tree.iter_nodes()]
        assert names == ["sequence", "0", "selector*", "1", "2"]

    def test_nested_reset_recurses(self):
        log = []
        leaf = Script("x", [Status.SUCCESS], log)
        tree = Sequence([SequenceStar([leaf])])
        tick_bt(tree, None)
        tree.reset()
        assert leaf.i == 0
