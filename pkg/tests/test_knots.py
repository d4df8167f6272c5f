"""Knot programs: parsing, tree layout, world mechanics, short runs."""

import numpy as np
import pytest

from knotfield import (
    InvalidParameterError,
    World,
    WorldConfig,
    knot_program,
    parse_program,
    run_program,
)
from knotfield.bt import Sequence, SequenceStar
from knotfield.knots import (
    PROGRAM_COUNTS,
    PROGRAMS,
    build_program_tree,
    closed_rope_path,
    make_default_world,
    serialize_program,
)


class TestProgramTable:
    def test_known_programs(self):
        assert set(PROGRAMS) == {"unknot", "3_1", "4_1", "5_2", "7_3"}
        assert set(PROGRAM_COUNTS) == set(PROGRAMS)

    @pytest.mark.parametrize("name", sorted(PROGRAMS))
    def test_programs_start_with_approach(self, name):
        assert knot_program(name).steps[0] == "1"

    def test_loop_construction_count_matches_twists(self):
        # each `6` adds one rope-loop construction, hence one twist
        for name, steps in PROGRAMS.items():
            assert steps.count("6") == PROGRAM_COUNTS[name][1]

    def test_insertion_count_matches_programs(self):
        for name, steps in PROGRAMS.items():
            n_insert = steps.count("3") + steps.count("7")
            assert n_insert == PROGRAM_COUNTS[name][0]

    def test_unknown_program_rejected(self):
        with pytest.raises(InvalidParameterError):
            knot_program("8_19")


class TestParsing:
    def test_roundtrip(self):
        program = knot_program("5_2")
        assert parse_program(serialize_program(program)).steps == program.steps

    def test_comments_and_blank_lines(self):
        text = "# preamble\nstep 1\n\nstep 2  # grasp\nstep 3\n"
        assert parse_program(text).steps == ("1", "2", "3")

    def test_substep_tokens(self):
        assert parse_program("step 1\nstep 6.1\nstep 6.2\n").steps == ("1", "6.1", "6.2")

    @pytest.mark.parametrize("bad", ["step 11\n", "walk 1\n", "step\n", ""])
    def test_rejects_malformed(self, bad):
        with pytest.raises(InvalidParameterError):
            parse_program(bad)


class TestTreeLayout:
    def test_root_is_sequence_over_approach_and_star(self):
        tree = build_program_tree(knot_program("3_1"))
        assert isinstance(tree, Sequence)
        assert isinstance(tree.children[1], SequenceStar)

    def test_grasp_insert_pair_shares_plain_sequence(self):
        # a dropped rope must re-run the grasp, so steps 2+3 sit under a
        # memoryless Sequence inside the memory star
        tree = build_program_tree(knot_program("unknot"))
        star = tree.children[1]
        pair = star.children[0]
        assert isinstance(pair, Sequence) and not isinstance(pair, SequenceStar)
        assert [c.name for c in pair.children] == ["grasp-Rf", "insert-Rf-anchor"]

    def test_program_must_begin_with_step_1(self):
        with pytest.raises(InvalidParameterError):
            build_program_tree(parse_program("step 2\nstep 3\n"))

    def test_all_leaves_named(self):
        tree = build_program_tree(knot_program("7_3"))
        assert all(node.name for node in tree.iter_nodes())


class TestWorld:
    def setup_method(self):
        self.world = make_default_world(seed=0)

    def test_facing_follows_heading(self):
        self.world.base.heading = np.pi / 2
        assert np.allclose(self.world.facing(), [0, 1, 0], atol=1e-12)

    def test_anchor_provider_called_with_tick(self):
        seen = []
        world = make_default_world(anchor_provider=lambda t: seen.append(t) or
                                   make_default_world().anchor())
        world.anchor()
        world.tick_count = 7
        world.anchor()
        assert seen == [0, 7]

    def test_seeded_worlds_differ(self):
        other = make_default_world(seed=1)
        assert not np.allclose(self.world.rope.points, other.rope.points)

    def test_closed_rope_path_is_closed_polyline(self):
        path = closed_rope_path(self.world.rope)
        assert path.shape[0] == len(self.world.rope) + 2
        assert path[-1][2] == path[-2][2]  # return arc runs above the scene
        assert path[-1][2] > self.world.rope.points[:, 2].max()


class TestShortRuns:
    def test_unknot_completes(self):
        result = run_program("unknot", seed=0)
        assert result.completed
        assert (result.insertion_count, result.twist_count) == (1, 0)
        assert result.link_check == 1
        assert result.failure_step is None

    def test_trefoil_completes_with_counts(self):
        result = run_program("3_1", seed=0)
        assert result.completed
        assert (result.insertion_count, result.twist_count) == (2, 1)
        assert result.link_check == 1

    def test_trefoil_sub_steps_equivalent(self):
        base = run_program("3_1", seed=0)
        for token in ("6.1", "6.2"):
            steps = ["1", "2", "3", "4", "5", token, "7", "8", "9", "10"]
            text = "\n".join(f"step {s}" for s in steps)
            result = run_program(parse_program(text, name=f"3_1-{token}"), seed=0)
            assert result.completed
            assert (result.insertion_count, result.twist_count) == (2, 1)
            assert result.link_check == base.link_check == 1

    def test_run_is_deterministic(self):
        a = run_program("unknot", seed=3)
        b = run_program("unknot", seed=3)
        assert a.ticks == b.ticks
        assert [row.arm1 for row in a.log] == [row.arm1 for row in b.log]

    def test_log_rows_monotone_ticks(self):
        result = run_program("unknot", seed=0, log_every=5)
        ticks = [row.tick for row in result.log]
        assert ticks == sorted(ticks)
        assert all(t % 5 == 0 for t in ticks)
