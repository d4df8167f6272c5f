"""End-to-end acceptance: field physics, robustness sweeps, knot programs.

The full-scale sweep (42,000 trials) is computed once per module and shared
by the failure-count, weighting-trend, and noise-direction checks.
"""

import time

import numpy as np
import pytest

from knotfield import (
    FieldParams,
    InsertionParams,
    Loop,
    WaveSpec,
    deform_wave,
    field,
    fit_plane_frame,
    knot_program,
    make_circle,
    make_double,
    make_folded,
    offset,
    parse_program,
    run_insertion,
    run_program,
)
from knotfield.cli import main as cli_main
from knotfield.insertion import STOP_BY_FIELD_DROP
from knotfield.knots import PROGRAM_COUNTS, WorldConfig
from knotfield.sweep import SweepConfig, format_row, run_sweep, summarize

SCALE_C = 1.0
PARAMS = FieldParams(scale_c=SCALE_C)


def analytic_center(radius):
    return 2 * np.pi * SCALE_C / radius


def analytic_on_axis(radius, z):
    return 2 * np.pi * SCALE_C * radius**2 / (radius**2 + z**2) ** 1.5


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


class TestCriterion1FieldCorrectness:
    def test_center_field_within_half_percent(self):
        loop = make_circle(1.0, 0.1)
        b = field(loop, np.zeros(3), PARAMS)
        assert np.linalg.norm(b) == pytest.approx(analytic_center(1.0), rel=5e-3)

    @pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
    def test_on_axis_within_half_percent(self, z):
        loop = make_circle(1.0, 0.1)
        b = field(loop, np.array([0.0, 0.0, z]), PARAMS)
        assert np.linalg.norm(b) == pytest.approx(analytic_on_axis(1.0, z), rel=5e-3)

    def test_convergence_order_at_least_two(self):
        x = np.array([0.3, 0.1, 0.4])
        exact = np.linalg.norm(field(make_circle(1.0, 1e-4), x, PARAMS))
        errs = [abs(np.linalg.norm(field(make_circle(1.0, step), x, PARAMS)) - exact)
                for step in (0.2, 0.1, 0.05)]
        assert errs[0] / errs[1] > 3.5
        assert errs[1] / errs[2] > 3.5


class TestCriterion2ExactSymmetries:
    N = 1000

    def setup_method(self):
        self.rng = np.random.default_rng(2024)
        self.loop = make_circle(1.0, 0.1)

    def _samples(self):
        pts = self.rng.uniform(-2.0, 2.0, size=(self.N, 3))
        # keep samples off the wire where the kernel is singular
        near = (np.abs(np.linalg.norm(pts[:, :2], axis=1) - 1.0) < 0.05) \
            & (np.abs(pts[:, 2]) < 0.05)
        pts[near] += np.array([0.0, 0.0, 0.2])
        return pts

    def test_orientation_antisymmetry(self):
        rev = self.loop.reversed()
        for x in self._samples():
            assert np.allclose(field(self.loop, x, PARAMS), -field(rev, x, PARAMS),
                               rtol=1e-12, atol=1e-12)

    def test_rigid_motion_equivariance(self):
        for x in self._samples():
            rot = random_rotation(self.rng)
            shift = self.rng.uniform(-1.0, 1.0, size=3)
            moved = Loop(self.loop.vertices @ rot.T + shift)
            assert np.allclose(rot @ field(self.loop, x, PARAMS),
                               field(moved, rot @ x + shift, PARAMS),
                               rtol=1e-9, atol=1e-12)

    def test_superposition_by_arc_splitting(self):
        # two open arcs sharing both junction chords: the chord
        # contributions cancel, so the fields add up to the full loop's
        verts = self.loop.vertices
        first = Loop(verts[:20])
        second = Loop(np.vstack([verts[19:], verts[:1]]))
        for x in self._samples():
            assert np.allclose(field(self.loop, x, PARAMS),
                               field(first, x, PARAMS) + field(second, x, PARAMS),
                               rtol=1e-9, atol=1e-12)

    def test_offset_norm_is_gamma(self):
        for x in self._samples():
            gamma = float(self.rng.uniform(0.001, 0.1))
            d = offset(self.loop, x, FieldParams(gamma=gamma))
            assert np.linalg.norm(d) == pytest.approx(gamma, rel=1e-9)


class TestCriterion3Stopping:
    @pytest.mark.parametrize("make_loop,start", [
        (lambda: make_circle(1.0, 0.1).reversed(), (0.3, -0.2, 2.0)),
        (lambda: make_folded(1.0, 0.1, np.pi / 2).reversed(), (0.0, -0.5, 2.0)),
        (lambda: make_double(1.0, 0.1, 0.3).reversed(), (0.1, 0.1, 2.0)),
    ])
    def test_stop_within_two_steps_of_flux_peak(self, make_loop, start):
        out = run_insertion(start, make_loop(), InsertionParams())
        assert out.termination == STOP_BY_FIELD_DROP
        peak = out.trajectory.positions[int(np.argmax(out.trajectory.flux))]
        assert np.linalg.norm(out.stop_point - peak) <= 2 * 0.01 + 1e-12

    def test_axial_stop_lands_on_the_plane(self):
        out = run_insertion((0.0, 0.0, 2.0), make_circle(1.0, 0.1).reversed(),
                            InsertionParams())
        assert out.termination == STOP_BY_FIELD_DROP
        assert abs(out.stop_point[2]) <= 0.01


@pytest.fixture(scope="module")
def full_sweep():
    config = SweepConfig()
    rows = run_sweep(config)
    return config, rows, summarize(rows, config)


COMBOS = ((2.0, 1.0), (1.0, 1.0), (1.0, 2.0))


def _cell_index(summary):
    return {(c.noise_kind, c.sigma, (c.alpha, c.beta)): c for c in summary.cells}


class TestCriterion4SweepFailures:
    def test_full_scale_failure_budget(self, full_sweep):
        config, rows, summary = full_sweep
        assert summary.total_trials == 42000
        assert summary.total_failures <= 50
        for cell in summary.cells:
            if cell.sigma == 0:
                assert cell.failures == 0
            if cell.failures:
                assert cell.sigma >= 0.25

    def test_smoke_variant_clean_below_sigma_02(self):
        rows = run_sweep(SweepConfig(trials=100))
        assert all(r.success for r in rows if r.sigma <= 0.2)


class TestCriterion5WeightingTrends:
    @pytest.mark.parametrize("kind", ["isotropic", "cylindrical"])
    def test_quality_and_delay_orderings(self, full_sweep, kind):
        config, rows, summary = full_sweep
        cells = _cell_index(summary)
        sigmas = sorted({c.sigma for c in summary.cells})
        q_ok = d_ok = 0
        for sigma in sigmas:
            tri = [cells[(kind, sigma, ab)] for ab in COMBOS]
            q_ok += tri[0].mean_quality < tri[1].mean_quality < tri[2].mean_quality
            d_ok += tri[0].mean_delay > tri[1].mean_delay > tri[2].mean_delay
        assert q_ok >= 6
        assert d_ok >= 6


class TestCriterion6NoiseDirection:
    def _aggregate(self, summary, kind):
        cells = _cell_index(summary)
        sigmas = sorted({c.sigma for c in summary.cells})
        return [np.mean([cells[(kind, s, ab)].mean_quality for ab in COMBOS])
                for s in sigmas]

    def test_isotropic_quality_degrades_with_sigma(self, full_sweep):
        _, _, summary = full_sweep
        agg = self._aggregate(summary, "isotropic")
        pairs = sum(agg[i + 1] >= agg[i] for i in range(len(agg) - 1))
        assert pairs >= 5

    def test_cylindrical_quality_improves_with_sigma(self, full_sweep):
        _, _, summary = full_sweep
        agg = self._aggregate(summary, "cylindrical")
        pairs = sum(agg[i + 1] <= agg[i] for i in range(len(agg) - 1))
        assert pairs >= 5


class TestCriterion7KnotPrograms:
    def test_all_programs_complete_with_counts(self):
        t0 = time.perf_counter()
        for name, counts in PROGRAM_COUNTS.items():
            result = run_program(name, seed=0)
            assert result.completed, f"{name} failed at {result.failure_step}"
            assert (result.insertion_count, result.twist_count) == counts
        assert time.perf_counter() - t0 < 60.0

    def test_unknot_threads_the_anchor(self):
        assert run_program("unknot", seed=0).link_check == 1

    @pytest.mark.parametrize("token", ["6.1", "6.2"])
    def test_trefoil_completes_with_either_loop_builder(self, token):
        steps = ["1", "2", "3", "4", "5", token, "7", "8", "9", "10"]
        program = parse_program("\n".join(f"step {s}" for s in steps),
                                name=f"3_1-{token}")
        result = run_program(program, seed=0)
        assert result.completed
        assert (result.insertion_count, result.twist_count) == PROGRAM_COUNTS["3_1"]
        assert result.link_check == 1


def wave_anchor(ratio, segments_scale=1):
    radius = 0.25
    nominal = make_circle(radius, 0.1 / segments_scale,
                          center=(0.9, 0.0, 0.5), normal=(1.0, 0.0, 0.0))
    frame = fit_plane_frame(nominal)
    spec = WaveSpec(amplitude=ratio * radius, base_frequency=0.05,
                    chirp_rate=0.0005)
    return lambda t: deform_wave(nominal, spec, float(t), frame)


class TestCriterion8WaveDeformation:
    def test_trefoil_under_one_fifth_wave(self):
        for seed in range(10):
            result = run_program("3_1", seed=seed,
                                 anchor_provider=wave_anchor(1 / 5))
            assert result.completed and result.link_check == 1, f"seed {seed}"

    def test_trefoil_under_half_wave_with_finer_loop(self):
        for seed in range(10):
            result = run_program("3_1", seed=seed,
                                 anchor_provider=wave_anchor(1 / 2, segments_scale=4))
            assert result.completed and result.link_check == 1, f"seed {seed}"


class TestCriterion9MovingLoop:
    def test_trefoil_with_translating_anchor(self):
        # sinusoidal translation with peak speed at half the platform's
        # per-tick limit; acceleration is bounded by amplitude * omega^2
        nominal = make_circle(0.25, 0.1, center=(0.9, 0.0, 0.5),
                              normal=(1.0, 0.0, 0.0))
        amplitude = 0.25
        omega = 0.5 * WorldConfig().base_step / amplitude
        direction = np.array([0.0, 1.0, 0.0])

        def provider(t):
            return Loop(nominal.vertices
                        + amplitude * np.sin(omega * float(t)) * direction)

        for seed in range(5):
            result = run_program("3_1", seed=seed, anchor_provider=provider)
            assert result.completed and result.link_check == 1, f"seed {seed}"


class TestCriterion10Determinism:
    def test_sweep_csv_byte_identical_across_workers(self, tmp_path):
        outputs = []
        for workers in (1, 2, 8):
            out = tmp_path / f"rows-{workers}.csv"
            summary = tmp_path / f"summary-{workers}.csv"
            code = cli_main(["sweep", "--trials", "3", "--seed", "11",
                             "--workers", str(workers),
                             "--out", str(out), "--summary", str(summary)])
            assert code == 0
            outputs.append(out.read_bytes() + summary.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_repeat_run_byte_identical(self, tmp_path):
        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{tag}.csv"
            cli_main(["sweep", "--trials", "2", "--seed", "7",
                      "--out", str(out), "--summary", str(tmp_path / f"s{tag}")])
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
