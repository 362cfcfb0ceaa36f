"""Voxel indexing and the evidential integration loop."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mass
from evmap.evidence import (
    BeliefAssignment,
    ClassEvidence,
    dirichlet_to_belief,
    evidence_to_dirichlet,
    vacuous_mass,
)
from evmap.fusion import discount, fuse_sequence
from evmap.kernel import KernelParams, neighbor_cells_and_distances, normalized_weight
from evmap.scan import ScanFrame, transform_to_world
from evmap.voxmap import (
    CellState,
    MapConfig,
    VoxelMap,
    cell_center,
    cell_uncertainty,
    predict_label,
    world_to_cell,
)


def make_config(num_classes=3, voxel=0.5, length=0.2, sigma0=1.0, min_weight=1e-3, max_range=100.0):
    return MapConfig(
        num_classes=num_classes,
        voxel_size=voxel,
        kernel=KernelParams(sigma0=sigma0, length=length),
        max_range=max_range,
        min_weight=min_weight,
    )


def world_scan(points, evidence, seq=0, pose=None):
    frame = ScanFrame(
        seq=seq,
        pose=np.eye(4) if pose is None else pose,
        points=np.asarray(points, dtype=float).reshape(-1, 3),
        evidence=np.asarray(evidence, dtype=float),
    )
    return transform_to_world(frame)


class TestIndexing:
    def test_origin(self):
        assert world_to_cell((0, 0, 0), 0.5) == (0, 0, 0)

    def test_mixed_signs(self):
        assert world_to_cell((0.7, -0.2, 1.0), 0.5) == (1, -1, 2)

    def test_negative_boundary(self):
        assert world_to_cell((-0.5, 0, 0), 0.5) == (-1, 0, 0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            world_to_cell((float("inf"), 0, 0), 0.5)

    def test_center_examples(self):
        assert cell_center((0, 0, 0), 0.5) == pytest.approx([0.25, 0.25, 0.25], abs=0)
        assert cell_center((1, -1, 2), 0.5) == pytest.approx([0.75, -0.25, 1.25], abs=0)

    @given(
        st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000), st.integers(-1000, 1000)),
        st.floats(0.05, 2.0),
    )
    @settings(max_examples=1000)
    def test_center_round_trip(self, idx, voxel):
        assert world_to_cell(cell_center(idx, voxel), voxel) == idx


class TestIntegrateScan:
    def test_empty_scan(self):
        vmap = VoxelMap(make_config())
        stats = vmap.integrate_scan(world_scan(np.zeros((0, 3)), np.zeros((0, 3))))
        assert len(vmap) == 0
        assert stats.points_kept == 0
        assert stats.cells_created == 0

    def test_single_point_at_cell_center(self):
        vmap = VoxelMap(make_config(length=0.2))
        stats = vmap.integrate_scan(world_scan([(0.25, 0.25, 0.25)], [[1.0, 0.0, 0.0]]))
        assert stats.points_kept == 1
        assert stats.cells_created == 1
        assert len(vmap) == 1
        cell = vmap.cells[(0, 0, 0)]
        assert cell.mass.b == pytest.approx([0.25, 0.0, 0.0], abs=1e-15)
        assert cell.mass.u == pytest.approx(0.75, abs=1e-15)
        assert cell.n_obs == 1

    def test_same_point_twice(self):
        vmap = VoxelMap(make_config(length=0.2))
        vmap.integrate_scan(world_scan([(0.25, 0.25, 0.25)], [[1.0, 0.0, 0.0]], seq=0))
        stats = vmap.integrate_scan(world_scan([(0.25, 0.25, 0.25)], [[1.0, 0.0, 0.0]], seq=1))
        assert stats.cells_updated == 1
        cell = vmap.cells[(0, 0, 0)]
        assert cell.mass.b == pytest.approx([0.4375, 0.0, 0.0], abs=1e-15)
        assert cell.mass.u == pytest.approx(0.5625, abs=1e-15)
        assert cell.n_obs == 2
        assert cell.last_scan == 1

    def test_out_of_range_point_dropped(self):
        vmap = VoxelMap(make_config(max_range=1.0))
        stats = vmap.integrate_scan(world_scan([(5.0, 0.0, 0.0)], [[1.0, 0.0, 0.0]]))
        assert stats.points_dropped_range == 1
        assert len(vmap) == 0

    def test_non_finite_row_skipped(self):
        vmap = VoxelMap(make_config())
        pts = [(0.25, 0.25, 0.25), (float("nan"), 0.0, 0.0)]
        ev = [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
        stats = vmap.integrate_scan(world_scan(pts, ev))
        assert stats.points_skipped_invalid == 1
        assert stats.points_kept == 1

    def test_wrong_evidence_width(self):
        vmap = VoxelMap(make_config(num_classes=3))
        with pytest.raises(ValueError, match="classes"):
            vmap.integrate_scan(world_scan([(0, 0, 0)], [[1.0, 0.0]]))

    def test_sensor_frame_rejected(self):
        vmap = VoxelMap(make_config())
        frame = ScanFrame(seq=0, pose=np.eye(4), points=[(0, 0, 0)], evidence=[[1, 0, 0]])
        with pytest.raises(ValueError, match="world"):
            vmap.integrate_scan(frame)

    def test_min_weight_prunes_far_cells(self):
        # Kernel support reaches face neighbors, but a high min_weight keeps
        # only the containing cell.
        cfg_all = make_config(length=0.6, min_weight=0.0)
        cfg_pruned = make_config(length=0.6, min_weight=0.9)
        scan = world_scan([(0.25, 0.25, 0.25)], [[4.0, 0.0, 0.0]])
        full, pruned = VoxelMap(cfg_all), VoxelMap(cfg_pruned)
        full.integrate_scan(scan)
        pruned.integrate_scan(scan)
        assert len(full) > len(pruned)
        assert len(pruned) == 1


def brute_force_cell_masses(scans, config):
    """Oracle: per cell, fuse every discounted contribution in global order."""
    per_cell: dict = {}
    for scan in scans:
        for point, evidence in zip(scan.points, scan.evidence):
            mass = dirichlet_to_belief(evidence_to_dirichlet(ClassEvidence(evidence)))
            idx, dist = neighbor_cells_and_distances(
                point, config.voxel_size, config.kernel.length
            )
            weights = normalized_weight(dist, config.kernel)
            for row, w in zip(idx, weights):
                if w >= config.min_weight:
                    key = (int(row[0]), int(row[1]), int(row[2]))
                    per_cell.setdefault(key, []).append(discount(mass, float(w)))
    return {key: fuse_sequence(contribs) for key, contribs in per_cell.items()}


class TestOracleEquivalence:
    def test_scanwise_equals_single_pass_fusion(self):
        rng = np.random.default_rng(2024)
        config = make_config(length=0.6, min_weight=0.0)
        for _ in range(5):
            points = rng.uniform(0.0, 2.0, size=(50, 3))
            evidence = rng.uniform(0.0, 8.0, size=(50, 3))
            scans = [
                world_scan(points[i * 10 : (i + 1) * 10], evidence[i * 10 : (i + 1) * 10], seq=i)
                for i in range(5)
            ]
            vmap = VoxelMap(config)
            for scan in scans:
                vmap.integrate_scan(scan)
            expected = brute_force_cell_masses(scans, config)
            assert set(vmap.cells) == set(expected)
            for key, want in expected.items():
                got = vmap.cells[key].mass
                assert np.max(np.abs(got.b - want.b)) < 1e-6
                assert abs(got.u - want.u) < 1e-6

    def test_threads_do_not_change_the_map(self):
        rng = np.random.default_rng(5)
        config = make_config(length=0.6)
        points = rng.uniform(0.0, 3.0, size=(200, 3))
        evidence = rng.uniform(0.0, 6.0, size=(200, 3))
        scan = world_scan(points, evidence)
        maps = []
        for threads in (1, 4):
            vmap = VoxelMap(config)
            vmap.integrate_scan(scan, threads=threads)
            maps.append(vmap)
        assert set(maps[0].cells) == set(maps[1].cells)
        for key in maps[0].cells:
            a, b = maps[0].cells[key], maps[1].cells[key]
            assert np.array_equal(a.mass.b, b.mass.b)
            assert a.mass.u == b.mass.u
            assert a.n_obs == b.n_obs


class TestLongFusionChains:
    def test_mass_stays_normalized_after_many_integrations(self):
        # 10^4 sequential contributions into one cell.
        config = make_config(length=0.2)
        vmap = VoxelMap(config)
        point = np.tile([0.25, 0.25, 0.25], (100, 1))
        evidence = np.tile([2.0, 1.0, 0.0], (100, 1))
        for seq in range(100):
            vmap.integrate_scan(world_scan(point, evidence, seq=seq))
        cell = vmap.cells[(0, 0, 0)]
        assert cell.n_obs == 10_000
        assert abs(float(cell.mass.b.sum()) + cell.mass.u - 1.0) < 1e-9

    def test_vacuity_non_increasing_for_agreeing_stream(self):
        config = make_config(length=0.2)
        vmap = VoxelMap(config)
        last = 1.0
        for seq in range(50):
            vmap.integrate_scan(world_scan([(0.25, 0.25, 0.25)], [[3.0, 0.5, 0.0]], seq=seq))
            u = vmap.cells[(0, 0, 0)].mass.u
            assert u <= last + 1e-12
            last = u


class TestPrediction:
    def test_focused_cell(self):
        cell = CellState(mass=BeliefAssignment([0.25, 0.0, 0.0], 0.75), n_obs=1, last_scan=0)
        assert predict_label(cell, 3) == 0

    def test_vacuous_tie_break(self):
        cell = CellState(mass=vacuous_mass(3), n_obs=1, last_scan=0)
        assert predict_label(cell, 3) == 0

    def test_second_class_wins(self):
        cell = CellState(mass=BeliefAssignment([0.1, 0.4], 0.5), n_obs=1, last_scan=0)
        assert predict_label(cell, 2) == 1

    def test_uncertainty_dispatch(self):
        cell = CellState(mass=BeliefAssignment([0.25, 0.0, 0.0], 0.75), n_obs=1, last_scan=0)
        assert cell_uncertainty(cell, 3) == 0.75
        assert cell_uncertainty(cell, 3, "vacuity") == 0.75
        assert cell_uncertainty(cell, 3, "variance") == pytest.approx(0.05, abs=1e-15)
        with pytest.raises(ValueError, match="unknown uncertainty measure"):
            cell_uncertainty(cell, 3, "volume")

    def test_dogmatic_cell_is_still_predictable(self):
        cell = CellState(mass=BeliefAssignment([0.0, 1.0], 0.0), n_obs=9, last_scan=0)
        assert predict_label(cell, 2) == 1
        assert cell_uncertainty(cell, 2, "variance") == 0.0


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            make_config(num_classes=1)
        with pytest.raises(ValueError):
            make_config(voxel=0.0)
        with pytest.raises(ValueError):
            make_config(min_weight=1.0)
        with pytest.raises(ValueError):
            make_config(max_range=-1.0)
