import numpy as np

from affordance_sim import perception as per
from affordance_sim.geometry import Transform, rot_z
from affordance_sim.world import (Category, SceneObject, SensorConfig,
                                  VoxelGrid)


def grid_20():
    return VoxelGrid.empty([0, 0, 0], 0.1, (20, 20, 12))


def sensor(sigma=0.0, window=5, fov=(1.2, 0.8), max_range=8.0):
    return SensorConfig(offset=np.zeros(3), fov=fov, max_range=max_range,
                        depth_noise_sigma=sigma, median_window=window)


def obj(oid, pos, cat=Category.FOOD):
    return SceneObject(oid, cat, pos)


class TestSense:
    def test_zero_noise_identity_calibration_exact(self):
        g = grid_20()
        dets = per.sense("robot", sensor(sigma=0.0), [0.25, 0.95, 0.5], 0.0,
                         [obj(1, [1.55, 1.05, 0.5])], g,
                         per.FrameCalibration(), np.random.default_rng(0), 1.0)
        assert len(dets) == 1
        assert np.allclose(dets[0].position, [1.55, 1.05, 0.5])

    def test_object_behind_wall_not_detected(self):
        g = grid_20()
        for iy in range(20):
            for iz in range(12):
                g.set_occupied((10, iy, iz))
        dets = per.sense("robot", sensor(), [0.25, 0.95, 0.5], 0.0,
                         [obj(1, [1.55, 1.05, 0.5])], g,
                         per.FrameCalibration(), np.random.default_rng(0), 0.0)
        assert dets == []

    def test_median_rejects_outlier(self):
        class FakeRng:
            def normal(self, loc, scale, size):
                return np.array([1.0, 1.1, 9.0, 1.05, 0.95])

        g = grid_20()
        dets = per.sense("robot", sensor(sigma=0.02), [0.05, 0.95, 0.5], 0.0,
                         [obj(1, [1.05, 0.95, 0.5])], g,
                         per.FrameCalibration(), FakeRng(), 0.0)
        # depth = median 1.05 along +x from the sensor origin
        assert np.allclose(dets[0].position, [0.05 + 1.05, 0.95, 0.5])

    def test_fov_cull(self):
        g = grid_20()
        # object behind the sensor (heading +x, object at -x)
        dets = per.sense("robot", sensor(), [1.05, 0.95, 0.5], 0.0,
                         [obj(1, [0.15, 0.95, 0.5])], g,
                         per.FrameCalibration(), np.random.default_rng(0), 0.0)
        assert dets == []

    def test_range_cull(self):
        g = grid_20()
        dets = per.sense("robot", sensor(max_range=0.5), [0.05, 0.95, 0.5],
                         0.0, [obj(1, [1.05, 0.95, 0.5])], g,
                         per.FrameCalibration(), np.random.default_rng(0), 0.0)
        assert dets == []

    def test_deterministic_given_seed(self):
        g = grid_20()
        objs = [obj(1, [1.05, 0.95, 0.5]), obj(2, [1.0, 1.4, 0.4])]
        a = per.sense("robot", sensor(sigma=0.05), [0.05, 0.95, 0.5], 0.3,
                      objs, g, per.FrameCalibration(),
                      np.random.default_rng(77), 0.0)
        b = per.sense("robot", sensor(sigma=0.05), [0.05, 0.95, 0.5], 0.3,
                      objs, g, per.FrameCalibration(),
                      np.random.default_rng(77), 0.0)
        assert all(np.array_equal(x.position, y.position) for x, y in zip(a, b))

    def test_calibration_error_shifts_estimate(self):
        g = grid_20()
        calib = per.FrameCalibration(
            robot_error=Transform(rot_z(0.0), np.array([0.05, 0.0, 0.0])))
        dets = per.sense("robot", sensor(), [0.05, 0.95, 0.5], 0.0,
                         [obj(1, [1.05, 0.95, 0.5])], g, calib,
                         np.random.default_rng(0), 0.0)
        assert np.allclose(dets[0].position, [1.10, 0.95, 0.5])


class TestFuse:
    def test_single_source_passthrough(self):
        d = per.Detection(3, np.array([1.0, 0.5, 0.2]), "robot", 1.0, 0.02)
        fused = per.fuse([d], 0.3)
        assert fused.ids() == [3]
        assert np.allclose(fused.position(3), [1.0, 0.5, 0.2])

    def test_equal_sigma_mean(self):
        a = per.Detection(1, np.array([1.0, 0.0, 0.0]), "headset", 1.0, 0.02)
        b = per.Detection(1, np.array([1.1, 0.0, 0.0]), "robot", 1.0, 0.02)
        fused = per.fuse([a, b], 0.3)
        assert np.allclose(fused.position(1), [1.05, 0.0, 0.0])

    def test_zero_detections(self):
        assert per.fuse([], 0.3).ids() == []

    def test_weighting_prefers_low_sigma(self):
        a = per.Detection(1, np.array([1.0, 0.0, 0.0]), "headset", 1.0, 0.01)
        b = per.Detection(1, np.array([1.2, 0.0, 0.0]), "robot", 1.0, 0.1)
        fused = per.fuse([a, b], 0.5)
        x = fused.position(1)[0]
        w1, w2 = 1 / 0.01 ** 2, 1 / 0.1 ** 2
        assert np.isclose(x, (1.0 * w1 + 1.2 * w2) / (w1 + w2))

    def test_association_gate_drops_outlier(self):
        a = per.Detection(1, np.array([1.0, 0.0, 0.0]), "headset", 1.0, 0.01)
        b = per.Detection(1, np.array([2.5, 0.0, 0.0]), "robot", 1.0, 0.1)
        fused = per.fuse([a, b], 0.3)
        assert np.allclose(fused.position(1), [1.0, 0.0, 0.0])

    def test_unseen_object_never_in_O(self):
        g = grid_20()
        for iy in range(20):
            for iz in range(12):
                g.set_occupied((10, iy, iz))
        hidden = obj(9, [1.55, 1.05, 0.5])
        seen = obj(1, [0.55, 0.95, 0.5])
        dets = per.sense("robot", sensor(), [0.05, 0.95, 0.5], 0.0,
                         [hidden, seen], g, per.FrameCalibration(),
                         np.random.default_rng(0), 0.0)
        fused = per.fuse(dets, 0.3)
        assert 9 not in fused
        assert 1 in fused

    def test_last_seen_persistence(self):
        o = per.DetectedObjectSet()
        o.update_from(per.fuse([per.Detection(1, np.array([1.0, 1.0, 0.1]),
                                              "robot", 0.0, 0.0)], 0.3))
        o.update_from(per.fuse([], 0.3))
        assert 1 in o
