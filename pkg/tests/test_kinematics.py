import numpy as np
import pytest

from affordance_sim.errors import DimensionMismatch, JointLimitError
from affordance_sim.geometry import Transform, rot_y, rot_z
from affordance_sim.kinematics import (KinematicChain, fk_batch,
                                       forward_kinematics, jacobian,
                                       manipulability,
                                       manipulability_w_batch,
                                       reach_distance, refine_to_point)

FULL = np.array([[-np.pi, np.pi]])


def planar_two_link(l1=1.0, l2=1.0, mount=None):
    return KinematicChain(np.array([l1, l2]), ("z", "z"),
                          np.repeat(FULL, 2, axis=0),
                          mount or Transform.identity())


def random_chain(rng):
    n = int(rng.integers(1, 5))
    lengths = rng.uniform(0.1, 1.0, n)
    axes = tuple(rng.choice(["z", "y"]) for _ in range(n))
    lo = rng.uniform(-np.pi, -0.1, n)
    hi = rng.uniform(0.1, np.pi, n)
    mount = Transform(rot_z(rng.uniform(-np.pi, np.pi)) @ rot_y(rng.uniform(-1, 1)),
                      rng.uniform(-0.5, 0.5, 3))
    return KinematicChain(lengths, axes, np.stack([lo, hi], axis=1), mount)


def fd_jacobian(chain, q, h=1e-5):
    """Central finite-difference positional Jacobian (independent oracle)."""
    n = chain.n_joints
    J = np.zeros((3, n))
    for j in range(n):
        qp, qm = np.array(q, float), np.array(q, float)
        qp[j] += h
        qm[j] -= h
        pp = _fk_unclamped(chain, qp)
        pm = _fk_unclamped(chain, qm)
        J[:, j] = (pp - pm) / (2 * h)
    return J


def _fk_unclamped(chain, q):
    # FD probes may step just over a limit; widen limits for the oracle only
    wide = KinematicChain(chain.link_lengths, chain.link_axes,
                          np.array([[-10.0, 10.0]] * chain.n_joints),
                          chain.mount)
    return forward_kinematics(wide, q)[0]


class TestForwardKinematics:
    def test_straight_arm(self):
        ch = planar_two_link()
        pos, _ = forward_kinematics(ch, [0.0, 0.0])
        assert np.allclose(pos, [2.0, 0.0, 0.0])

    def test_base_rotation(self):
        ch = planar_two_link()
        pos, _ = forward_kinematics(ch, [np.pi / 2, 0.0])
        assert np.allclose(pos, [0.0, 2.0, 0.0], atol=1e-12)

    def test_elbow_bend(self):
        ch = planar_two_link()
        pos, _ = forward_kinematics(ch, [0.0, np.pi / 2])
        assert np.allclose(pos, [1.0, 1.0, 0.0], atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            forward_kinematics(planar_two_link(), [0.0])

    def test_joint_limit_violation(self):
        ch = KinematicChain(np.array([1.0]), ("z",), np.array([[-1.0, 1.0]]),
                            Transform.identity())
        with pytest.raises(JointLimitError):
            forward_kinematics(ch, [1.5])

    def test_joint_at_limit_is_valid(self):
        ch = KinematicChain(np.array([1.0]), ("z",), np.array([[-1.0, 1.0]]),
                            Transform.identity())
        forward_kinematics(ch, [1.0])
        jacobian(ch, [1.0])

    def test_mount_composition(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            base = random_chain(rng)
            ident = KinematicChain(base.link_lengths, base.link_axes,
                                   base.joint_limits, Transform.identity())
            q = base.joint_limits[:, 0] + rng.random(base.n_joints) * (
                base.joint_limits[:, 1] - base.joint_limits[:, 0])
            p_mounted, r_mounted = forward_kinematics(base, q)
            p_ident, r_ident = forward_kinematics(ident, q)
            assert np.allclose(p_mounted, base.mount.apply(p_ident), atol=1e-12)
            assert np.allclose(r_mounted, base.mount.rotation @ r_ident,
                               atol=1e-12)


class TestJacobian:
    def test_analytic_example_matches_fd_oracle(self):
        # frozen from the central-difference oracle at q=(0, pi/2)
        ch = planar_two_link()
        q = [0.0, np.pi / 2]
        expected_xy = np.array([[-1.0, -1.0], [1.0, 0.0]])
        assert np.allclose(fd_jacobian(ch, q)[:2], expected_xy, atol=1e-9)
        assert np.allclose(jacobian(ch, q)[:2], expected_xy, atol=1e-12)

    def test_fd_oracle_1000_random_chains(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(1000):
            ch = random_chain(rng)
            lo, hi = ch.joint_limits[:, 0], ch.joint_limits[:, 1]
            q = lo + rng.random(ch.n_joints) * (hi - lo)
            diff = np.max(np.abs(jacobian(ch, q) - fd_jacobian(ch, q)))
            worst = max(worst, diff)
        assert worst < 1e-6

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            ch = random_chain(rng)
            lo, hi = ch.joint_limits[:, 0], ch.joint_limits[:, 1]
            qs = lo + rng.random((64, ch.n_joints)) * (hi - lo)
            pos = fk_batch(ch, qs)
            ws = manipulability_w_batch(ch, qs)
            for i in range(64):
                p, _ = forward_kinematics(ch, qs[i])
                assert np.allclose(pos[i], p, atol=1e-12)
                assert np.isclose(ws[i], manipulability(ch, qs[i]).w,
                                  rtol=1e-12, atol=1e-15)


class TestManipulability:
    def test_two_link_formula(self):
        for l1, l2 in [(1.0, 1.0), (0.7, 0.3), (0.5, 0.9)]:
            ch = planar_two_link(l1, l2)
            rng = np.random.default_rng(1)
            for _ in range(50):
                q = rng.uniform(-np.pi, np.pi, 2)
                w = manipulability(ch, q).w
                assert abs(w - l1 * l2 * abs(np.sin(q[1]))) < 1e-9

    def test_unit_links_right_angle(self):
        assert abs(manipulability(planar_two_link(), [0.3, np.pi / 2]).w - 1.0) < 1e-9

    def test_singular_full_extension(self):
        m = manipulability(planar_two_link(), [0.4, 0.0])
        assert m.w == 0.0
        assert m.semi_axes[-1] == 0.0

    def test_w_nonnegative_and_zero_iff_rank_drop(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            ch = random_chain(rng)
            lo, hi = ch.joint_limits[:, 0], ch.joint_limits[:, 1]
            q = lo + rng.random(ch.n_joints) * (hi - lo)
            m = manipulability(ch, q)
            assert m.w >= 0.0
            s = np.linalg.svd(jacobian(ch, q), compute_uv=False)
            rank = int(np.sum(s > 1e-9))
            assert (m.w == 0.0) == (rank < ch.task_rank)

    def test_semi_axes_sorted_descending(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            ch = random_chain(rng)
            lo, hi = ch.joint_limits[:, 0], ch.joint_limits[:, 1]
            q = lo + rng.random(ch.n_joints) * (hi - lo)
            ax = manipulability(ch, q).semi_axes
            assert np.all(np.diff(ax) <= 1e-12)

    def test_invariance_under_base_rotation(self):
        rng = np.random.default_rng(4)
        base = planar_two_link(0.8, 0.5)
        for _ in range(50):
            ang = rng.uniform(-np.pi, np.pi, 3)
            rot = rot_z(ang[0]) @ rot_y(ang[1]) @ rot_z(ang[2])
            moved = KinematicChain(base.link_lengths, base.link_axes,
                                   base.joint_limits,
                                   Transform(rot, rng.uniform(-1, 1, 3)))
            q = rng.uniform(-np.pi, np.pi, 2)
            m0 = manipulability(base, q)
            m1 = manipulability(moved, q)
            assert np.allclose(np.sort(m0.semi_axes), np.sort(m1.semi_axes),
                               atol=1e-9)
            assert abs(m0.w - m1.w) < 1e-9


class TestReachDistance:
    def test_equal_links_reach_origin(self):
        assert reach_distance(planar_two_link(0.5, 0.5)) == (0.0, 1.0)

    def test_unequal_links_annulus(self):
        # inner radius |l1 - l2| verified by dense joint-space sampling
        ch = planar_two_link(0.7, 0.3)
        r_min, r_max = reach_distance(ch)
        assert np.isclose(r_min, 0.4) and np.isclose(r_max, 1.0)
        qs = np.stack(np.meshgrid(np.linspace(-np.pi, np.pi, 200),
                                  np.linspace(-np.pi, np.pi, 200)),
                      axis=-1).reshape(-1, 2)
        r = np.linalg.norm(fk_batch(ch, qs), axis=1)
        assert r.min() >= r_min - 1e-9
        assert r.max() <= r_max + 1e-9
        assert r.min() < r_min + 1e-2 and r.max() > r_max - 1e-2

    def test_single_link_circle(self):
        ch = KinematicChain(np.array([0.6]), ("z",), FULL.copy(),
                            Transform.identity())
        assert reach_distance(ch) == (0.6, 0.6)


class TestRefine:
    def test_refine_converges_to_reachable_target(self):
        rng = np.random.default_rng(6)
        ch = planar_two_link(0.6, 0.4)
        for _ in range(20):
            q_true = rng.uniform(-np.pi, np.pi, 2)
            target, _ = forward_kinematics(ch, q_true)
            q0 = np.clip(q_true + rng.normal(0, 0.2, 2), -np.pi, np.pi)
            q = refine_to_point(ch, q0, target)
            ee, _ = forward_kinematics(ch, q)
            assert np.linalg.norm(ee - target) < 1e-6
