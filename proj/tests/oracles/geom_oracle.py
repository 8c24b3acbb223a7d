#!/usr/bin/env python3
"""Reference values for the geom tests, computed with scipy's rotation code.

Run from anywhere; prints C++-ready literals. The numbers frozen into
tests/test_geom.cpp came from this script.
"""
import numpy as np
from scipy.spatial.transform import Rotation as R

np.set_printoptions(precision=17, floatmode="fixed")


def pose_mat(p, q_wxyz):
    T = np.eye(4)
    q = np.array([q_wxyz[1], q_wxyz[2], q_wxyz[3], q_wxyz[0]])  # scipy xyzw
    T[:3, :3] = R.from_quat(q).as_matrix()
    T[:3, 3] = p
    return T


def print_pose(tag, T):
    q = R.from_matrix(T[:3, :3]).as_quat()  # xyzw
    if q[3] < 0:
        q = -q
    print(f"{tag} position  = {T[:3,3].tolist()}")
    print(f"{tag} quat wxyz = [{q[3]!r}, {q[0]!r}, {q[1]!r}, {q[2]!r}]")


# Case 1: compose two fixed poses.
a = pose_mat([0.1, -0.2, 0.3], [0.9238795325112867, 0.3826834323650898, 0.0, 0.0])  # 45 deg about X
b = pose_mat([-0.05, 0.07, 0.11], [0.8660254037844387, 0.0, 0.5, 0.0])              # 60 deg about Y
print_pose("compose(a,b)", a @ b)

# Case 2: pose_error(desired, current) with fixed rotations.
# Intrinsic Z-Y-X (matches Rz*Ry*Rx quaternion products in the test).
qd = R.from_euler("ZYX", [0.3, -0.2, 0.5])
qc = R.from_euler("ZYX", [-0.1, 0.4, 0.2])
rel = qd * qc.inv()
print("pose_error rotational =", rel.as_rotvec().tolist())
print("pose_error translational = desired.p - current.p (trivial)")

# Case 3: log of a quaternion just below the pi boundary.
q = R.from_rotvec(np.array([0.0, 0.0, 1.0]) * (np.pi - 1e-7))
print("near-pi rotvec =", q.as_rotvec().tolist())
