#!/usr/bin/env python3
"""Reference values for the rope simulator tests.

Two independent checks back the relaxation code:
  1. the closed-form catenary for a rope pinned at both ends, and
  2. a scipy minimization of the *same* discrete energy the C++ relax uses,
     written separately here so an agreement between the two C++-side numbers
     can't come from a shared bug.
The numbers frozen into tests/test_sim.cpp came from this script.
"""
import numpy as np
from scipy.optimize import brentq, minimize

# ---------------------------------------------------------------- catenary
# Rope of arc length S pinned at (0,0) and (span,0); y(x) = a cosh(x/a) + c.
# Arc length: S = 2 a sinh(span / 2a); mid sag d = a (cosh(span/2a) - 1).
S = 1.0
SPAN = 0.8


def arc(a):
    return 2.0 * a * np.sinh(SPAN / (2.0 * a)) - S


a = brentq(arc, 0.05, 5.0, xtol=1e-15)
sag = a * (np.cosh(SPAN / (2.0 * a)) - 1.0)
print(f"catenary parameter a = {a!r}")
print(f"analytic mid-span sag = {sag!r}  (span {SPAN}, length {S})")

# ------------------------------------------------- discrete chain equilibrium
# Same discretization as the C++ model: N nodes, stretch energy
# 0.5*k*rest*eps^2 per segment, bend energy B*(phi)^2/(2*lbar) per interior
# node, gravity rho*g*z with lumped node masses.
N = 51
REST = S / (N - 1)
K_STRETCH = 100.0
B_BEND = 1e-7
RHO = 0.02
G = 9.81


def energy(flat):
    p = flat.reshape(N, 2)  # planar (x, z) suffices for this scene
    e = 0.0
    d = np.diff(p, axis=0)
    lens = np.linalg.norm(d, axis=1)
    eps = (lens - REST) / REST
    e += 0.5 * K_STRETCH * REST * np.sum(eps**2)
    u = d / lens[:, None]
    dots = np.clip(np.sum(u[:-1] * u[1:], axis=1), -1.0, 1.0)
    crossz = u[:-1, 0] * u[1:, 1] - u[:-1, 1] * u[1:, 0]
    phi = np.arctan2(np.abs(crossz), dots)
    e += B_BEND * np.sum(phi**2) / (2.0 * REST)
    mass = np.full(N, RHO * REST)
    mass[0] = mass[-1] = RHO * REST / 2.0
    e += G * np.sum(mass * p[:, 1])
    return e


x0 = np.zeros((N, 2))
x0[:, 0] = np.linspace(0.0, SPAN, N)
x0[:, 1] = -0.3 * np.sin(np.pi * x0[:, 0] / SPAN)  # start near the hang

pins = [0, N - 1]
free = [i for i in range(N) if i not in pins]


def pack(pfree):
    p = x0.copy()
    p[free] = pfree.reshape(len(free), 2)
    return p.reshape(-1)


res = minimize(lambda v: energy(pack(v)), x0[free].reshape(-1), method="L-BFGS-B",
               options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-12})
p = pack(res.x).reshape(N, 2)
mid = p[N // 2]
print(f"discrete chain mid node z = {mid[1]!r}  (x = {mid[0]!r})")
print(f"discrete sag / analytic sag = {(-mid[1]) / sag!r}")
seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
print(f"segment strain max = {np.max(np.abs(seg - REST) / REST)!r}")

# -------------------------------------------- friction / wedge arithmetic
MU = 0.4
W = RHO * G * S
print(f"rope weight (1 m) = {W!r} N")
print(f"grip force for static friction hold of full weight, two pads: {W / (2 * MU)!r} N")
# While the pads slide axially along the rope, kinetic friction acts along
# the slip direction, so the static lateral/vertical margin collapses; a
# vertical-jaw grip then cannot support the rope's weight at any grip force.
# Wedge lever: with the pad hinged at the groove bottom and the commanded
# force referenced at the tip frame origin, contact at height y* gets
# N ~ F * (y_ref / y*), y* = (r - delta)/sin(theta/2) -> N grows with theta.
for th in (20.0, 35.0, 50.0):
    print(f"sin(theta/2) at {th} deg = {np.sin(np.radians(th / 2.0))!r}")
print(f"N(50)/N(20) lever-model prediction = "
      f"{np.sin(np.radians(25.0)) / np.sin(np.radians(10.0))!r}")
