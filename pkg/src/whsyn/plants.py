"""Bundled example plants and a nominal LQR design for comparison.

``pendulum_surrogate`` is a made-up linearized rotary-pendulum-like model,
not identified from any rig.  Its performance channel weights the pendulum
angle, its rate and the arm rate; the disturbance enters angle and rate.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sl

from .lifting import Plant

PENDULUM_TS = 0.005


def discretize(Ac, Bc, Ts: float):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    Bc = np.asarray(Bc, dtype=float).reshape(Ac.shape[0], -1)
    n, m = Bc.shape
    M = sl.expm(np.block([[Ac, Bc], [np.zeros((m, n + m))]]) * Ts)
    return M[:n, :n], M[:n, n:]


def pendulum_surrogate(Ts: float = PENDULUM_TS) -> Plant:
    """States: pendulum angle (rad), its rate, arm rate.  One input (motor voltage)."""
    Ac = np.array([[0.0, 1.0, 0.0],
                   [60.0, -0.5, 12.0],
                   [0.0, 0.0, -15.0]])
    Bc = np.array([[0.0], [-30.0], [40.0]])
    A, B = discretize(Ac, Bc, Ts)
    return Plant(A=A, B=B, Bw=[[1.0], [1.0], [0.0]], C=[[1.0, 0.25, 0.1]], D=0.0, Dw=0.0)


def double_integrator(Ts: float = 0.1) -> Plant:
    A = np.array([[1.0, Ts], [0.0, 1.0]])
    B = np.array([[Ts * Ts / 2], [Ts]])
    return Plant(A=A, B=B, Bw=[[0.0], [1.0]], C=[[1.0, 0.0], [0.0, 0.0]], D=[[0.0], [0.1]], Dw=0.0)


def scalar_unstable(a: float = 1.2) -> Plant:
    return Plant(A=a, B=1.0, Bw=1.0, C=[[1.0], [0.0]], D=[[0.0], [0.1]], Dw=0.0)


PLANTS = {
    "pendulum_surrogate": pendulum_surrogate,
    "double_integrator": double_integrator,
    "scalar_unstable": scalar_unstable,
}


def lqr_gain(plant: Plant, Q=None, R=None) -> np.ndarray:
    """Infinite-horizon LQR on the one-step-delayed model, as ``u_c = K [x; u]``.

    Designed for the nominal case (every deadline hit).
    """
    n, m = plant.n, plant.m
    Aa = np.block([[plant.A, plant.B], [np.zeros((m, n + m))]])
    Ba = np.vstack([np.zeros((n, m)), np.eye(m)])
    Q = np.eye(n + m) if Q is None else np.asarray(Q, dtype=float)
    R = 0.01 * np.eye(m) if R is None else np.atleast_2d(R)
    P = sl.solve_discrete_are(Aa, Ba, Q, R)
    return -np.linalg.solve(R + Ba.T @ P @ Ba, Ba.T @ P @ Aa)


def pendulum_lqr(plant: Plant = None) -> np.ndarray:
    """Nominal LQR for the surrogate, weighting the angle most."""
    return lqr_gain(plant or pendulum_surrogate(), Q=np.diag([10.0, 1.0, 0.1, 0.01]))
