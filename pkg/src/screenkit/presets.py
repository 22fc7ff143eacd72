"""Small named instances used across tests, docs, and the CLI.

Each builder returns fresh objects, so callers can mutate nothing shared.
"""
from __future__ import annotations

import numpy as np

from .applications import BundleInstance, CompetitiveParams, \
    make_application_instance
from .model import (CostlySpec, JointDistribution, Mechanism, Menu,
                    ProductiveSpec, ScreeningInstance)


def example1_instance(kappa: float = 2.5) -> ScreeningInstance:
    """Binary-type seller whose payoff rewards serving the low type.

    u = theta * x against v = kappa (1/2 - theta) x. For kappa > 2 the
    surplus ranking flips across allocations, the relaxed optimum assigns
    the good only to the low type, and an upward incentive constraint
    binds. The costly component is a stub with a single free instrument.
    """
    theta_a = np.array([0.0, 1.0])
    x_grid = np.array([0.0, 1.0])
    u_a = np.array([[0.0, 0.0], [0.0, 1.0]])
    v_a = np.array([[0.0, 0.0], [kappa / 2, -kappa / 2]])
    costly = CostlySpec(np.array([[0.0]]), np.array([0.0]), 0,
                        np.array([[0.0]]), np.array([[0.0]]))
    dist = JointDistribution(((0, 0), (1, 0)), (0.5, 0.5))
    return ScreeningInstance(ProductiveSpec(theta_a, x_grid, u_a, v_a),
                             costly, dist)


def example2_instance(kappa: float = 2.5) -> ScreeningInstance:
    """The binary seller plus a free-for-the-top-type costly instrument.

    Instrument tastes are comonotone with the productive type: the low type
    values the instrument at -1, the high type at 0. Productive-only
    screening earns nothing here, while a menu that pays the high type to
    take the instrument recovers an eighth.
    """
    base = example1_instance(kappa)
    theta_b = np.array([[-1.0], [0.0]])
    y_set = np.array([0.0, 1.0])
    u_b = np.outer(y_set, theta_b[:, 0])
    v_b = np.zeros_like(u_b)
    dist = JointDistribution(((0, 0), (1, 1)), (0.5, 0.5))
    return ScreeningInstance(base.productive,
                             CostlySpec(theta_b, y_set, 0, u_b, v_b), dist)


def example2_menu() -> Menu:
    """Sell the good for free, or pay one for taking the instrument."""
    return Menu(((1, 0, 0.0), (0, 1, -1.0)))


def example2_mechanism() -> Mechanism:
    """The menu written as a direct mechanism along the comonotone path."""
    return Mechanism((1, 0), (0, 1), (0.0, -1.0))


def example3_instance() -> ScreeningInstance:
    """Two-good monopoly where the costly item still sells in a bundle."""
    return make_application_instance("costly_production")


def example3_menu() -> Menu:
    """Bundle at three, or the cheap item alone at two."""
    return Menu(((1, 1, 3.0), (1, 0, 2.0)))


def competitive_default_params() -> CompetitiveParams:
    return CompetitiveParams()


def bundling_default(zero_cost: bool = False) -> BundleInstance:
    """Two goods, two types, convex quality cost on a five-point grid."""
    values = np.array([
        [0.0, 3.0, 2.0, 5.0],
        [0.0, 5.0, 4.0, 8.0],
    ])
    grid = np.linspace(0.0, 1.0, 5)
    cost = np.zeros(5) if zero_cost else np.array([0.0, 0.1, 0.3, 0.6, 1.0])
    return BundleInstance(2, values, np.array([0.5, 0.5]), grid, cost)
