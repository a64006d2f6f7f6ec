"""Slow, obviously-correct reference computations used to check the library."""

import itertools
import math

from trapdoor.distributions import Hard, Key, TrapdoorParams, pmf

# Filled by the acceptance tests, printed by conftest at the end of the run.
ACCEPTANCE_LINES = []


def random_params(rng, d, w=None):
    if w is None:
        w = float(rng.uniform(0.01, 0.99))
    return TrapdoorParams.of(w, rng.random(d))


def all_atoms(d):
    for bits in itertools.product((0, 1), repeat=d):
        yield Key(bits)
    for j in range(1, d + 1):
        yield Hard(j)
        yield Hard(-j)


def tv_by_atoms(a, b):
    """Half-sum of pmf gaps, one pmf() call per atom."""
    return 0.5 * math.fsum(abs(pmf(a, x) - pmf(b, x)) for x in all_atoms(a.d))


def bern_product(p, bits):
    out = 1.0
    for pj, b in zip(p, bits):
        out *= pj if b else 1.0 - pj
    return out


def tv_product_by_atoms(p1, p2):
    return 0.5 * math.fsum(
        abs(bern_product(p1, bits) - bern_product(p2, bits))
        for bits in itertools.product((0, 1), repeat=len(p1))
    )


def pmf_formula(w, p, atom):
    """Trapdoor pmf straight from its definition; accepts the closed endpoints w in {0, 1}."""
    d = len(p)
    if isinstance(atom, Key):
        return w * bern_product(p, atom.bits)
    pj = p[abs(atom.j) - 1]
    return (1 - w) / d * (pj if atom.j > 0 else 1 - pj)


def enumerated_lift_law(p, w):
    """Exact law of one lifted sample: every input row times every (coin, coordinate) branch.

    Runs the library's deterministic lift on each branch and accumulates mass
    per canonical atom index.
    """
    import numpy as np

    from trapdoor.distributions import atom_indices, support_size
    from trapdoor.reductions import LiftRandomness, ProductDataset, apply_lift

    d = len(p)
    rows = list(itertools.product((0, 1), repeat=d))
    x = ProductDataset(d, rows)
    row_mass = np.array([bern_product(p, r) for r in rows])
    law = np.zeros(support_size(d))
    branches = [(True, 1, w)] + [(False, j, (1 - w) / d) for j in range(1, d + 1)]
    for keep, coord, mass in branches:
        fixed = LiftRandomness(np.full(len(rows), keep), np.full(len(rows), coord))
        np.add.at(law, atom_indices(apply_lift(x, fixed)), mass * row_mass)
    return law
