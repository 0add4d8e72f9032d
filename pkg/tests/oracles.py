"""Independent reference implementations used only by the tests.

Each one is written from the definition, sharing no code with the package.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def forward_elimination_reference(S_sets, O_sets, D_maps, beta):
    """Literal transcription of the Forward Elimination listing.

    ``S_sets[i]``, ``O_sets[i]`` are seed i's sets, ``D_maps[i][j]`` its
    dependents of j. Features are visited in lexicographic order and the
    threshold test is done in exact integer arithmetic.
    """
    beta = Fraction(beta)
    n = len(S_sets)
    S = set()
    for i in range(n):
        S = S | set(S_sets[i])
    S_prime = sorted(S)
    Q = set()
    for j in S_prime:
        if j in Q:
            continue
        o = 0
        s = 0
        for i in range(n):
            if j in O_sets[i]:
                o += 1
            if j in S_sets[i]:
                s += 1
        # o >= beta * s  <=>  o * den >= num * s
        if o * beta.denominator >= beta.numerator * s:
            Dj = set()
            for i in range(n):
                Dj = Dj | set(D_maps[i].get(j, ()))
            S = S - ({j} | Dj)
            Q = Q | ({j} | Dj)
    return S


def exhaustive_min_q(w, b, x, lam, frozen=()):
    """Minimum of f(x') + lam * ||x' - x||^2 over binary x' agreeing with x on ``frozen``."""
    d = len(x)
    free = [k for k in range(d) if k not in set(frozen)]
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(free)):
        cand = list(x)
        for k, v in zip(free, bits):
            cand[k] = v
        f = sum(wi * ci for wi, ci in zip(w, cand)) + b
        cost = sum((ci - xi) ** 2 for ci, xi in zip(cand, x))
        q = f + lam * cost
        if best is None or q < best:
            best = q
    return best


def concordance_auc(scores, labels):
    """P(score of a random positive > score of a random negative), ties count 1/2."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))
