"""Independent reference implementations used only by the tests.

Each one is written from the rule's plain statement, without sharing code
with the package.
"""
from fractions import Fraction

import numpy as np


def finalize_oracle(label_lists):
    """Brute-force vote rule over integer label codes.

    Returns ``None`` for no majority, else a list of (code, importance).
    """
    scored = []
    for code in range(8):
        voters = [lst for lst in label_lists if code in lst]
        if len(voters) >= 2:
            scored.append((code, sum(7 - lst.index(code) for lst in voters)))
    if not scored:
        return None
    out = []
    while scored:
        best = scored[0]
        for cand in scored[1:]:
            if cand[1] > best[1] or (cand[1] == best[1] and cand[0] < best[0]):
                best = cand
        out.append(best)
        scored.remove(best)
    return out


def fleiss_kappa_oracle(counts):
    """Textbook Fleiss' kappa in exact rational arithmetic."""
    counts = [[int(c) for c in row] for row in counts]
    N = len(counts)
    n = sum(counts[0])
    k = len(counts[0])
    p_j = [Fraction(sum(row[j] for row in counts), N * n) for j in range(k)]
    P_i = [Fraction(sum(c * (c - 1) for c in row), n * (n - 1)) for row in counts]
    P_bar = sum(P_i, Fraction(0)) / N
    P_e = sum((p * p for p in p_j), Fraction(0))
    return float((P_bar - P_e) / (1 - P_e))


def mask_oracle(kind, speakers, window=None):
    """Evaluate the visibility predicate cell by cell."""
    n = len(speakers)
    m = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if kind == "global":
                m[i, j] = True
            elif kind == "local":
                m[i, j] = abs(i - j) <= window
            elif kind == "intra":
                m[i, j] = speakers[i] == speakers[j]
            elif kind == "inter":
                m[i, j] = i == j or speakers[i] != speakers[j]
    return m


def weighted_f1_oracle(gold, pred, n_classes=7):
    from sklearn.metrics import f1_score

    return float(f1_score(gold, pred, labels=list(range(n_classes)), average="weighted", zero_division=0))


def shift_inertia_oracle(dialogues):
    """(x_shift, x_inertia, in_shift, in_inertia) from lists of (speaker, label) pairs."""
    xs = xi = ins = ini = 0
    for utts in dialogues:
        for (s0, l0), (s1, l1) in zip(utts, utts[1:]):
            same = l0 == l1
            if s0 == s1:
                ini += same
                ins += not same
            else:
                xi += same
                xs += not same
    return xs, xi, ins, ini
