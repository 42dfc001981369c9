"""Independent reference implementations used as test oracles.

Plain Python loops over scalars, written from the definitions and sharing no
code with the package.
"""
import math


def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def matvec(W, v):
    return [dot(row, v) for row in W]


def fuse(mode, views, mask, Ws=None, a=None, W1=None):
    """views: list of lists, mask: list of bools."""
    if mode == "con":
        x = []
        for v, m in zip(views, mask):
            x += list(v) if m else [0.0] * len(v)
        return [math.tanh(z) for z in matvec(W1, x)], None
    avail = [j for j, m in enumerate(mask) if m]
    P = {j: [math.tanh(z) for z in matvec(Ws[j], views[j])] for j in avail}
    d = len(Ws[0])
    if mode == "max":
        return [max(P[j][i] for j in avail) for i in range(d)], None
    if mode == "avg":
        w = {j: 1.0 / len(avail) for j in avail}
    else:
        s = {j: dot(a, P[j]) for j in avail}
        top = max(s.values())
        e = {j: math.exp(s[j] - top) for j in avail}
        tot = sum(e.values())
        w = {j: e[j] / tot for j in avail}
    p = [sum(w[j] * P[j][i] for j in avail) for i in range(d)]
    alpha = [w.get(j, 0.0) for j in range(len(mask))]
    return p, alpha


def head(p, Wh, Wo, slope=0.01):
    hid = [z if z >= 0 else slope * z for z in matvec(Wh, p)]
    return [1.0 / (1.0 + math.exp(-z)) for z in matvec(Wo, hid)]


def bce(y_hat, y):
    return -sum(t * math.log(s) + (1 - t) * math.log(1 - s) for s, t in zip(y_hat, y))


def grid_counts(pred_rows, gold_rows, n_types):
    """Count tp/fp/fn by visiting every (entity, type) cell."""
    tp = fp = fn = 0
    for pred, gold in zip(pred_rows, gold_rows):
        for t in range(n_types):
            p, g = t in pred, t in gold
            tp += p and g
            fp += p and not g
            fn += g and not p
    return tp, fp, fn


def tfidf(doc, docs):
    n = len(docs)
    out = {}
    for w in set(doc):
        df = sum(1 for d in docs if w in d)
        out[w] = doc.count(w) * (math.log((1 + n) / (1 + df)) + 1)
    return out
