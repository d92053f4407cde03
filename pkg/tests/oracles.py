"""Brute-force reference implementations, written without the package's code paths."""
import itertools
import math


def all_vectors(k):
    return list(itertools.product((0, 1), repeat=k))


def likelihood(a, pi):
    out = 1.0
    for bit, p in zip(a, pi):
        out *= p if bit else 1.0 - p
    return out


def gdap(pi, g, n_classes):
    """g: callable tuple -> class id."""
    scores = [0.0] * n_classes
    for a in all_vectors(len(pi)):
        scores[g(a)] += likelihood(a, pi)
    best = max(range(n_classes), key=lambda c: (scores[c], -c))
    return best, scores


def ml_vector(pi):
    return max(all_vectors(len(pi)), key=lambda a: likelihood(a, pi))


def nn(pi, table):
    """table: dict vector -> class.  L2-normalised nearest candidate, ties lexicographic."""
    pn = math.sqrt(sum(p * p for p in pi))
    best = None
    for a in sorted(table):
        an = math.sqrt(sum(a))
        if an == 0:
            continue
        d = sum((x / an - p / pn) ** 2 for x, p in zip(a, pi))
        if best is None or d < best[0]:
            best = (d, table[a])
    return best[1]


def gaussian_logpdf(x, mean, cov):
    import numpy as np

    d = len(x)
    diff = np.asarray(x) - mean
    sign, logdet = np.linalg.slogdet(cov)
    return -0.5 * (d * math.log(2 * math.pi) + logdet + diff @ np.linalg.solve(cov, diff))


def path_log_prob(log_init, log_trans, log_obs, path):
    """log_trans[t] is the matrix used for the transition into frame t (t >= 1)."""
    lp = log_init[path[0]] + log_obs[0][path[0]]
    for t in range(1, len(path)):
        lp += log_trans[t][path[t - 1]][path[t]] + log_obs[t][path[t]]
    return lp


def best_path(log_init, log_trans, log_obs):
    n_classes = len(log_init)
    length = len(log_obs)
    best = None
    for path in itertools.product(range(n_classes), repeat=length):
        lp = path_log_prob(log_init, log_trans, log_obs, path)
        if best is None or lp > best[0]:
            best = (lp, path)
    return best


def entropy_bits(labels):
    n = len(labels)
    counts = {}
    for x in labels:
        counts[x] = counts.get(x, 0) + 1
    return -sum(c / n * math.log2(c / n) for c in counts.values())


def f1_per_class(truth, pred, n_classes):
    out = []
    for c in range(n_classes):
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        out.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return out


def net_forward(params, window, relu=True):
    """Loop-based forward pass; window is a list of T rows of W channels."""
    act = (lambda v: max(v, 0.0)) if relu else math.tanh
    T, W = len(window), len(window[0])
    # maps[w][f][t], starting with one map per channel
    maps = [[[window[t][w] for t in range(T)]] for w in range(W)]
    for layer in range(1, 5):
        wt, b = params[f"conv{layer}_w"], params[f"conv{layer}_b"]
        new = []
        for w in range(W):
            n_in, length = len(maps[w]), len(maps[w][0]) - 4
            chan = []
            for f in range(len(b)):
                row = []
                for t in range(length):
                    s = b[f]
                    for c in range(n_in):
                        for j in range(5):
                            s += wt[f][c][j] * maps[w][c][t + j]
                    row.append(act(s))
                chan.append(row)
            new.append(chan)
        maps = new
    h = [v for w in range(W) for f in maps[w] for v in f]
    for name in ("fc1", "fc2"):
        wt, b = params[f"{name}_w"], params[f"{name}_b"]
        h = [act(b[j] + sum(h[i] * wt[i][j] for i in range(len(h)))) for j in range(len(b))]
    wt, b = params["out_w"], params["out_b"]
    z = [b[j] + sum(h[i] * wt[i][j] for i in range(len(h))) for j in range(len(b))]
    return [1.0 / (1.0 + math.exp(-v)) for v in z]
