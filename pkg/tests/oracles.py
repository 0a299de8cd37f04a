"""Straight-line scalar reimplementations used as independent oracles.

Everything here trades speed for obviousness: plain Python loops, no
vectorization, no shared code with the package under test.
"""

from __future__ import annotations

import math

import numpy as np


# --- autoencoder forward pass ---------------------------------------------

def corr2d_naive(x, w):
    """Same-padded cross-correlation, loop nest over every output pixel."""
    cin, h, wd = x.shape
    cout, _, f, _ = w.shape
    r = (f - 1) // 2
    y = np.zeros((cout, h, wd))
    for o in range(cout):
        for p in range(h):
            for q in range(wd):
                acc = 0.0
                for i in range(cin):
                    for u in range(f):
                        for v in range(f):
                            pp, qq = p + u - r, q + v - r
                            if 0 <= pp < h and 0 <= qq < wd:
                                acc += w[o, i, u, v] * x[i, pp, qq]
                y[o, p, q] = acc
    return y


def pad_replicate_naive(x, p):
    c, h, w = x.shape
    hp = h + ((-h) % p)
    wp = w + ((-w) % p)
    out = np.zeros((c, hp, wp))
    for ch in range(c):
        for i in range(hp):
            for j in range(wp):
                out[ch, i, j] = x[ch, min(i, h - 1), min(j, w - 1)]
    return out


def maxpool_naive(x, p):
    c, h, w = x.shape
    pooled = np.zeros((c, h // p, w // p))
    switches = np.zeros((c, h // p, w // p), dtype=int)
    for ch in range(c):
        for i in range(h // p):
            for j in range(w // p):
                best, arg = -math.inf, 0
                for u in range(p):
                    for v in range(p):
                        val = x[ch, i * p + u, j * p + v]
                        if val > best:
                            best, arg = val, u * p + v
                pooled[ch, i, j] = best
                switches[ch, i, j] = arg
    return pooled, switches


def unpool_naive(z, switches, p):
    c, hp, wp = z.shape
    out = np.zeros((c, hp * p, wp * p))
    for ch in range(c):
        for i in range(hp):
            for j in range(wp):
                u, v = divmod(switches[ch, i, j], p)
                out[ch, i * p + u, j * p + v] = z[ch, i, j]
    return out


def cae_forward_naive(params, config, image):
    """Encoder/decoder pass mirroring the production architecture."""
    x = image[None] if image.ndim == 2 else image
    p = config.pool_dim
    stack = []  # (prepad_hw, switches) per encoder layer
    for k in range(config.num_layers):
        pre = corr2d_naive(x, params.w_enc[k])
        for ch in range(pre.shape[0]):
            pre[ch] += params.b_enc[k][ch]
        h = np.maximum(pre, 0.0)
        hp = pad_replicate_naive(h, p)
        pooled, switches = maxpool_naive(hp, p)
        stack.append((h.shape[1:], switches))
        x = pooled
    for k in range(config.num_layers - 1, -1, -1):
        prepad_hw, switches = stack[k]
        up = unpool_naive(x, switches, p)
        uc = up[:, :prepad_hw[0], :prepad_hw[1]]
        t = corr2d_naive(uc, params.w_dec[k])
        if k > 0:
            x = np.maximum(t, 0.0)
    logits = t + params.c[:, None, None]
    probs = np.zeros_like(logits)
    for i in range(logits.shape[1]):
        for j in range(logits.shape[2]):
            z = logits[:, i, j]
            e = np.exp(z - z.max())
            probs[:, i, j] = e / e.sum()
    return logits, probs


def masked_loss_naive(probs, labels):
    total, count = 0.0, 0
    for i in range(labels.shape[0]):
        for j in range(labels.shape[1]):
            lab = labels[i, j]
            if lab != 0:
                total += -math.log(probs[lab - 1, i, j])
                count += 1
    return total / count


# --- agreement metrics -----------------------------------------------------

def confusion_naive(a, b, num_classes):
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for x, y in zip(a.ravel(), b.ravel()):
        if x != 0 and y != 0:
            counts[x - 1, y - 1] += 1
    return counts


def kappa_naive(counts):
    total = counts.sum()
    p_o = sum(counts[i, i] for i in range(counts.shape[0])) / total
    p_e = 0.0
    for i in range(counts.shape[0]):
        p_e += counts[i, :].sum() * counts[:, i].sum()
    p_e /= total * total
    if p_e >= 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def jaccard_naive(a, b, class_id):
    inter = union = 0
    for x, y in zip(a.ravel(), b.ravel()):
        xin, yin = x == class_id, y == class_id
        if xin and yin:
            inter += 1
        if xin or yin:
            union += 1
    return inter / union if union else 1.0


def f1_naive(truth, pred, class_id):
    tp = fp = fn = correct = scored = 0
    for t, p in zip(truth.ravel(), pred.ravel()):
        if t == 0:
            continue
        scored += 1
        if t == p:
            correct += 1
        if t == class_id and p == class_id:
            tp += 1
        elif t != class_id and p == class_id:
            fp += 1
        elif t == class_id and p != class_id:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = correct / scored if scored else 0.0
    return f1, precision, recall, accuracy


def consensus_naive(arrays):
    shape = arrays[0].shape
    out = np.zeros(shape, dtype=np.uint8)
    num_classes = int(max(a.max() for a in arrays))
    flatten = [a.ravel() for a in arrays]
    for idx in range(flatten[0].size):
        votes = [0] * (num_classes + 1)
        for arr in flatten:
            votes[arr[idx]] += 1
        best_class, best_votes = 0, 0
        for c in range(1, num_classes + 1):
            if votes[c] > best_votes:
                best_class, best_votes = c, votes[c]
        out.ravel()[idx] = best_class
    return out


# --- rasterization ---------------------------------------------------------

def disc_pixels_naive(path, radius, width, height):
    """Every pixel within Euclidean distance <= radius of any path point."""
    hits = set()
    for y in range(height):
        for x in range(width):
            for px, py in path:
                if (x - px) ** 2 + (y - py) ** 2 <= radius * radius:
                    hits.add((x, y))
                    break
    return hits


def point_in_polygon_naive(x, y, vertices):
    """Even-odd rule with boundary points counted as inside."""
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if abs(cross) < 1e-9:
            if min(x1, x2) - 1e-9 <= x <= max(x1, x2) + 1e-9 and \
               min(y1, y2) - 1e-9 <= y <= max(y1, y2) + 1e-9:
                return True
    inside = False
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def polygon_pixels_naive(vertices, width, height):
    return {
        (x, y)
        for y in range(height)
        for x in range(width)
        if point_in_polygon_naive(float(x), float(y), vertices)
    }
