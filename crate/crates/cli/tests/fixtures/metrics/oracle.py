#!/usr/bin/env python3
"""Reference MOTA / IDF1 / HOTA for the fixtures in this directory.

Written straight from the metric definitions with brute-force matchings, so
it shares no code with the Rust evaluator. Regenerate the frozen values with

    python3 oracle.py > expected.txt
"""

import itertools
import math
import os
import sys

IOU_MIN = 0.5
EPS = sys.float_info.epsilon
ALPHAS = [0.05 * i for i in range(1, 20)]


def load(path):
    frames = {}
    with open(path) as f:
        for line in f:
            v = line.strip().split(",")
            if len(v) < 6:
                continue
            frame, oid = int(v[0]), int(v[1])
            l, t, w, h = map(float, v[2:6])
            frames.setdefault(frame, []).append((oid, (l, t, w, h)))
    return frames


def iou(a, b):
    ax1, ay1, bx1, by1 = a[0] + a[2], a[1] + a[3], b[0] + b[2], b[1] + b[3]
    iw = max(0.0, min(ax1, bx1) - max(a[0], b[0]))
    ih = max(0.0, min(ay1, by1) - max(a[1], b[1]))
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def best_assignment(n_rows, n_cols, weight):
    """Partial injection of rows into columns maximising the summed weight."""
    best, best_pairs = -math.inf, []
    cols = list(range(n_cols))
    for k in range(min(n_rows, n_cols), -1, -1):
        for rows in itertools.combinations(range(n_rows), k):
            for perm in itertools.permutations(cols, k):
                pairs = list(zip(rows, perm))
                total = sum(weight(i, j) for i, j in pairs)
                if total > best + 1e-12:
                    best, best_pairs = total, pairs
    return best_pairs


def clear(gt, pred, n):
    tp = fp = fn = idsw = 0
    last = {}  # gt id -> pred id of its most recent match
    for k in range(1, n + 1):
        g, p = gt.get(k, []), pred.get(k, [])
        if not g or not p:
            fn += len(g)
            fp += len(p)
            continue
        sim = [[iou(gb, pb) for _, pb in p] for _, gb in g]

        def score(i, j):
            if sim[i][j] < IOU_MIN - EPS:
                return 0.0
            cont = 1000.0 if last.get(g[i][0]) == p[j][0] else 0.0
            return cont + sim[i][j]

        pairs = [(i, j) for i, j in best_assignment(len(g), len(p), score) if score(i, j) > EPS]
        for i, j in pairs:
            gid, pid = g[i][0], p[j][0]
            if gid in last and last[gid] != pid:
                idsw += 1
            last[gid] = pid
        tp += len(pairs)
        fn += len(g) - len(pairs)
        fp += len(p) - len(pairs)
    n_gt = sum(len(v) for v in gt.values())
    return {"MOTA": 1.0 - (fn + fp + idsw) / n_gt, "TP": tp, "FP": fp, "FN": fn, "IDs": idsw}


def identity(gt, pred, n):
    gids = sorted({i for v in gt.values() for i, _ in v})
    pids = sorted({i for v in pred.values() for i, _ in v})
    co = {}
    for k in range(1, n + 1):
        for gid, gb in gt.get(k, []):
            for pid, pb in pred.get(k, []):
                if iou(gb, pb) >= IOU_MIN:
                    co[(gid, pid)] = co.get((gid, pid), 0) + 1
    pairs = best_assignment(len(gids), len(pids), lambda i, j: co.get((gids[i], pids[j]), 0))
    idtp = sum(co.get((gids[i], pids[j]), 0) for i, j in pairs)
    n_gt = sum(len(v) for v in gt.values())
    n_pred = sum(len(v) for v in pred.values())
    return {"IDF1": 2 * idtp / (n_gt + n_pred), "IDTP": idtp}


def hota(gt, pred, n):
    gt_count, pred_count, potential = {}, {}, {}
    for k in range(1, n + 1):
        g, p = gt.get(k, []), pred.get(k, [])
        for gid, _ in g:
            gt_count[gid] = gt_count.get(gid, 0) + 1
        for pid, _ in p:
            pred_count[pid] = pred_count.get(pid, 0) + 1
        sim = [[iou(gb, pb) for _, pb in p] for _, gb in g]
        for i, (gid, _) in enumerate(g):
            for j, (pid, _) in enumerate(p):
                denom = sum(sim[i]) + sum(sim[r][j] for r in range(len(g))) - sim[i][j]
                if denom > EPS:
                    potential[(gid, pid)] = potential.get((gid, pid), 0.0) + sim[i][j] / denom

    def alignment(gid, pid):
        pm = potential.get((gid, pid), 0.0)
        return pm / (gt_count[gid] + pred_count[pid] - pm)

    tp = [0] * len(ALPHAS)
    fn = [0] * len(ALPHAS)
    fp = [0] * len(ALPHAS)
    loc = [0.0] * len(ALPHAS)
    matches = [dict() for _ in ALPHAS]
    for k in range(1, n + 1):
        g, p = gt.get(k, []), pred.get(k, [])
        sim = [[iou(gb, pb) for _, pb in p] for _, gb in g]
        pairs = best_assignment(len(g), len(p), lambda i, j: alignment(g[i][0], p[j][0]) * sim[i][j])
        for a, alpha in enumerate(ALPHAS):
            kept = [(i, j) for i, j in pairs if sim[i][j] >= alpha - EPS]
            tp[a] += len(kept)
            fn[a] += len(g) - len(kept)
            fp[a] += len(p) - len(kept)
            for i, j in kept:
                loc[a] += sim[i][j]
                key = (g[i][0], p[j][0])
                matches[a][key] = matches[a].get(key, 0) + 1

    hs, ds, as_, ls = [], [], [], []
    for a in range(len(ALPHAS)):
        ass = sum(m * m / max(1, gt_count[gid] + pred_count[pid] - m) for (gid, pid), m in matches[a].items())
        assa = ass / max(1, tp[a])
        deta = tp[a] / max(1, tp[a] + fn[a] + fp[a])
        hs.append(math.sqrt(deta * assa))
        ds.append(deta)
        as_.append(assa)
        ls.append(max(1e-10, loc[a]) / max(1e-10, tp[a]))
    mean = lambda v: sum(v) / len(v)
    return {"HOTA": mean(hs), "DetA": mean(ds), "AssA": mean(as_), "LocA": mean(ls)}


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    for name in sorted(os.listdir(here)):
        d = os.path.join(here, name)
        if not os.path.isdir(d):
            continue
        gt, pred = load(os.path.join(d, "gt.txt")), load(os.path.join(d, "pred.txt"))
        n = max(gt)
        out = {}
        out.update(clear(gt, pred, n))
        out.update(identity(gt, pred, n))
        out.update(hota(gt, pred, n))
        for key in ["MOTA", "IDF1", "HOTA", "DetA", "AssA", "LocA", "TP", "FP", "FN", "IDs", "IDTP"]:
            print(f"{name} {key} {out[key]!r}")


if __name__ == "__main__":
    main()
