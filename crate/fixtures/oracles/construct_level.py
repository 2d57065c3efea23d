"""Hand-built 5 subject x 6 item table and its per-item metrics, computed cell by cell."""
import json
import math

# item: (kind, k or (lo, hi))
items = {
    "polviews": ("ordinal", 7),
    "partyid": ("nominal", 8),
    "race": ("nominal", 3),
    "sex": ("nominal", 2),
    "age": ("numeric", (18, 89)),
    "childs": ("numeric", (0, 8)),
}
# subject -> item -> (phase1, phase2, predicted)
table = {
    "s1": {"polviews": (1, 1, 2), "partyid": (0, 0, 0), "race": (0, 0, 0), "sex": (1, 1, 1), "age": (34, 35, 40), "childs": (2, 2, 1)},
    "s2": {"polviews": (5, 4, 5), "partyid": (6, 6, 5), "race": (0, 0, 1), "sex": (0, 0, 0), "age": (58, 58, 50), "childs": (3, 3, 3)},
    "s3": {"polviews": (3, 3, 3), "partyid": (3, 2, 3), "race": (1, 1, 1), "sex": (1, 1, 0), "age": (27, 28, 30), "childs": (0, 1, 0)},
    "s4": {"polviews": (0, 0, 1), "partyid": (1, 1, 1), "race": (2, 2, 2), "sex": (0, 0, 0), "age": (45, 45, 45), "childs": (1, 1, 2)},
    "s5": {"polviews": (6, 6, 6), "partyid": (7, 6, 6), "race": (0, 0, 0), "sex": (1, 1, 1), "age": (71, 70, 65), "childs": (4, 4, 4)},
}


def triples(item, t, p):
    kind, dom = items[item]
    if kind == "nominal":
        return [((o == t) * 1.0, (o == p) * 1.0, 1.0 / dom) for o in range(dom)]
    if kind == "ordinal":
        return [(t / (dom - 1), p / (dom - 1), 1.0)]
    lo, hi = dom
    f = lambda v: min(1.0, max(0.0, (v - lo) / (hi - lo)))
    return [(f(t), f(p), 1.0)]


def wcorr(ts):
    w = sum(x[2] for x in ts)
    mx = sum(x[2] * x[0] for x in ts) / w
    my = sum(x[2] * x[1] for x in ts) / w
    sxy = sum(x[2] * (x[0] - mx) * (x[1] - my) for x in ts)
    sxx = sum(x[2] * (x[0] - mx) ** 2 for x in ts)
    syy = sum(x[2] * (x[1] - my) ** 2 for x in ts)
    return sxy / math.sqrt(sxx * syy)


rows = []
for item, (kind, _) in items.items():
    pred = [triples(item, table[s][item][0], table[s][item][2]) for s in table]
    retest = [triples(item, table[s][item][0], table[s][item][1]) for s in table]
    if kind == "numeric":
        raw = sum(abs(a - b) for ts in pred for a, b, _ in ts) / len(pred)
        cons = sum(abs(a - b) for ts in retest for a, b, _ in ts) / len(retest)
        norm = None
    else:
        raw = sum(table[s][item][0] == table[s][item][2] for s in table) / len(table)
        cons = sum(table[s][item][0] == table[s][item][1] for s in table) / len(table)
        norm = raw / cons
    r = wcorr([x for ts in pred for x in ts])
    rc = wcorr([x for ts in retest for x in ts])
    rows.append({"item": item, "construct": "gss_num" if kind == "numeric" else "gss_cat", "n_subjects": 5,
                 "raw": raw, "consistency": cons, "normalized": norm, "correlation": r,
                 "consistency_correlation": rc, "normalized_correlation": r / rc})

json.dump({"table": table, "rows": rows}, open("fixtures/construct_level.json", "w"), indent=1)
