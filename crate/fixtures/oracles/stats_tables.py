"""Reference values for the stats module, computed with scipy."""
import json
import math
from scipy import special, stats

out = {}
out["ln_gamma"] = [[x, float(special.gammaln(x))] for x in [0.5, 1.0, 1.5, 2.5, 7.0, 10.3, 100.0, 1576.5]]
out["gamma_p"] = [[a, x, float(special.gammainc(a, x))] for a, x in
                  [(0.5, 0.1), (0.5, 2.0), (1.0, 1.0), (2.5, 3.0), (10.0, 5.0), (10.0, 15.0), (50.0, 60.0), (0.5, 25.0)]]
out["beta_inc"] = [[a, b, x, float(special.betainc(a, b, x))] for a, b, x in
                   [(0.5, 0.5, 0.3), (2.0, 3.0, 0.4), (1.0, 1576.5, 0.001), (5.0, 2.0, 0.9), (1576.5, 1.0, 0.999),
                    (0.5, 10.0, 0.05), (30.0, 40.0, 0.45)]]
out["chi2_sf"] = [[x, k, float(stats.chi2.sf(x, k))] for x, k in
                  [(0.0, 1), (1.0, 1), (3.841458820694124, 1), (20.0, 1), (10.0, 3), (50.0, 30), (0.5, 4)]]
out["f_sf"] = [[f, d1, d2, float(stats.f.sf(f, d1, d2))] for f, d1, d2 in
               [(1.0, 1, 10), (4.0, 2, 30), (989.62, 2, 3153), (0.12, 2, 3153), (3.0, 1, 796), (12.0, 3, 40)]]
out["t_two_sided"] = [[t, nu, float(2 * stats.t.sf(abs(t), nu))] for t, nu in
                      [(0.0, 4), (-1.224744871391589, 4), (2.0, 10), (3.5, 2), (1.96, 1000), (5.0, 60)]]
out["norm_cdf"] = [[x, float(stats.norm.cdf(x))] for x in [-8.0, -3.0, -1.0, 0.0, 0.5, 1.96, 4.0]]
out["norm_ppf"] = [[p, float(stats.norm.ppf(p))] for p in [1e-10, 0.001, 0.025, 0.3, 0.5, 0.975, 0.999999]]
sr = stats.studentized_range
pts = [(3, None), (3, 3153), (3, 20), (2, 10), (4, 30), (5, 60), (10, 120), (3, 5)]
out["tukey_q"] = []
for k, df in pts:
    d = 1e12 if df is None else df
    for alpha in (0.05, 0.01):
        q = float(sr.ppf(1 - alpha, k, d if df is not None else 1e6))
        out["tukey_q"].append([alpha, k, df, q])
out["tukey_cdf"] = [[q, k, df, float(sr.cdf(q, k, df))] for q, k, df in [(1.0, 3, 20), (3.5, 3, 20), (2.5, 4, 60), (5.0, 5, 10)]]
json.dump(out, open("fixtures/stats_oracle.json", "w"), indent=1)
print(json.dumps(out["tukey_q"]))
