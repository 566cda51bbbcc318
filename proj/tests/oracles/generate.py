"""Regenerates tests/data/oracle_series.csv and tests/data/oracle_values.json.

Reference values come from statsmodels / arch (ADF, KPSS, PP, BDS, exact
ARMA likelihood) and from direct numpy transcriptions of the textbook
formulas (Newey-West, Tsay F, Pena-Rodriguez). The C++ suite only reads the
pinned outputs; rerun this script after changing the inputs.
"""

import json
import pathlib

import numpy as np
from arch.unitroot import PhillipsPerron
from statsmodels.tsa.statespace.sarimax import SARIMAX
from statsmodels.tsa.stattools import adfuller, bds, kpss

HERE = pathlib.Path(__file__).resolve().parent
DATA = HERE.parent / "data"
N = 600


def series():
    rng = np.random.default_rng(20240531)
    e = rng.standard_normal((N, 6))
    wn = e[:, 0]
    ar1 = np.zeros(N)
    for t in range(1, N):
        ar1[t] = 0.5 * ar1[t - 1] + e[t, 1]
    rw = np.cumsum(e[:, 2])
    # ARMAX(1,1): (1 - 0.6L)(y - 1.3x) = 0.4 + (1 + 0.3L)e
    x = np.zeros(N)
    for t in range(1, N):
        x[t] = 0.7 * x[t - 1] + e[t, 3]
    u = np.zeros(N)
    for t in range(1, N):
        u[t] = 0.4 + 0.6 * u[t - 1] + 0.8 * e[t, 4] + 0.3 * 0.8 * e[t - 1, 4]
    y = 1.3 * x + u
    # ARCH(1) for the squared-series portmanteau
    arch = np.zeros(N)
    for t in range(1, N):
        arch[t] = np.sqrt(0.2 + 0.7 * arch[t - 1] ** 2) * e[t, 5]
    return {"wn": wn, "ar1": ar1, "rw": rw, "x": x, "y": y, "arch": arch}


def nw_lrv(u, m):
    u = u - u.mean()
    n = len(u)
    g = [u[j:] @ u[: n - j] / n for j in range(m + 1)]
    return g[0] + 2 * sum((1 - j / (m + 1)) * g[j] for j in range(1, m + 1))


def nw_bandwidth(u):
    u = u - u.mean()
    n = len(u)
    nlag = int(np.floor(4 * (n / 100) ** (2 / 9)))
    g = [u[j:] @ u[: n - j] / n for j in range(nlag + 1)]
    s0 = g[0] + 2 * sum(g[1:])
    s1 = 2 * sum(j * g[j] for j in range(1, nlag + 1))
    gamma = 1.1447 * ((s1 / s0) ** 2) ** (1 / 3)
    return int(np.floor(gamma * n ** (1 / 3)))


def tsay_f(x, p):
    # two-stage form: residualize the cross-products, then regress the AR residuals on them
    n = len(x) - p
    lags = np.column_stack([np.ones(n)] + [x[p - k : len(x) - k] for k in range(1, p + 1)])
    y = x[p:]
    e = y - lags @ np.linalg.lstsq(lags, y, rcond=None)[0]
    cross = [lags[:, i] * lags[:, j] for i in range(1, p + 1) for j in range(i, p + 1)]
    Z = np.column_stack(cross)
    Zr = Z - lags @ np.linalg.lstsq(lags, Z, rcond=None)[0]
    eps = e - Zr @ np.linalg.lstsq(Zr, e, rcond=None)[0]
    M = Z.shape[1]
    return ((e @ e - eps @ eps) / M) / ((eps @ eps) / (n - p - M - 1))


def pena_rodriguez(x, m):
    z = (x - x.mean()) ** 2
    z = z - z.mean()
    n = len(z)
    g = np.array([z[j:] @ z[: n - j] / n for j in range(m + 1)])
    r = g / g[0]
    R = np.array([[r[abs(i - j)] for j in range(m + 1)] for i in range(m + 1)])
    return n * (1 - np.linalg.det(R) ** (1 / m))


def armax_loglik(y, x, p, q, params):
    mod = SARIMAX(y, exog=x, order=(p, 0, q), trend="c")
    return float(mod.loglike(np.array(params)))


def main():
    s = series()
    DATA.mkdir(exist_ok=True)
    with open(DATA / "oracle_series.csv", "w") as f:
        names = list(s)
        f.write(",".join(names) + "\n")
        for t in range(N):
            f.write(",".join(repr(float(s[k][t])) for k in names) + "\n")

    out = {}
    for name in ("wn", "ar1", "rw", "y"):
        x = s[name]
        adf = adfuller(x, maxlag=8, regression="c", autolag="BIC")
        out[f"adf_{name}"] = {"stat": adf[0], "lag": int(adf[2])}
        out[f"kpss_{name}"] = float(kpss(x, regression="c", nlags=8)[0])
        out[f"pp_{name}"] = float(PhillipsPerron(x, lags=8, trend="c", test_type="tau").stat)
        out[f"lrv8_{name}"] = nw_lrv(x, 8)
        out[f"nwbw_{name}"] = nw_bandwidth(x)
        out[f"tsay3_{name}"] = tsay_f(x, 3)
    for name in ("wn", "ar1", "arch"):
        out[f"bds6_{name}"] = float(np.atleast_1d(bds(s[name], max_dim=6, distance=1.5)[0])[-1])
        out[f"pr10_{name}"] = pena_rodriguez(s[name], 10)
    y, x = s["y"][:300], s["x"][:300]
    # SARIMAX params: intercept, exog, ar..., ma..., sigma2
    cases = {
        "armax11": (1, 1, [0.4, 1.3, 0.6, 0.3, 0.64]),
        "armax21": (2, 1, [0.1, 1.2, 0.5, 0.1, -0.2, 0.7]),
        "armax02": (0, 2, [1.0, 1.25, 0.4, 0.2, 0.9]),
        "armax30": (3, 0, [0.2, 1.3, 0.5, 0.1, -0.1, 0.6]),
    }
    for key, (p, q, params) in cases.items():
        out[key] = {"p": p, "q": q, "params": params, "loglik": armax_loglik(y, x, p, q, params)}
    with open(DATA / "oracle_values.json", "w") as f:
        json.dump(out, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
