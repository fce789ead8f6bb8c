"""Reference BRISQUE computation used to produce the frozen fixture values.

Written separately from the C++ code: local moments come from
scipy.ndimage.correlate with the E[x^2] - mu^2 variance form, and the
generalized-Gaussian shape is found with a root finder instead of a lookup
table.

    python3 brisque_oracle.py IMAGE.png MODEL RANGES [FROZEN.json]

With FROZEN.json the result is compared against the recorded values and the
exit status says whether they still match.
"""

import json
import sys

import numpy as np
from PIL import Image
from scipy import ndimage, optimize, special

C = 1.0
VAR_FLOOR = 1e-6
ALPHA_LO, ALPHA_HI = 0.2, 10.0


def load_gray(path):
    img = Image.open(path)
    arr = np.asarray(img.convert("RGB") if img.mode not in ("L", "RGB") else img, dtype=np.float64)
    if arr.ndim == 3:
        arr = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return arr


def gaussian_window():
    ax = np.arange(-3, 4, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * (7.0 / 6.0) ** 2))
    return g / g.sum()


def mscn(img):
    w = gaussian_window()
    mu = ndimage.correlate(img, w, mode="reflect")
    var = ndimage.correlate(img * img, w, mode="reflect") - mu * mu
    sigma = np.sqrt(np.maximum(var, VAR_FLOOR))
    return (img - mu) / (sigma + C)


def rho(alpha):
    return special.gamma(2 / alpha) ** 2 / (special.gamma(1 / alpha) * special.gamma(3 / alpha))


def invert_rho(r):
    if r <= rho(ALPHA_LO):
        return ALPHA_LO
    if r >= rho(ALPHA_HI):
        return ALPHA_HI
    return optimize.brentq(lambda a: rho(a) - r, ALPHA_LO, ALPHA_HI, xtol=1e-12)


def fit_ggd(x):
    x = np.ravel(x)
    var = max(np.mean(x * x), VAR_FLOOR)
    return invert_rho(np.mean(np.abs(x)) ** 2 / var), var


def fit_aggd(x):
    x = np.ravel(x)
    left, right = x[x < 0], x[x > 0]
    lvar = max(np.mean(left * left), VAR_FLOOR) if left.size else VAR_FLOOR
    rvar = max(np.mean(right * right), VAR_FLOOR) if right.size else VAR_FLOOR
    sl, sr = np.sqrt(lvar), np.sqrt(rvar)
    g = sl / sr
    r_hat = np.mean(np.abs(x)) ** 2 / max(np.mean(x * x), VAR_FLOOR)
    big_r = r_hat * (g**3 + 1) * (g + 1) / (g**2 + 1) ** 2
    a = invert_rho(big_r)
    mean = (sr - sl) * special.gamma(2 / a) / special.gamma(1 / a) * np.sqrt(special.gamma(1 / a) / special.gamma(3 / a))
    return a, mean, lvar, rvar


def products(m):
    return [
        m[:, :-1] * m[:, 1:],  # horizontal
        m[:-1, :] * m[1:, :],  # vertical
        m[:-1, :-1] * m[1:, 1:],  # main diagonal
        m[:-1, 1:] * m[1:, :-1],  # anti-diagonal
    ]


def downsample(img):
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    return img[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def features(img):
    out = []
    for scale in (img, downsample(img)):
        m = mscn(scale)
        out.extend(fit_ggd(m))
        for p in products(m):
            out.extend(fit_aggd(p))
    return np.array(out)


def read_model(model_path, ranges_path):
    gamma = bias = None
    svs, coefs = [], []
    with open(model_path) as f:
        for line in f:
            line = line.split("#", 1)[0].split()
            if not line:
                continue
            if line[0] == "gamma":
                gamma = float(line[1])
            elif line[0] == "bias":
                bias = float(line[1])
            else:
                vals = [float(v) for v in line]
                svs.append(vals[:-1])
                coefs.append(vals[-1])
    ranges = np.loadtxt(ranges_path)
    return gamma, bias, np.array(svs).reshape(-1, 36), np.array(coefs), ranges


def score(feat, model):
    gamma, bias, svs, coefs, ranges = model
    lo, hi = ranges[:, 0], ranges[:, 1]
    x = -1 + 2 * (feat - lo) / (hi - lo)
    raw = bias + np.sum(coefs * np.exp(-gamma * np.sum((svs - x) ** 2, axis=1)))
    return float(np.clip(raw, 0, 100)), float(raw)


def main(argv):
    img = load_gray(argv[1])
    f = features(img)
    s, raw = score(f, read_model(argv[2], argv[3]))
    print("features", " ".join(repr(float(v)) for v in f))
    print("score", repr(s))
    print("raw", repr(raw))
    if len(argv) > 4:
        with open(argv[4]) as fh:
            frozen = json.load(fh)
        ok = abs(s - frozen["score"]) <= 1e-9 and np.allclose(f, frozen["features"], rtol=0, atol=1e-12)
        print("frozen", "match" if ok else "MISMATCH")
        return 0 if ok else 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
