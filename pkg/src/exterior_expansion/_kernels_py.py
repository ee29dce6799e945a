"""Pure numpy implementation of the branch-inversion kernel.

Same interface as the compiled module; used when the extension is not built
or when ``EXTERIOR_EXPANSION_PURE_PYTHON`` is set.
"""

import numpy as np

MA, SMALL, INVERSE, INVERSE_ZERO, LARGE_RIGHT, LARGE_LEFT, SPL = range(7)


def evaluate(code, n, p, w):
    w = np.asarray(w, dtype=float)
    if code == MA:
        return w**n - p, n * w ** (n - 1)
    if code == SMALL:
        return p * w**n - (w - 1.0) ** n, n * (p * w ** (n - 1) - (w - 1.0) ** (n - 1))
    if code == INVERSE:
        return w**n - n * w ** (n - 1), n * w ** (n - 2) * (w - (n - 1))
    if code == INVERSE_ZERO:
        aw = np.abs(w)
        return np.sign(w) * aw ** (n - 1), (n - 1) * aw ** (n - 2)
    if code == LARGE_RIGHT:
        phi = np.pi / 4 + p - (n - 1) * (np.arctan(w) - np.pi / 4)
    elif code == LARGE_LEFT:
        phi = np.pi / 4 + p - (n - 1) * (np.arctan(w) + 3 * np.pi / 4)
    else:
        phi = p - (n - 1) * np.arctan(w)
    m = (w * w + 1.0) ** (0.5 * (n - 1))
    return m * (w * np.cos(phi) - np.sin(phi)), n * m * np.cos(phi)


def invert_branch(code, n, p, xi, w_lo, w_hi, increasing, rtol=1e-15, maxiter=200):
    xi = np.asarray(xi, dtype=float)
    shape = xi.shape
    x = xi.ravel()
    s = 1.0 if increasing else -1.0
    lo = np.full(x.shape, float(w_lo))
    hi = np.full(x.shape, float(w_hi))

    for _ in range(maxiter):
        w = 0.5 * (lo + hi)
        active = (hi - lo) > 1e-3 * np.maximum(np.abs(w), 1.0)
        if not active.any():
            break
        g, _ = evaluate(code, n, p, w)
        neg = s * (g - x) < 0
        lo = np.where(active & neg, w, lo)
        hi = np.where(active & ~neg, w, hi)

    w = 0.5 * (lo + hi)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(maxiter):
        g, dg = evaluate(code, n, p, w)
        r = g - x
        done |= np.abs(r) <= rtol * np.abs(x)
        neg = s * r < 0
        lo = np.where(~done & neg, w, lo)
        hi = np.where(~done & ~neg, w, hi)
        done |= (hi - lo) <= 4.4e-16 * np.abs(w)
        if done.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            wn = w - r / dg
        bad = ~((wn > lo) & (wn < hi))
        wn = np.where(bad, 0.5 * (lo + hi), wn)
        stall = np.abs(wn - w) <= 2.2e-16 * np.abs(w)
        w = np.where(done, w, wn)
        done |= stall
    return w.reshape(shape)
