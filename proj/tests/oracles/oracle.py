"""Independent reference computations used to freeze expected values in the C++ tests.

Nothing here shares code with the library: special functions come from mpmath,
maximizers from direct numerical optimization (grid search + Brent) of the
objective, and Gaussian expectations from quadrature where noted.

Run:  python3 tests/oracles/oracle.py
"""
import math

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, stats

mp.mp.dps = 50


def mills(p):
    p = mp.mpf(p)
    return mp.ncdf(-p) / mp.npdf(p)


def section(title):
    print(f"\n== {title}")


def special_functions():
    section("special functions")
    print("pdf(10)            ", mp.nstr(mp.npdf(10), 17))
    print("cdf(8)             ", mp.nstr(mp.ncdf(8), 20))
    print("mills(0)           ", mp.nstr(mills(0), 17))
    print("mills(20)          ", mp.nstr(mills(20), 17))
    print("mills(-5)          ", mp.nstr(mills(-5), 17))
    print("mills(8)           ", mp.nstr(mills(8), 17))
    inv1 = mp.findroot(lambda p: mills(p) - 1, (0.0, 1.0), solver="bisect", tol=1e-40)
    print("mills_inverse(1)   ", mp.nstr(inv1, 17))
    pbar = mp.findroot(lambda p: mills(p) - p, (0.1, 2.0), solver="bisect", tol=1e-40)
    print("fixed point p_bar  ", mp.nstr(pbar, 17))


def sell_obj_quad(p, x, m, s):
    f = lambda y: (p - x - y) * stats.norm.pdf(y, m, s)
    v, _ = integrate.quad(f, p, np.inf, epsabs=1e-14, epsrel=1e-13)
    return v


def buy_obj_quad(p, x, m, s):
    f = lambda y: (x - p + y) * stats.norm.pdf(y, m, s)
    v, _ = integrate.quad(f, -np.inf, p, epsabs=1e-14, epsrel=1e-13)
    return v


def objectives():
    section("objectives (quadrature)")
    print("buy(0.5, 1, 0, 1)  ", repr(buy_obj_quad(0.5, 1.0, 0.0, 1.0)))
    print("sell(-0.5,-1,0,1)  ", repr(sell_obj_quad(-0.5, -1.0, 0.0, 1.0)))
    grid = np.arange(-10.0, 10.0, 1e-5)
    d = grid
    vals = (grid + 1.0) * stats.norm.sf(d) - stats.norm.pdf(d)
    k = int(np.argmax(vals))
    print("grid argmax x=-1   ", grid[k], "value", vals[k])


# ---------------------------------------------------------------------------
# Equilibrium recursion, solved by direct maximization of the objective.
# ---------------------------------------------------------------------------

def sell_obj(p, x, m, s):
    d = (p - m) / s
    return (p - x - m) * stats.norm.sf(d) - s * stats.norm.pdf(d)


def buy_obj(p, x, m, s):
    return sell_obj(-p, -x, -m, s)


def argmax_sell(x, m, s):
    if x >= 0:
        return None
    f = lambda p: -sell_obj(p, x, m, s)
    lo, hi = m - 3 * s, m + s * max(8.0, 4.0 / (-x / s))
    grid = np.linspace(lo, hi, 2001)
    k = int(np.argmin(-sell_obj(grid, x, m, s)))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    r = optimize.minimize_scalar(f, bounds=(a, b), method="bounded",
                                 options={"xatol": 1e-13 * s})
    return r.x


def argmax_buy(x, m, s):
    p = argmax_sell(-x, -m, s)
    return None if p is None else -p


def terminal(alpha, sigma, T, N):
    """Scalar reduction: pa is a fixed point of pa -> BR_ask(BR_bid(pa))."""
    dt = T / N
    m, s = alpha * dt, sigma * math.sqrt(dt)

    def g(a):
        b = argmax_buy(a, m, s)
        return argmax_sell(b, m, s) - a

    pa = optimize.brentq(g, 0.3 * s, 1.2 * s, xtol=1e-15 * s, rtol=1e-15)
    pb = argmax_buy(pa, m, s)
    la = pb + m + sell_obj(pa, pb, m, s)
    lb = pa + m - buy_obj(pb, pa, m, s)
    return pa, pb, la, lb


def solve_full(alpha, sigma, T, N):
    """Returns (degenerate_from or None, pa, pb, la, lb lists over 0..N)."""
    dt = T / N
    m, s = alpha * dt, sigma * math.sqrt(dt)
    pa = [None] * (N + 1)
    pb = [None] * (N + 1)
    la = [None] * (N + 1)
    lb = [None] * (N + 1)
    a, b, l_a, l_b = terminal(alpha, sigma, T, N)
    pa[N] = pa[N - 1] = a
    pb[N] = pb[N - 1] = b
    la[N], lb[N] = b, a
    la[N - 1], lb[N - 1] = l_a, l_b
    if not (b <= l_a and l_b <= a and a >= b + abs(alpha) * dt):
        return N - 1, pa, pb, la, lb
    for n in range(N - 2, -1, -1):
        xa, xb = la[n + 1], lb[n + 1]
        if xa >= 0 or xb <= 0:
            return n, pa, pb, la, lb
        a = argmax_sell(xa, m, s)
        b = argmax_buy(xb, m, s)
        l_a = xa + m + sell_obj(a, xa, m, s)
        l_b = xb + m - buy_obj(b, xb, m, s)
        if not (b <= l_a and l_b <= a and a >= b + abs(alpha) * dt):
            return n, pa, pb, la, lb
        pa[n], pb[n], la[n], lb[n] = a, b, l_a, l_b
    return None, pa, pb, la, lb


def equilibria():
    section("terminal period")
    for N in (1, 10, 100, 1000):
        a, b, la, lb = terminal(0.0, 1.0, 1.0, N)
        print(f"alpha=0 N={N:5d}  pa/sqrt(dt)={a / math.sqrt(1.0 / N):.12f}  la/sqrt(dt)={la / math.sqrt(1.0 / N):.12f}")
    a, b, la, lb = terminal(0.1, 1.0, 1.0, 100)
    print(f"alpha=0.1 N=100 pa={a:.14f} pb={b:.14f} la={la:.14f} lb={lb:.14f}")

    section("full paths")
    for N in (20, 50, 100, 200, 500):
        deg, pa, pb, la, lb = solve_full(0.0, 1.0, 1.0, N)
        print(f"alpha=0 N={N:4d} deg={deg} spread0={pa[0] - pb[0]:.12g} "
              f"max|la|={max(abs(v) for v in la):.12g} la0={la[0]:.12g}")
    deg, pa, pb, la, lb = solve_full(0.1, 1.0, 1.0, 100)
    print("alpha=0.1 N=100 degenerate_from", deg, "la at deg+1", la[deg + 1])
    deg, pa, pb, la, lb = solve_full(0.0, 1.0, 1.0, 50)
    print(f"alpha=0 N=50 la0={la[0]:.15g} lb0={lb[0]:.15g} pb0={pb[0]:.15g} pa0={pa[0]:.15g}")

    section("largest non-degenerate N at alpha=0.1")
    last_ok = None
    for N in range(2, 101):
        try:
            deg = solve_full(0.1, 1.0, 1.0, N)[0]
        except (TypeError, ValueError):
            deg = "terminal-failure"
        if deg is None:
            last_ok = N
        print(N, deg) if N <= 40 or deg is None else None
    print("largest non-degenerate N <= 100:", last_ok)


def critical_alpha(N, tol=1e-7):
    lo, hi = 0.0, 0.01
    while solve_full(hi, 1.0, 1.0, N)[0] is None:
        lo, hi = hi, hi * 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if solve_full(mid, 1.0, 1.0, N)[0] is None:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical():
    section("critical drift")
    for N in (20, 50, 100, 200, 500):
        print(f"N={N:4d} alpha*={critical_alpha(N):.8f}")


def tails():
    section("Gaussian tail oracles")
    sf = lambda v: mp.ncdf(-v)
    print("P(X>1)/P(X>0)      ", mp.nstr(sf(1) / sf(0), 12))
    print("P(X>3)/P(X>2)      ", mp.nstr(sf(3) / sf(2), 12))
    print("sqrt(2/pi)         ", mp.nstr(mp.sqrt(2 / mp.pi), 15))
    xs = [0.0, 0.5, 1.0, 1.5, 2.0]
    zs = [0.25 * k for k in range(17)]
    best = max((float(sf(x + z) / sf(x)) * math.exp(z), x, z) for x in xs for z in zs)
    print("max ratio*e^z      ", best)


if __name__ == "__main__":
    special_functions()
    objectives()
    equilibria()
    critical()
    tails()
