"""Independent high-precision oracle for the frozen constants used in the Rust tests.

Run with `python3 oracle.py`. Uses mpmath tanh-sinh quadrature on the
closed-form integrands. The near-endpoint substitution in `q_value` is the
only transformation; for gamma = 0.25 the result is cross-checked against the
untransformed s-space integral `q_direct_in_s`.
"""
from mpmath import mp, mpf, log, log1p, sinh, coth, quad, exp, pi, e, hyp2f1

mp.dps = 40


def f_closed(a, x):
    return bracket(a, x) / (-log(a))


def bracket(a, x):
    """x (log x - log a) - (x - a), evaluated without cancellation near x = a."""
    eps = (x - a) / a
    if abs(eps) < mpf("1e-4"):
        return a * sum((-1) ** k * eps ** k / (k * (k - 1)) for k in range(2, 40))
    return x * (log(x) - log(a)) - (x - a)


def h_over_eps2(eps):
    """((1+eps) log(1+eps) - eps) / eps^2 with a series near 0."""
    if abs(eps) < mpf("1e-3"):
        return sum((-1) ** k * eps ** (k - 2) / (k * (k - 1)) for k in range(2, 60))
    return ((1 + eps) * log1p(eps) - eps) / eps ** 2


def q_value(s0, S, gamma):
    """Q over sigma in (a, 1). Near sigma = a the (sigma - a)^(-2 gamma)
    singularity is removed by sigma = a + y^p, p = 1/(1 - 2 gamma); plain
    tanh-sinh on the singular form loses digits once gamma approaches 1/2."""
    a = 2 * S / s0
    la = -log(a)
    p = 1 / (1 - 2 * gamma)

    def near(y):
        u = y ** p
        return p * (a + u) ** (gamma - 1) / la * (h_over_eps2(u / a) / a) ** (-gamma)

    def far(x):
        return x ** (gamma - 1) / la * bracket(a, x) ** (-gamma)

    def near_range(hi):
        ymax = (hi - a) ** (1 / p)
        return quad(near, [0, ymax * mpf("1e-3"), ymax * mpf("0.1"), ymax])

    split = e ** 2 * a
    if split < 1:
        q2 = 2 / s0 * near_range(split)
        q1 = 2 / s0 * quad(far, [split, 1])
        return q1 + q2, q1, q2
    q = 2 / s0 * near_range(mpf(1))
    return q, mpf(0), q


def q_direct_in_s(s0, S, gamma):
    """Q straight from its s-space definition: int s^{2g} |phi''|^{1+g} phi^{-g} ds."""
    a = 2 * S / s0
    la = -log(a)

    def integrand(s):
        x = 2 * s / s0
        phi = f_closed(a, x)
        phi2 = (2 / s0) ** 2 / (x * la)
        return s ** (2 * gamma) * phi2 ** (1 + gamma) * phi ** (-gamma)

    return quad(integrand, [S, s0 / 2])


def bound_constant(g):
    c1 = 2 ** (1 + g) / (1 - g)
    b = exp(2 * g) * (e ** 2 - 1) ** (1 - 2 * g) / (1 - 2 * g)
    c2 = 2 ** (1 + g) * b
    absorb = c2 * log(mpf(3) / 2) ** (g - 1) + c1
    return absorb * (1 - log(2) / log(3)) ** (-g)


def q_bound(s0, S, g):
    return bound_constant(g) / (s0 * (log(s0) - log(S)) ** g)


def beta_integral(g):
    """Closed form via the Gauss hypergeometric function (tanh-sinh alone is
    inaccurate for the (beta-1)^(-0.9) singularity at gamma = 0.45)."""
    Y = e ** 2 - 1
    return Y ** (1 - 2 * g) / (1 - 2 * g) * hyp2f1(-g, 1 - 2 * g, 2 - 2 * g, -Y)


def cutoff_phi(s0, S, s):
    """phi(s) = f(2 s / s0) with the cubic/linear-quadratic filler on (1, 2]."""
    a = 2 * S / s0
    x = 2 * s / s0
    if x <= a:
        return mpf(0)
    if x <= 1:
        return f_closed(a, x)
    if x >= 2:
        return mpf(1)
    f1 = 1 - (1 - a) / (-log(a))
    y = x - 1
    if mpf(1) / 3 <= f1 <= mpf(2) / 3:
        return f1 + y + (1 - 3 * f1) * y ** 2 + (2 * f1 - 1) * y ** 3
    if f1 >= mpf(1) / 2:
        L = 2 * (1 - f1)
        if y >= L:
            return mpf(1)
        return f1 + y - y ** 2 / (2 * L)
    m = 1 - 2 * f1
    if y <= m:
        return f1 + y
    z = y - m
    L = 1 - m
    return f1 + m + z - z ** 2 / (2 * L)


def main():
    q, q1, q2 = q_value(mpf("0.5"), mpf("0.1"), mpf("0.25"))
    print("Q(s0=0.5,S=0.1,g=0.25) =", mp.nstr(q, 20))
    print("Q direct in s          =", mp.nstr(q_direct_in_s(mpf("0.5"), mpf("0.1"), mpf("0.25")), 20))
    q, q1, q2 = q_value(mpf("0.5"), mpf("0.02"), mpf("0.25"))
    print("Q(s0=0.5,S=0.02,g=0.25) =", mp.nstr(q, 20), "Q1 =", mp.nstr(q1, 20), "Q2 =", mp.nstr(q2, 20))
    q, q1, q2 = q_value(mpf("0.3"), mpf("0.001"), mpf("0.45"))
    print("Q(s0=0.3,S=0.001,g=0.45) =", mp.nstr(q, 20), "Q1 =", mp.nstr(q1, 20), "Q2 =", mp.nstr(q2, 20))
    for g in ["0.05", "0.1", "0.25", "0.4", "0.45"]:
        g = mpf(g)
        print("gamma", g, "C(gamma) =", mp.nstr(bound_constant(g), 20),
              "B exact =", mp.nstr(beta_integral(g), 20),
              "B closed =", mp.nstr(exp(2 * g) * (e ** 2 - 1) ** (1 - 2 * g) / (1 - 2 * g), 20))
    print("bound(s0=0.5,S=0.1,g=0.25) =", mp.nstr(q_bound(mpf("0.5"), mpf("0.1"), mpf("0.25")), 20))
    print("C pointwise = 9/(32 log^2 2) =", mp.nstr(9 / (32 * log(2) ** 2), 20))

    # Weighted area of the big-bang factor at t = 1 for r0 = e^-0.5, R = e^-0.1,
    # integrated to s_max = 8 plus the e^{-2s} tail rule U(s_max)/2.
    s0, S, smax, t = mpf("0.5"), mpf("0.1"), mpf(8), mpf(1)
    bb = lambda s: 2 * t / sinh(s) ** 2
    pts = [S, s0 / 2, s0, 2 * s0, smax]
    wa = 2 * pi * (quad(lambda s: bb(s) * cutoff_phi(s0, S, s), pts) + bb(smax) / 2)
    print("weighted_area(BigBang t=1, s0=0.5, S=0.1, smax=8) =", mp.nstr(wa, 20))

    # c0 for J(t) = c0 t on the BigBang/Cusp pair with the same truncation + tail rule.
    diff = lambda s: 1 / s ** 2 - 1 / sinh(s) ** 2
    c0 = 4 * pi * (quad(lambda s: diff(s) * cutoff_phi(s0, S, s), pts) + diff(smax) / 2)
    print("c0(s0=0.5,S=0.1,smax=8) =", mp.nstr(c0, 20))
    c0_trunc = 4 * pi * quad(lambda s: diff(s) * cutoff_phi(s0, S, s), pts)
    print("c0 truncated (no tail) =", mp.nstr(c0_trunc, 20))

    # disc area of the big-bang factor, r0 = 0.8, t = 1, infinite domain.
    s08 = -log(mpf("0.8"))
    print("BigBang disc area r0=0.8 t=1 =", mp.nstr(4 * pi * (coth(s08) - 1), 20))


if __name__ == "__main__":
    main()
