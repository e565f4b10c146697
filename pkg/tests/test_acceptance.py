"""End-to-end acceptance criteria, one test per criterion."""

import hashlib
import math

import numpy as np
from scipy import integrate
from scipy.special import gamma as Gamma

from rmtlab.equilibrium import equilibrium_measure, quartic_closed_form, solve_endpoints
from rmtlab.errors import WrongCutCount
from rmtlab.extsource import (
    branch_points,
    cusp_scaled_kernel,
    mhp_build,
    mhp_kernel_build,
    pastur_density,
    support,
)
from rmtlab.kernels import airy, airy_kernel, fredholm_det, make_kernel, pearcey_kernel, pearcey_p, pearcey_q, sine_kernel
from rmtlab.orthopoly import (
    RecurrenceTable,
    cd_kernel,
    dv_derivatives,
    minimize_hamiltonian,
    quartic_profiles,
    recurrence_from_weight,
)
from rmtlab.painleve import double_scaling_R, string_residual_ansatz, tracy_widom_cdf, tracy_widom_pdf
from rmtlab.partition import (
    d2_identity_residual,
    free_energy_via_deformation,
    gauss_free_energy,
    gauss_ln_z,
    leading_free_energy,
    partition_ln,
    phase_transition_probe,
)
from rmtlab.potential import Potential
from rmtlab.sampler import LogGasChain, histogram_distance, metropolis_run

GAUSS = Potential.gaussian()


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def test_criterion_01_gue_partition(criterion):
    rel = max(abs(partition_ln(GAUSS, N) - gauss_ln_z(N)) / abs(gauss_ln_z(N)) for N in range(1, 7))
    quad, _ = integrate.dblquad(
        lambda y, x: (x - y) ** 2 * math.exp(-2.0 * (x * x + y * y)), -8, 8, -8, 8, epsabs=1e-13, epsrel=1e-12
    )
    z2 = math.exp(partition_ln(GAUSS, 2))
    rel2 = abs(z2 - quad) / quad
    rel_pi = abs(z2 - math.pi / 4) / (math.pi / 4)
    ok = rel < 1e-8 and rel2 < 1e-8 and rel_pi < 1e-8
    criterion(1, ok, f"ln Z rel err N=1..6 {rel:.1e}; N=2 vs 2-D quadrature {rel2:.1e}, vs pi/4 {rel_pi:.1e}")


def test_criterion_02_gue_recurrence(criterion):
    N = 10
    tab = recurrence_from_weight(GAUSS, N, 51)
    n = np.arange(51)
    err = float(np.max(np.abs(tab.gamma_sq[:51] - n / (2.0 * N))))
    criterion(2, err < 1e-10, f"max |gamma_n^2 - n/2N| for n <= 50 at N = 10: {err:.1e}")


def test_criterion_03_endpoints(criterion):
    e_gue = solve_endpoints(GAUSS, 1).endpoints
    err_gue = float(np.max(np.abs(np.asarray(e_gue) - [-math.sqrt(2), math.sqrt(2)])))
    V1 = Potential.quartic(-1.0)
    ref1 = quartic_closed_form(-1.0).support.endpoints
    err1 = float(np.max(np.abs(np.asarray(solve_endpoints(V1, 1).endpoints) - ref1)))
    V3 = Potential.quartic(-3.0)
    e3 = solve_endpoints(V3, 2).endpoints
    err3 = float(np.max(np.abs(np.asarray(e3) - [-math.sqrt(5), -1, 1, math.sqrt(5)])))
    Vb = Potential.quartic(-2.05)
    try:
        equilibrium_measure(Vb, 1)
        raised = False
    except WrongCutCount:
        raised = True
    two = equilibrium_measure(Vb, 2).support.endpoints
    err_b = float(np.max(np.abs(np.asarray(two) - np.asarray(quartic_closed_form(-2.05).support.endpoints))))
    ok = err_gue < 1e-10 and err1 < 1e-8 and err3 < 1e-8 and raised and err_b < 1e-8
    criterion(
        3, ok,
        f"GUE {err_gue:.1e}, t=-1 {err1:.1e}, t=-3 {err3:.1e}, t=-2.05 q=1 raises {raised}, q=2 err {err_b:.1e}",
    )


def test_criterion_04_string_minimiser(criterion):
    t, N = -1.0, 400
    V = Potential.quartic(t)
    res = minimize_hamiltonian(V, N)
    n = np.arange(1, len(res.gamma_sq) + 1)
    lam = n / N
    R, L = quartic_profiles(t, 1.0, lam)
    upper = (lam >= 0.35) & (lam <= 0.95)
    err_upper = float(np.max(np.abs(res.gamma_sq[upper] - R[upper])))
    low = (lam >= 0.05) & (lam <= 0.20)
    odd, even = low & (n % 2 == 1), low & (n % 2 == 0)
    err_odd = float(np.max(np.abs(res.gamma_sq[odd] - R[odd])))
    err_even = float(np.max(np.abs(res.gamma_sq[even] - L[even])))
    sr = res.string_residuals(V)
    band = (n >= 10) & (n <= 380)
    worst = float(np.max(np.abs(sr[band])))
    ok = err_upper < 0.02 and err_odd < 0.02 and err_even < 0.02 and worst < 1e-8
    criterion(
        4, ok,
        f"one-band err {err_upper:.1e}; two-band odd/R {err_odd:.1e}, even/L {err_even:.1e}; string residual {worst:.1e}",
    )


def test_criterion_05_deformation_identities(criterion):
    V = Potential.quartic(-1.0)
    N = 10.0
    worst = 0.0
    for k in (2, 4):
        eps = 1e-5
        tab = recurrence_from_weight(V, N, 24)
        tp = recurrence_from_weight(V.shifted(k, eps), N, 24)
        tm = recurrence_from_weight(V.shifted(k, -eps), N, 24)
        for n in range(1, 11):
            an = dv_derivatives(V, N, k, n, tab)
            fd = (
                (tp.log_h[n] - tm.log_h[n]) / (2 * eps),
                (tp.gamma[n] - tm.gamma[n]) / (2 * eps),
            )
            for a_val, f_val in zip(an[:2], fd):
                worst = max(worst, abs(a_val - f_val) / max(abs(f_val), 1e-300))
            # beta vanishes for even V; compare absolutely
            worst = max(worst, abs(an[2] - (tp.beta[n] - tm.beta[n]) / (2 * eps)))
    d2 = d2_identity_residual(V, 8)
    criterion(5, worst < 1e-5 and d2 < 1e-4, f"first-order FD residual {worst:.1e}; second-order at N=8 {d2:.1e}")


def test_criterion_06_free_energy(criterion):
    V = Potential([0.0, -1.0, 0.0, 0.25])
    N = 8
    via_product = -partition_ln(V.deform(2.0), N) / N**2
    via_integral = free_energy_via_deformation(V, N, t=2.0)
    diff = abs(via_product - via_integral)
    W = Potential([0.0, 1.0, 0.0, 0.1])
    F = leading_free_energy(W)
    Ns = [8, 16, 32, 64]
    gaps = [abs(-partition_ln(W, n) / n**2 - gauss_free_energy(n) - F) for n in Ns]
    slope = _slope(Ns, gaps)
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    ok = diff < 1e-5 and decreasing and abs(slope + 2) < 0.3
    criterion(6, ok, f"product vs integral {diff:.1e}; |F_N - F_N^G - F| slope {slope:.2f}")


def test_criterion_07_third_order_transition(criterion):
    a = phase_transition_probe(-2.0, 1e-2)
    b = phase_transition_probe(-2.0, 5e-3)
    low = float(np.max(np.abs(b.gaps[:3])))
    g1, g2 = a.gaps[3], b.gaps[3]
    stable = abs(g1 - g2) / abs(g2) < 0.1
    ok = low < 1e-5 and abs(g2) > 0.05 and stable
    criterion(7, ok, f"F, F', F'' gaps {low:.1e}; F''' gap {g1:.4f} -> {g2:.4f} on halving")


def _scaled_gue(N, x0, c, power, kernel):
    tab = RecurrenceTable.gaussian(N, N + 1)
    u = np.linspace(-2, 2, 41)
    U, W = np.meshgrid(u, u, indexing="ij")
    s = c * N**power
    K = cd_kernel(tab, GAUSS, N, x0 + U / s, x0 + W / s) / s
    return float(np.max(np.abs(K - kernel(U, W))))


def test_criterion_08_bulk_universality(criterion):
    rho0 = math.sqrt(2) / math.pi
    errs = [_scaled_gue(N, 0.0, rho0, 1.0, sine_kernel) for N in (50, 200)]
    ok = errs[1] < errs[0] and errs[1] < 0.02
    criterion(8, ok, f"sine-kernel sup error N=50 {errs[0]:.1e}, N=200 {errs[1]:.1e}")


def test_criterion_09_edge_universality(criterion):
    c = math.sqrt(2.0)  # rho(x) ~ (2^{3/4}/pi) sqrt(sqrt2 - x) at the edge
    errs = [_scaled_gue(N, math.sqrt(2), c, 2 / 3, airy_kernel) for N in (50, 200)]
    ok = errs[1] < errs[0] and errs[1] < 0.05
    criterion(9, ok, f"Airy-kernel sup error N=50 {errs[0]:.1e}, N=200 {errs[1]:.1e}")


def test_criterion_10_tracy_widom(criterion, hm_solution):
    sol = hm_solution
    u5 = float(sol(5.0))
    ai5 = float(airy(5.0)[0])
    rel5 = abs(u5 - ai5) / ai5
    K = make_kernel("airy")
    xs = np.arange(-4, 3)
    diff = max(abs(tracy_widom_cdf(sol, x) - fredholm_det(K, (float(x), 14.0))) for x in xs)
    t, w = np.polynomial.legendre.leggauss(200)
    lo, hi = -10.0, 7.9
    y = 0.5 * (hi - lo) * (t + 1) + lo
    mass = 0.5 * (hi - lo) * float(np.sum(w * tracy_widom_pdf(sol, y)))
    ok = sol.residual < 1e-8 and rel5 < 1e-4 and diff < 1e-4 and abs(mass - 1) < 1e-3
    criterion(
        10, ok,
        f"ODE residual {sol.residual:.1e}; u(5)/Ai(5) rel {rel5:.1e}; F_TW vs det {diff:.1e}; density mass {mass:.6f}",
    )


def test_criterion_11_double_scaling(criterion, hm_solution):
    sol = hm_solution
    t = -1.0
    Ns = [1e3, 1e4, 1e5]
    slopes = []
    for yv in (-2.0, 0.0, 1.0):
        res = []
        for N in Ns:
            n = int(round(N * (t * t / 4 + yv * (t * t / 2) ** (1 / 3) * N ** (-2 / 3))))
            res.append(abs(string_residual_ansatz(t, N, n, sol)))
        slopes.append(_slope(Ns, res))
    slope_ok = all(abs(s + 1) < 0.15 for s in slopes)
    V = Potential.quartic(t)
    mres = minimize_hamiltonian(V, 400)
    n = np.arange(88, 113)
    err = float(np.max(np.abs(mres.gamma_sq[n - 1] - double_scaling_R(t, 400, n, sol))))
    ok = slope_ok and err < 0.05
    criterion(
        11, ok,
        "residual slopes " + ", ".join(f"{s:.2f}" for s in slopes) + f" (target -1 +- 0.15); minimiser err {err:.1e}",
    )


def _fd1(f, x, h):
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def test_criterion_12_pearcey_functions(criterion):
    p00 = pearcey_p(0.0, 0.0)
    oracle = Gamma(0.25) / (math.pi * 4**0.75)
    err0 = abs(p00 - oracle)
    x = np.linspace(-5, 5, 41)
    h = 1e-2
    worst = 0.0
    for b in (-1.0, 0.0, 1.0):
        p3 = _fd1(lambda s: pearcey_p(s, b, 2), x, h)
        rp = p3 - x * pearcey_p(x, b) - b * pearcey_p(x, b, 1)
        q3 = _fd1(lambda s: pearcey_q(s, b, 2), x, h)
        rq = q3 + x * pearcey_q(x, b) - b * pearcey_q(x, b, 1)
        worst = max(worst, float(np.max(np.abs(rp))), float(np.max(np.abs(rq))))
    cont = max(abs(pearcey_kernel(xv, xv + 1e-6, 0.0) - pearcey_kernel(xv, xv, 0.0)) for xv in (0.0, 1.0))
    ok = err0 < 1e-6 and worst < 1e-5 and cont < 1e-4
    criterion(
        12, ok,
        f"p(0,0) = {p00:.7f} vs Gamma oracle {oracle:.7f} (err {err0:.1e}); ODE residual {worst:.1e}; diagonal jump {cont:.1e}",
    )


def _density_mass(a):
    pts = sorted({e for iv in support(a) for e in iv} | {0.0})
    lo, hi = pts[0], pts[-1]
    return integrate.quad(lambda x: pastur_density(x, a), lo, hi, points=pts[1:-1], limit=400, epsabs=1e-12, epsrel=1e-12)[0]


def test_criterion_13_pastur(criterion):
    mass_err = max(abs(_density_mass(a) - 1.0) for a in (0.5, 1.0, 2.0))
    x = np.linspace(-1.9, 1.9, 39)
    semi = np.sqrt(4 - x * x) / (2 * math.pi)
    semi_err = float(np.max(np.abs(pastur_density(x, 0.0) - semi)))
    cube = _slope([1e-4, 1e-3], [pastur_density(1e-4, 1.0), pastur_density(1e-3, 1.0)])
    z1_err = abs(branch_points(1.0).z1 - 3 * math.sqrt(3) / 2)
    ivs = support(2.0)
    sq = []
    for e in (ivs[1][0], ivs[1][1]):
        inward = 1.0 if e == ivs[1][0] else -1.0
        d = np.array([1e-6, 1e-5])
        sq.append(_slope(d, [pastur_density(e + inward * dd, 2.0) for dd in d]))
    ok = (
        mass_err < 1e-8 and semi_err < 1e-10 and abs(cube - 1 / 3) < 0.02 and z1_err < 1e-10
        and len(ivs) == 2 and all(abs(s - 0.5) < 0.05 for s in sq)
    )
    criterion(
        13, ok,
        f"mass {mass_err:.1e}; semicircle {semi_err:.1e}; cusp exponent {cube:.3f}; z1 {z1_err:.1e}; "
        f"edge exponents " + ", ".join(f"{s:.3f}" for s in sq),
    )


def test_criterion_14_multiple_hermite(criterion):
    route = 0.0
    for a in (0.5, 1.0, 2.0):
        for n in range(1, 11):
            for n1 in range(n + 1):
                A = mhp_build(n1, n - n1, a, n, route="determinant").coeffs
                B = mhp_build(n1, n - n1, a, n, route="recurrence").coeffs
                route = max(route, float(np.max(np.abs(A - B)) / max(1.0, float(np.max(np.abs(B))))))
    trace = 0.0
    mono = True
    sups = {}
    for a in (0.5, 2.0):
        edge = max(e for iv in support(a) for e in iv)
        x = np.linspace(-edge - 0.3, edge + 0.3, 301)
        rho = pastur_density(x, a)
        s = []
        for n in (8, 16, 32):
            k = mhp_kernel_build(n, a)
            L = abs(a) + 3.0 + 12.0 / math.sqrt(n)
            tr = integrate.quad(lambda v: float(k.diagonal(np.array([v]))[0]), -L, L, points=[0.0], limit=400)[0]
            trace = max(trace, abs(tr - n))
            s.append(float(np.max(np.abs(k.density(x) - rho))))
        sups[a] = s
        mono &= all(b < a_ for a_, b in zip(s, s[1:]))
    ok = route < 1e-8 and trace < 1e-5 and mono
    detail = "; ".join(f"a={a}: " + ", ".join(f"{v:.4f}" for v in s) for a, s in sups.items())
    criterion(14, ok, f"routes agree {route:.1e}; trace err {trace:.1e}; density sup error {detail}")


def test_criterion_15_pearcey_limit(criterion):
    pairs = [(0.5, -0.5), (1.0, -1.0), (1.5, -1.5), (0.5, 0.5), (1.0, 1.0)]
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    ref = pearcey_kernel(xs, ys, 0.0)
    errs = []
    for n in (16, 32, 64):
        errs.append(np.abs(cusp_scaled_kernel(n, 0.0, xs, ys) - ref) / np.abs(ref))
    errs = np.array(errs)
    mono = bool(np.all(errs[1:] < errs[:-1]))
    ok = mono and float(np.max(errs[-1])) < 0.1
    criterion(15, ok, "relative errors at n=64 " + ", ".join(f"{e:.3f}" for e in errs[-1]) + f"; decreasing {mono}")


def test_criterion_16_sampler(criterion):
    V = Potential.quartic(-3.0)
    chain = LogGasChain(40, V, 7)
    s1 = metropolis_run(chain, 100_000, thin=10)
    m = quartic_closed_form(-3.0)
    d, *_ = histogram_distance(s1, m.density, -math.sqrt(5), math.sqrt(5), bins=20)
    s2 = metropolis_run(LogGasChain(40, V, 7), 100_000, thin=10)
    same = hashlib.sha256(s1.tobytes()).digest() == hashlib.sha256(s2.tobytes()).digest()
    criterion(16, d < 0.05 and same, f"histogram sup distance {d:.4f}; byte-identical rerun {same}")
