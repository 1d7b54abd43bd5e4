"""Acceptance criteria A1-A10, one PASS/FAIL line each at the pinned tolerances.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

import math

import numpy as np

from reconlab import coherence, germ, grid as gridmod, mollifier, quasinorm, reconstruct as rec, sewing
from reconlab.fields import MultiscaleField
from reconlab.grid import DyadicGrid


def _line(tag, ok, detail):
    return f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"


def check_a1():
    g = DyadicGrid(12)
    worst_moment, worst_mass = 0.0, 0.0
    for r_tilde in range(4):
        stack = mollifier.build_stack(g, r_tilde + 0.5)
        assert stack.r_tilde == r_tilde
        worst_mass = max(worst_mass, abs(stack.phi.moment(0) - 1.0))
        for a in range(1, r_tilde + 1):
            worst_moment = max(worst_moment, abs(stack.phi.moment(a)))
    ok = worst_moment <= 1e-8 and worst_mass <= 1e-10
    return ok, f"max |moment| = {worst_moment:.2e} (<= 1e-8), max |mass - 1| = {worst_mass:.2e} (<= 1e-10)"


def check_a2():
    sweep = {}
    for n_max in (10, 12, 14):
        stack = mollifier.build_stack(DyadicGrid(n_max), 2.5)
        sweep[n_max] = [mollifier.check_telescope_identity(stack, n) for n in range(n_max - 5)]
    worst = max(max(v) for v in sweep.values())
    at_zero = [sweep[n][0] for n in (10, 12, 14)]
    monotone = at_zero[0] > at_zero[1] > at_zero[2]
    ok = worst <= 1e-8 and monotone
    trend = ", ".join(f"{r:.2e}" for r in at_zero)
    return ok, (f"max residual {worst:.2e} (<= 1e-8); n=0 residual over n_max 10/12/14: {trend} "
                f"({'decreasing' if monotone else 'not decreasing'})")


def check_a3():
    g = DyadicGrid(14)
    stack = mollifier.build_stack(g, 1.5)
    w = gridmod.sample(g, germ.sine(1))
    F = germ.constant_germ(w)
    errors = [float(np.max(np.abs(rec.reconstruct(F, stack, n).f.values - w.values)))
              for n in range(2, 11)]
    ratios = [b / a for a, b in zip(errors, errors[1:])]
    ok = max(ratios) <= 2.0**-1.8 and errors[-1] <= 1e-6
    return ok, (f"max per-level ratio {max(ratios):.3f} (<= {2**-1.8:.3f}), "
                f"final error {errors[-1]:.2e} at n_stop=10 (<= 1e-6)")


def check_a4():
    g = DyadicGrid(14)
    details, ok = [], True
    for m in (0, 1, 2):
        r = m + 0.5
        stack = mollifier.build_stack(g, r)
        F = germ.taylor_germ(g, germ.sine(1), m)
        result = rec.reconstruct(F, stack)
        sup_err = float(np.max(np.abs(result.f.values - np.sin(2 * np.pi * g.points))))
        ks = list(range(3, 8))
        delta = rec.error_field(result, F, gridmod.test_dictionary(g, r), ks).delta
        sups = [float(np.max(delta.level(k))) for k in ks]
        slope = -float(np.polyfit(ks, np.log2(sups), 1)[0])
        ok &= sup_err <= 1e-4 and abs(slope - (m + 1)) <= 0.3
        details.append(f"m={m}: sup err {sup_err:.1e}, slope {slope:.2f}")
    return ok, "; ".join(details) + " (err <= 1e-4, |slope - (m+1)| <= 0.3)"


A5_SPECS = [
    quasinorm.QuasinormSpec(quasinorm.BESOV_HIGH, math.inf, math.inf, 0.5),
    quasinorm.QuasinormSpec(quasinorm.BESOV_HIGH, 2, 2, 0.5),
    quasinorm.QuasinormSpec(quasinorm.TRIEBEL_LIZORKIN, 2, 2, 0.5),
    quasinorm.QuasinormSpec(quasinorm.BESOV_LOW, 0.5, 1, 1.5),
]


def check_a5():
    g = DyadicGrid(12)
    stack = mollifier.build_stack(g, 1.5)
    F = germ.taylor_germ(g, germ.sine(1), 1)
    ratios = []
    for spec in A5_SPECS:
        report = rec.verify_theorem_2_1(F, stack, spec, 1.5, range(3, 7), range(0, 4))
        ratios.append(report.ratio)
    ok = all(r <= rec.C_THM for r in ratios)
    return ok, "ratios " + ", ".join(f"{r:.4f}" for r in ratios) + f" (<= C_thm = {rec.C_THM:g})"


def _random_field(g, rng):
    mode = rng.integers(3)
    def level(k, x):
        if mode == 0:
            return rng.random(x.size)
        if mode == 1:
            return rng.random(x.size) ** rng.uniform(1.0, 8.0) * 2.0 ** (-rng.uniform(0, 1) * k)
        v = np.zeros(x.size)
        v[rng.integers(x.size, size=rng.integers(1, 6))] = rng.random() * 10
        return v
    return MultiscaleField.from_function(g, range(2, 10), level)


def check_a6():
    g = DyadicGrid(12)
    rng = np.random.default_rng(2024)
    worst = {}
    for spec in A5_SPECS:
        w = 0.0
        for _ in range(100):
            H = _random_field(g, rng)
            w = max(w, max(quasinorm.scaling_check(spec, H, l).ratio for l in range(5)))
        worst[spec.kind + f"(p={spec.p:g})"] = w
    low = quasinorm.QuasinormSpec(quasinorm.BESOV_LOW, 0.5, 1, 1.5)
    wrong = [quasinorm.scaling_check(low, quasinorm.spike_field(g, 2, l), l, gamma_effective=1.5).ratio
             for l in range(5)]
    right = [quasinorm.scaling_check(low, quasinorm.spike_field(g, 2, l), l).ratio for l in range(5)]
    ok = max(worst.values()) <= quasinorm.C_SCALING and min(wrong) > 1.0
    return ok, (f"worst random ratio {max(worst.values()):.3f} (<= {quasinorm.C_SCALING:g}); "
                f"spike ratios with gamma'=nu " + "/".join(f"{r:.2f}" for r in wrong)
                + " (> 1), with corrected gamma' " + "/".join(f"{r:.2f}" for r in right))


def check_a7():
    g = DyadicGrid(12)
    stack = mollifier.build_stack(g, 2.5)
    A = germ.young_process()
    path = sewing.sew(A, 1.5, 2, math.inf, 2.5, stack)
    oracle = sewing.riemann_stieltjes(lambda t: np.cos(2 * np.pi * t),
                                      lambda t: np.sin(2 * np.pi * t), g)
    gap = float(np.max(np.abs(path.values - oracle)))
    norms = sewing.sewing_bound(A, path, 1.5, 2, math.inf, range(1, 9))
    ok = gap <= 1e-4 and norms.B_eta <= sewing.C_SEW * norms.Bbar_eta
    return ok, (f"sup |g - RS| = {gap:.2e} (<= 1e-4); B = {norms.B_eta:.3f}, Bbar = {norms.Bbar_eta:.3f}, "
                f"ratio {norms.ratio:.3f} (<= {sewing.C_SEW:g})")


def check_a8():
    g = DyadicGrid(14)
    details, ok = [], True
    cases = [("constant sin", lambda: germ.constant_germ(gridmod.sample(g, germ.sine(1))), 1.5, 1e-6),
             ("taylor sin m=1", lambda: germ.taylor_germ(g, germ.sine(1), 1), 1.5, 1e-4)]
    for name, make, r, tol in cases:
        F = make()
        a = rec.reconstruct(F, mollifier.build_stack(g, r, "exp")).f.values
        b = rec.reconstruct(F, mollifier.build_stack(g, r, "poly")).f.values
        gap = float(np.max(np.abs(a - b)))
        ok &= gap <= 2 * tol
        details.append(f"{name}: {gap:.2e} (<= {2 * tol:.0e})")
    return ok, "exp vs poly bump " + "; ".join(details)


def check_a9():
    g = DyadicGrid(18)
    F = germ.incoherent_germ(g, 7)
    stack = mollifier.build_stack(g, 1.5)
    report = coherence.h_field(F, stack, 1.5, [0], 16)
    g2 = DyadicGrid(16)
    F2 = germ.incoherent_germ(g2, 7)
    stack2 = mollifier.build_stack(g2, 1.5)
    fn = [rec.f_n_values(F2, stack2, n) for n in range(4, 12)]
    incr = [float(np.max(np.abs(b - a))) for a, b in zip(fn, fn[1:])]
    ratios = [b / a for a, b in zip(incr, incr[1:])]
    ok = report.divergence_flag and min(ratios) >= 0.9
    return ok, (f"divergence_flag={report.divergence_flag} at L=16; increment ratios over n=4..10 "
                f"min {min(ratios):.3f} (>= 0.9)")


def check_a10():
    report = sewing.chi_partition_check(n_samples=1024)
    ok = report.max_residual <= 1e-10 and 0.2 <= report.support[0] and report.support[1] <= 0.6
    return ok, (f"residual {report.max_residual:.1e} (<= 1e-10), support "
                f"[{report.support[0]:.4f}, {report.support[1]:.4f}] within [0.2, 0.6]")


CHECKS = [check_a1, check_a2, check_a3, check_a4, check_a5,
          check_a6, check_a7, check_a8, check_a9, check_a10]


def _run(check, record):
    tag = check.__name__.replace("check_a", "A")
    ok, detail = check()
    record(_line(tag, ok, detail))
    assert ok, detail


def test_a01_mollifier_moments(record):
    _run(check_a1, record)


def test_a02_telescope_identity(record):
    _run(check_a2, record)


def test_a03_constant_germ_reconstruction(record):
    _run(check_a3, record)


def test_a04_taylor_germ_diagonal(record):
    _run(check_a4, record)


def test_a05_end_to_end_bound(record):
    _run(check_a5, record)


def test_a06_scaling_condition(record):
    _run(check_a6, record)


def test_a07_young_sewing(record):
    _run(check_a7, record)


def test_a08_uniqueness_across_bumps(record):
    _run(check_a8, record)


def test_a09_negative_controls(record):
    _run(check_a9, record)


def test_a10_partition_of_unity(record):
    _run(check_a10, record)


if __name__ == "__main__":
    for check in CHECKS:
        ok, detail = check()
        print(_line(check.__name__.replace("check_a", "A"), ok, detail))
