"""Acceptance criteria, one test group per criterion.

Each check is recorded under its criterion key and summarized at the end of
the run (see ``conftest.py``). A check that cannot be met by the
discretization at the stated size is kept at its stated tolerance and marked
as a strict expected failure, so it still prints as failing.
"""
import time

import numpy as np
import pytest

from yaglom import (
    ContourConfig,
    SimulationConfig,
    choose_radii,
    choose_radius,
    decay_bound_taylor,
    decay_bound_zolotarev,
    interpolation_baseline,
    load_model,
    mean_matrix_and_rho,
    moments_from_coefficients,
    moments_from_recurrence,
    psi_p,
    simulate_returned_process,
    solve_dense,
    solve_dense_2d,
    solve_krylov_2d,
    solve_lowrank,
    solve_lowrank_2d,
    total_variation,
)
from yaglom import numkernel as nk
from yaglom.errors import IllConditionedWarning
from yaglom.oracles import linfrac2d_grid, linfrac_qsd

slow = pytest.mark.slow


def _timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def _fmt(x):
    return f"{x:.3g}"


@pytest.fixture(scope="module")
def example2_8192(poly776):
    return _timed(solve_dense, poly776, ContourConfig(8192))


@pytest.fixture(scope="module")
def table1_256(poly2d):
    return _timed(solve_krylov_2d, poly2d, 256)


# --------------------------------------------------------------------------
# 1. one-type closed form
# --------------------------------------------------------------------------

def test_c1_closed_form_1d(acceptance, linfrac_half):
    with acceptance("1") as c:
        res, elapsed = _timed(solve_dense, linfrac_half, ContourConfig(512))
        j = np.arange(1, res.g.size)
        exact = linfrac_qsd(0.6, 0.3, j)
        keep = exact >= 1e-14
        rel = np.abs(res.g[1:][keep] - exact[keep]) / exact[keep]
        c.check("max rel error <= 1e-10 where g_j >= 1e-14", rel.max() <= 1e-10,
                f"{_fmt(rel.max())} over j = 1..{j[keep][-1]}")
        c.check("runtime < 5 s", elapsed < 5, f"{elapsed:.2f} s")


# --------------------------------------------------------------------------
# 2. functional-equation residual
# --------------------------------------------------------------------------

@slow
def test_c2_residual_convergence(acceptance, poly776, example2_8192):
    with acceptance("2") as c:
        coarse = solve_dense(poly776, ContourConfig(2048))
        fine, elapsed = example2_8192
        c.check("Res decreases from n=2048 to n=8192", fine.residual < coarse.residual,
                f"{_fmt(coarse.residual)} -> {_fmt(fine.residual)}")
        c.check("Res <= 1e-10 at n=8192", fine.residual <= 1e-10, _fmt(fine.residual))
        c.check("|sum - 1| <= 1e-8 at n=8192", abs(fine.sum - 1) <= 1e-8,
                f"{_fmt(fine.sum - 1)} (n=2048: {_fmt(coarse.sum - 1)})")
        c.check("runtime < 60 s at n=8192", elapsed < 60, f"{elapsed:.1f} s")


# --------------------------------------------------------------------------
# 3. hard regime
# --------------------------------------------------------------------------

@slow
def test_c3_dense_defects(acceptance, poly942):
    with acceptance("3") as c:
        res = solve_dense(poly942, ContourConfig(4096))
        low = float(res.g.min())
        c.check("dense n=4096 has negative coefficients of order 1e-5",
                low < 0 and 1e-6 <= -low <= 1e-4, f"min g_j = {_fmt(low)}")
        c.check("dense n=4096 sum visibly off one (|sum - 1| > 1e-6)",
                abs(res.sum - 1) > 1e-6, _fmt(res.sum - 1))


@pytest.fixture(scope="module")
def example3_lowrank(poly942):
    return _timed(solve_lowrank, poly942, ContourConfig(131072), 1e-10)


@slow
def test_c3_lowrank_repair(acceptance, example3_lowrank):
    with acceptance("3") as c:
        res, elapsed = example3_lowrank
        c.check("low-rank n=131072 |sum - 1| <= 1e-6", abs(res.sum - 1) <= 1e-6,
                _fmt(res.sum - 1))
        c.check("low-rank n=131072 Res <= 1e-9", res.residual <= 1e-9, _fmt(res.residual))
        c.check("runtime < 10 min", elapsed < 600, f"{elapsed:.0f} s")


@slow
@pytest.mark.xfail(strict=True, reason="ACA rank keeps growing with n, about 650 at n=131072")
def test_c3_aca_rank(acceptance, example3_lowrank):
    with acceptance("3") as c:
        res, _ = example3_lowrank
        c.check("ACA rank < 500 at n=131072", res.rank < 500, str(res.rank))


# --------------------------------------------------------------------------
# 4. decay envelope
# --------------------------------------------------------------------------

@slow
def test_c4_decay_envelope(acceptance, poly776, example2_8192):
    with acceptance("4") as c:
        res, _ = example2_8192
        psi = psi_p(poly776)
        j = np.arange(10, 301)
        C = float(np.max(res.g[j] * psi**j))
        c.check("g_j <= C psi^-j with C <= 10 for 10 <= j <= 300", C <= 10,
                f"C = {_fmt(C)}, psi = {psi:.6f}")


# --------------------------------------------------------------------------
# 5. singular-value bounds
# --------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["linfrac_p055", "linfrac_p095"])
def test_c5_singular_value_bounds(acceptance, name):
    with acceptance("5") as c:
        P = load_model(f"builtin:{name}")
        n = 1000
        start = time.perf_counter()
        r = choose_radius(P)
        x = r * np.exp(2j * np.pi * np.arange(n) / n)
        s = nk.singular_values(1.0 / (x[None, :] - P(x)[:, None]))
        elapsed = time.perf_counter() - start
        kk = np.nonzero(s / s[0] >= 1e-14)[0]
        taylor = np.array([decay_bound_taylor(P, r, n, k) for k in kk])
        zolo = np.array([decay_bound_zolotarev(P, r, k) for k in kk])
        worst_t = float(np.max(s[kk] / taylor))
        worst_z = float(np.max(s[kk] / s[0] / zolo))
        c.check(f"{name}: sigma_k+1 <= Taylor bound, k <= {kk[-1]}", worst_t <= 1,
                f"max ratio {_fmt(worst_t)}")
        c.check(f"{name}: sigma_k+1/sigma_1 <= Zolotarev bound, k <= {kk[-1]}", worst_z <= 1,
                f"max ratio {_fmt(worst_z)}")
        c.check(f"{name}: runtime < 2 min", elapsed < 120, f"{elapsed:.1f} s")


# --------------------------------------------------------------------------
# 6. low-rank vs dense
# --------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["linfrac_half", "poly776"])
def test_c6_lowrank_equals_dense(acceptance, name, request):
    with acceptance("6") as c:
        P = request.getfixturevalue(name)
        cfg = ContourConfig(512)
        diff = np.max(np.abs(solve_lowrank(P, cfg).g - solve_dense(P, cfg).g))
        c.check(f"{name}: max |lowrank - dense| <= 1e-10 at n=512", diff <= 1e-10, _fmt(diff))


# --------------------------------------------------------------------------
# 7. two-type closed form
# --------------------------------------------------------------------------

def _check_2d_closed_form(c, label, res, model, elapsed):
    exact = linfrac2d_grid(model, res.n)
    err = np.abs(res.g - exact) / np.where(exact > 0, exact, 1.0)
    big = exact >= 1e-10
    band = (exact >= 1e-15) & ~big
    c.check(f"{label}: rel error <= 1e-6 where g >= 1e-10", err[big].max() <= 1e-6,
            _fmt(err[big].max()))
    c.check(f"{label}: rel error <= 1e-3 where 1e-15 <= g < 1e-10", err[band].max() <= 1e-3,
            _fmt(err[band].max()))
    c.check(f"{label}: runtime < 5 min", elapsed < 300, f"{elapsed:.0f} s")


@pytest.mark.xfail(strict=True, reason="dense n=64 discretization error is about 1.5e-4")
def test_c7_dense_n64(acceptance, linfrac2d):
    with acceptance("7") as c:
        res, elapsed = _timed(solve_dense_2d, linfrac2d, 64)
        _check_2d_closed_form(c, "dense n=64", res, linfrac2d.model, elapsed)


@slow
def test_c7_lowrank_n256(acceptance, linfrac2d):
    with acceptance("7") as c:
        res, elapsed = _timed(solve_lowrank_2d, linfrac2d, 256)
        _check_2d_closed_form(c, "low-rank n=256", res, linfrac2d.model, elapsed)


# --------------------------------------------------------------------------
# 8. two-type random polynomial model
# --------------------------------------------------------------------------

def _outside_corner(g, size=64):
    mask = np.ones(g.shape, dtype=bool)
    mask[:size, :size] = False
    return float(np.max(g[mask]))


@slow
def test_c8_table_model(acceptance, poly2d, table1_256):
    with acceptance("8") as c:
        res, elapsed = table1_256
        _, rho = mean_matrix_and_rho(poly2d)
        r1, r2 = choose_radii(poly2d)
        c.check("rho within 1e-3 of 0.5884", abs(rho - 0.5884) <= 1e-3, f"{rho:.6f}")
        c.check("radii within 1e-3 of (1.2462, 1.4104)",
                abs(r1 - 1.2462) <= 1e-3 and abs(r2 - 1.4104) <= 1e-3, f"({r1:.5f}, {r2:.5f})")
        c.check("|sum - 1| <= 1e-6 at n=256", abs(res.sum - 1) <= 1e-6, _fmt(res.sum - 1))
        c.check("g >= -1e-10", res.g.min() >= -1e-10, f"min {_fmt(res.g.min())}")
        c.check("solved at n=256", res.n == 256,
                f"{res.method}, residual {_fmt(res.residual)}, {elapsed:.0f} s")


@slow
@pytest.mark.xfail(strict=True, reason="n=256 discretization leaves about 1e-17 past the corner")
def test_c8_tail_n256(acceptance, table1_256):
    with acceptance("8") as c:
        res, _ = table1_256
        tail = _outside_corner(res.g)
        c.check("g <= 1e-20 outside the 64x64 corner at n=256", tail <= 1e-20, _fmt(tail))


@slow
@pytest.mark.xfail(strict=True, reason="n=512 reaches about 4e-24 past the corner")
def test_c8_tail_n512(acceptance, poly2d):
    with acceptance("8") as c:
        res, elapsed = _timed(solve_krylov_2d, poly2d, 512, compute_residual=False)
        tail = _outside_corner(res.g)
        c.check("g <= 1e-31 outside the 64x64 corner at n=512", tail <= 1e-31,
                f"{_fmt(tail)}, {elapsed:.0f} s")


# --------------------------------------------------------------------------
# 9. baseline failure modes
# --------------------------------------------------------------------------

def test_c9_interpolation_fails(acceptance, linfrac_half):
    with acceptance("9") as c:
        with pytest.warns(IllConditionedWarning):
            res = interpolation_baseline(linfrac_half)
        j = np.arange(1, res.g.size)
        exact = linfrac_qsd(0.6, 0.3, j)
        err = float(np.max(np.abs(res.g[1:] - exact) / exact))
        c.check("interpolation max rel error >= 1e-2", err >= 1e-2,
                f"{_fmt(err)}, {int(np.sum(res.g[1:] < 0))} negative")


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_c9_simulation(acceptance, linfrac_half, seed):
    with acceptance("9") as c:
        emp = simulate_returned_process(linfrac_half,
                                        SimulationConfig(generations=1_000_000, seed=seed))
        oracle = linfrac_qsd(0.6, 0.3, np.arange(emp.width + 1))
        tv = total_variation(emp, oracle)
        est = emp.as_coefficients()[1:41]
        zeros = np.nonzero((est == 0) & (oracle[1:41] > 0))[0] + 1
        c.check(f"seed {seed}: TV <= 0.01", tv <= 0.01, _fmt(tv))
        c.check(f"seed {seed}: zero estimate for some j <= 40", zeros.size > 0,
                f"first zero at j = {zeros[0] if zeros.size else None}")


# --------------------------------------------------------------------------
# 10. moments
# --------------------------------------------------------------------------

def _moment_agreement(res, P, H=5):
    coef = moments_from_coefficients(res, H)
    rec = moments_from_recurrence(P, coef[1], H)
    return max(abs(coef[h] - rec[h]) / abs(rec[h]) for h in range(2, H + 1))


def test_c10_moments_example1(acceptance, linfrac_half):
    with acceptance("10") as c:
        res = solve_dense(linfrac_half, ContourConfig(512))
        worst = _moment_agreement(res, linfrac_half)
        c.check("linfrac: h=2..5 rel diff <= 1e-8", worst <= 1e-8, _fmt(worst))


@slow
def test_c10_moments_example2(acceptance, poly776, example2_8192):
    with acceptance("10") as c:
        worst = _moment_agreement(example2_8192[0], poly776)
        c.check("m=0.776 at n=8192: h=2..5 rel diff <= 1e-8", worst <= 1e-8, _fmt(worst))


# --------------------------------------------------------------------------
# T. timing shape
# --------------------------------------------------------------------------

@slow
def test_timing_subquadratic(acceptance, poly776):
    with acceptance("T") as c:
        n1, n2 = 16384, 65536
        times = []
        for n in (n1, n2):
            _, elapsed = _timed(solve_lowrank, poly776, ContourConfig(n), compute_residual=False)
            times.append(elapsed)
        ratio = times[1] / times[0]
        limit = 2 * (n2 / n1) ** 2
        c.check(f"t({n2}) / t({n1}) <= 2 (n2/n1)^2", ratio <= limit,
                f"{times[0]:.2f} s -> {times[1]:.2f} s, ratio {ratio:.1f} <= {limit:.0f}")
