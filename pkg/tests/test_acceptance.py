"""Acceptance suite.

Each criterion records one ``PASS``/``FAIL`` line; ``conftest.py`` prints the
collected lines in the terminal summary.
"""

import numpy as np
import pytest

from defectbeam.core import BeamCoefficients, BoundaryConditions, Grid1D, LoadCase, ModelKind
from defectbeam.defects import (
    asymptotic_sweep,
    defects_from_solution,
    eb_curvature_paths,
    greens_kernel,
    kernel_integral,
    timo_defect_groups,
)
from defectbeam.energy import assemble, energy_gradient, total_energy
from defectbeam.solvers import make_mms, mms_convergence, solve

EB = ModelKind.EULER_BERNOULLI
TIMO = ModelKind.TIMOSHENKO
MESHES = [32, 64, 128, 256]

RESULTS: dict = {}
EB_SOLUTIONS: list = []


def record(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[number])


def solve_tracked(model, *args, **kwargs):
    sol = solve(model, *args, **kwargs)
    if sol.model is EB:
        EB_SOLUTIONS.append(sol)
    return sol


def cantilever_case():
    return (Grid1D.from_elements(1.0, 8), BeamCoefficients.from_stiffness(1.0), LoadCase(1.0),
            BoundaryConditions.cantilever())


@pytest.fixture(scope="module")
def eb_mms():
    co = BeamCoefficients.from_stiffness(1.0, 1e-3)
    return make_mms(EB, {"w": "sin(2*pi*x)"}, co)


@pytest.fixture(scope="module")
def timo_mms():
    co = BeamCoefficients.from_stiffness(1.0, 0.1, 1.0, 1.0)
    return make_mms(TIMO, {"u": "sin(pi*x)", "p": "pi*cos(pi*x)", "n": "-pi**2*sin(pi*x)"}, co)


def test_01_cantilever_tip():
    sol = solve_tracked(EB, *cantilever_case())
    tip = sol.fields["w"].values[-1]
    rel = abs(tip - 0.125) / 0.125
    record(1, rel <= 1e-10, f"tip deflection {tip:.15g}, relative error {rel:.2e}")
    assert rel <= 1e-10


def test_02_eb_mms_convergence(eb_mms):
    rep = mms_convergence(eb_mms, MESHES, "essential", "natural")
    for n in MESHES:
        EB_SOLUTIONS.append(solve(EB, Grid1D.from_elements(1.0, n), eb_mms.coeffs, eb_mms.loads,
                                  eb_mms.bcs("essential", "natural")))
    order, final = rep.min_order("w"), rep.final_error("w")
    ok = order >= 4 and final <= 1e-7
    record(2, ok, f"min order {order:.2f}, final error {final:.2e}")
    assert ok


def test_03_timoshenko_mms_convergence(timo_mms):
    rep = mms_convergence(timo_mms, MESHES, "essential", "natural")
    orders = {ch: rep.min_order(ch) for ch in ("u", "p", "n")}
    ok = min(orders.values()) >= 2
    record(3, ok, "min orders " + ", ".join(f"{k} {v:.2f}" for k, v in orders.items()))
    assert ok


def test_04_gradient_check():
    g = Grid1D.from_elements(1.0, 6)
    cases = (
        (EB, BeamCoefficients.from_stiffness(1.3, 0.2),
         BoundaryConditions.build({"w": 0.1, "w1": 0.2}, {"T0": 0.5, "T1": -0.3, "T2": 0.2}),
         LoadCase(lambda x: np.cos(3 * x))),
        (TIMO, BeamCoefficients.from_stiffness(1.3, 0.2, 2.0, 0.7),
         BoundaryConditions.build({"u": 0.1, "p": 0.2}, {"T0": 0.5, "T1": -0.3, "T2": 0.2}),
         LoadCase(lambda x: np.cos(3 * x), 1.0, lambda x: x)),
    )
    rng = np.random.default_rng(2024)
    worst = 0.0
    for model, co, bcs, loads in cases:
        disc = assemble(model, g, co, loads, bcs)
        step = 1e-4
        for _ in range(20):
            v = rng.standard_normal(disc.n_free)
            grad = energy_gradient(disc, v)
            fd = np.empty_like(v)
            for i in range(len(v)):
                e = np.zeros_like(v)
                e[i] = step
                fd[i] = (total_energy(model, disc.state(v + e), loads, bcs, co, g)
                         - total_energy(model, disc.state(v - e), loads, bcs, co, g)) / (2 * step)
            worst = max(worst, np.linalg.norm(grad - fd) / np.linalg.norm(grad))
    record(4, worst <= 1e-6, f"worst relative gradient mismatch {worst:.2e} over 40 states")
    assert worst <= 1e-6


def test_05_direct_vs_descent(eb_mms, timo_mms):
    cases = [(EB, *cantilever_case())]
    cases += [(EB, Grid1D.from_elements(1.0, n), eb_mms.coeffs, eb_mms.loads, eb_mms.bcs("essential", "natural"))
              for n in MESHES]
    cases += [(TIMO, Grid1D.from_elements(1.0, n), timo_mms.coeffs, timo_mms.loads,
               timo_mms.bcs("essential", "natural")) for n in MESHES]
    worst = 0.0
    for model, *args in cases:
        a = solve_tracked(model, *args)
        b = solve_tracked(model, *args, method="cg")
        worst = max(worst, np.linalg.norm(a.dofs - b.dofs) / np.linalg.norm(a.dofs))
    record(5, worst <= 1e-8, f"worst relative DOF difference {worst:.2e} over {len(cases)} solves")
    assert worst <= 1e-8


def test_06_zero_torsion(eb_mms):
    # runs after 1, 2 and 5 so that every Euler-Bernoulli solve above is covered
    sols = EB_SOLUTIONS or [solve(EB, *cantilever_case())]
    worst = max(np.max(np.abs(defects_from_solution(s).torsion_T112.values)) for s in sols)
    record(6, worst <= 1e-12, f"max |torsion| {worst:.1e} over {len(sols)} solves")
    assert worst <= 1e-12


def test_07_curvature_paths(eb_mms):
    sol = solve_tracked(EB, Grid1D.from_elements(1.0, MESHES[-1]), eb_mms.coeffs, eb_mms.loads,
                        eb_mms.bcs("essential", "natural"))
    paths = eb_curvature_paths(sol)
    names = list(paths)
    spread = max(np.max(np.abs(paths[a] - paths[b])) for i, a in enumerate(names) for b in names[i + 1:])
    limit = 10 * sol.grid.h**2
    record(7, spread <= limit, f"path spread {spread:.2e}, limit {limit:.2e}")
    assert spread <= limit


def test_08_helmholtz_sweep():
    rep = asymptotic_sweep([1e-1, 1e-2, 1e-3, 1e-4], f0=lambda x: np.sin(np.pi * x), b=1.0, length=1.0)
    ok = rep.monotone and 0.8 <= rep.slope <= 1.2
    record(8, ok, f"slope {rep.slope:.3f}, monotone {rep.monotone}, errors "
           + ", ".join(f"{e:.2e}" for e in rep.errors))
    assert ok


def test_09_timoshenko_groups(timo_mms):
    sol = solve(TIMO, Grid1D.from_elements(1.0, 256), timo_mms.coeffs, timo_mms.loads,
                timo_mms.bcs("essential", "natural"))
    res = timo_defect_groups(sol).residuals
    ok = res["group2_sup"] <= 1e-4 and res["group3_sup"] <= 1e-6
    record(9, ok, f"group 2 {res['group2_sup']:.2e}, group 3 {res['group3_sup']:.2e}")
    assert ok


def test_10_penalty_limit():
    def w_eb(x):
        return x**4 / 24 - x**3 / 6 + x**2 / 4

    grid = Grid1D.from_elements(1.0, 64)
    bcs = BoundaryConditions.build({"u": 0, "p": 0})
    xs = np.linspace(0.0, 1.0, 513)
    errs = []
    for k in range(2, 6):
        co = BeamCoefficients.from_stiffness(1.0, 0.0, 10.0**k, 10.0**k)
        sol = solve(TIMO, grid, co, LoadCase(1.0, 0.0, 0.0), bcs)
        errs.append(np.max(np.abs(sol.evaluate("u", xs) - w_eb(xs))))
    ok = all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 1e-3
    record(10, ok, "errors " + ", ".join(f"{e:.2e}" for e in errs))
    assert ok


def test_11_kernel_integral():
    worst = 0.0
    for b, c in ((1.0, 0.04), (2.0, 0.02)):
        worst = max(worst, abs(kernel_integral(lambda r: greens_kernel(b, c, r)) - c / b))
    record(11, worst <= 1e-6, f"worst |integral - c/b| {worst:.1e}")
    assert worst <= 1e-6
