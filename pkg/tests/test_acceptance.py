"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Heavy: the whole module takes tens of minutes on one core.  Artifacts go to
$CHEEGERPACK_ACCEPTANCE_OUT when set, else to pytest's temporary directory.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage
from scipy.spatial import ConvexHull

from cheegerpack.cli import main
from cheegerpack.domains import square
from cheegerpack.functional import EnergyParams, energy_and_gradient, evaluate
from cheegerpack.grid import DomainMask, GridSpec, PhaseSystem
from cheegerpack.domains import Rectangle
from cheegerpack.klr import ConvexPolygon, analytic_alpha_cheeger_ball, cheeger_exact
from cheegerpack.optimizer import BoundProblem, OptimizerOptions, minimize
from cheegerpack.pipeline import RunConfig, run

from oracles import exhaustive_two_disk_product, rigid_five_in_square

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    env = os.environ.get("CHEEGERPACK_ACCEPTANCE_OUT")
    if env:
        path = Path(env)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("acceptance")


def cli(out: Path, *argv) -> dict:
    code = main([*argv, "--out", str(out)])
    assert code == 0, f"cli exited with {code}"
    return json.loads((out / "result.json").read_text())


def hull_polygon(seed, n=12):
    pts = np.random.default_rng(seed).uniform(size=(n, 2))
    return pts[ConvexHull(pts).vertices]


def test_c01_klr_closed_forms(criterion):
    t0 = time.perf_counter()
    sq = cheeger_exact(ConvexPolygon(square().vertices))
    tri = cheeger_exact(ConvexPolygon([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]]))
    seconds = time.perf_counter() - t0
    # (sqrt3/4)(1 - 2 sqrt3 t)^2 = pi t^2 as a quadratic in t
    a = math.sqrt(3) / 4
    A, B, C = 12 * a - math.pi, -4 * math.sqrt(3) * a, a
    t_tri = (-B - math.sqrt(B * B - 4 * A * C)) / (2 * A)
    e_sq = abs(sq.h - (2 + math.sqrt(math.pi)))
    e_tri = abs(tri.h - 1 / t_tri)
    ok = criterion(
        "C1 KLR oracle",
        e_sq <= 1e-10 and e_tri <= 1e-10 and seconds < 1.0,
        f"square |h-(2+sqrt pi)|={e_sq:.1e}, triangle |h-1/t|={e_tri:.1e}, {seconds:.3f}s (tol 1e-10, <1s)",
    )
    assert ok


def test_c02_compare_against_oracle(criterion, outdir):
    res = cli(outdir / "c02_square", "compare")
    m = res["stages"][-1]["m"]
    err = res["relative_error"]
    ok = criterion(
        "C2a compare unit square",
        m >= 300 and err <= 0.01,
        f"m={m}, relative error {err:.4f} (0.5-level {res['relative_error_half_level']:.4f}; tol 0.01)",
    )
    errs = []
    for seed in (1, 2):
        dom = json.dumps({"type": "polygon", "vertices": hull_polygon(seed).tolist()})
        r = cli(outdir / f"c02_hull{seed}", "compare", f"domain={dom}")
        errs.append(r["relative_error"])
    ok2 = criterion(
        "C2b compare random hulls",
        max(errs) <= 0.015,
        "relative errors " + ", ".join(f"{e:.4f}" for e in errs) + " (tol 0.015)",
    )
    assert ok and ok2


def test_c03_alpha_cheeger_of_disk(criterion):
    R = 0.4
    errs, areas = [], []
    for alpha in (0.75, 1.0, 2.0):
        r = run(
            RunConfig(
                alpha=alpha,
                domain={"type": "disk", "center": [0.0, 0.0], "radius": R},
                coarse_eps_factor=2.0,
                final_eps_steps=3,
            )
        )
        errs.append(abs(r.sharp_eps.per_phase_h_alpha[0] / analytic_alpha_cheeger_ball(2, R, alpha) - 1))
        areas.append(r.sharp.per_phase_area[0])
    ok = criterion(
        "C3 alpha-Cheeger of disk R=0.4",
        max(errs) <= 0.02 and all(b >= a for a, b in zip(areas, areas[1:])),
        "errors " + ", ".join(f"{e:.4f}" for e in errs) + " (tol 0.02); 0.5-level areas "
        + ", ".join(f"{a:.6f}" for a in areas) + " (nondecreasing)",
    )
    assert ok


def test_c04_maximin_packing(criterion, outdir):
    two = cli(outdir / "c04_k2", "pack", "--k", "2", "--alpha", "0.5001", "--p", "50")
    r2 = two["packing"]["value"]
    ok = criterion("C4a pack k=2", abs(r2 - (2 - math.sqrt(2)) / 2) <= 1e-3, f"r={r2:.7f} vs 0.2928932 (tol 1e-3)")

    r_rigid, _ = rigid_five_in_square()
    five = cli(outdir / "c04_k5", "pack", "--k", "5", "--alpha", "0.5001", "--p", "50", "--seeds", "0..3", "--workers", "1")
    r5 = five["packing"]["value"]
    rel = abs(r5 / r_rigid - 1)
    energies = ", ".join(f"{s}:{e:.2f}" for s, e in five["seed_energies"].items())
    ok2 = criterion(
        "C4b pack k=5",
        rel <= 0.005,
        f"r={r5:.7f} vs rigid {r_rigid:.7f}, rel {rel:.1e} (tol 5e-3); best of seed energies {energies}",
    )
    assert ok and ok2


def test_c05_product_packing(criterion, outdir):
    dom = json.dumps({"type": "rectangle", "lower": [0, 0], "upper": [2, 1]})
    res = cli(outdir / "c05", "pack", "--k", "2", "--packing", "product", f"domain={dom}")
    value = res["packing"]["value"]
    coarse = exhaustive_two_disk_product(0.05)
    ok = criterion(
        "C5 product packing 2x1",
        abs(value - 2 * math.log(0.5)) <= 1e-4 and coarse <= value + 1e-12 and abs(coarse - value) <= 1e-4,
        f"sum log r={value:.8f} vs {2 * math.log(0.5):.8f} (tol 1e-4); exhaustive grid best {coarse:.8f}",
    )
    assert ok


def test_c06_gradient_suite(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    shape = Rectangle([0.0, 0.0], [1.0, 1.0])
    g = GridSpec.for_shape(shape, 8)
    mask = DomainMask.build(g, shape)
    h = 1e-6
    for i in range(50):
        k = 1 + i % 3
        sys_ = PhaseSystem(g, mask, rng.uniform(0.05, 0.95, size=(k, 8, 8)))
        prm = EnergyParams(float(rng.uniform(0.55, 2.0)), float(rng.uniform(0.05, 0.3)), p=float(rng.uniform(1, 4)))
        _, grad = energy_and_gradient(sys_, prm)
        fd = np.empty_like(grad)
        for idx in np.ndindex(grad.shape):
            up, dn = sys_.phases.copy(), sys_.phases.copy()
            up[idx] += h
            dn[idx] -= h
            fd[idx] = (evaluate(PhaseSystem(g, mask, up), prm).total - evaluate(PhaseSystem(g, mask, dn), prm).total) / (2 * h)
        worst = max(worst, float(np.max(np.abs(grad - fd)) / np.max(np.abs(fd))))
    ok = criterion("C6 gradient suite", worst <= 1e-5, f"50 systems, k=1..3, max |g-fd|/max|fd| = {worst:.1e} (tol 1e-5)")
    assert ok


def test_c07_optimizer_suite(criterion):
    def mono(tr):
        return all(b <= a for a, b in zip(tr, tr[1:]))

    n = 10
    quad = BoundProblem(lambda x: (float(np.sum((x - 0.3) ** 2)), 2 * (x - 0.3)), np.zeros(n), np.ones(n))
    x1, r1 = minimize(quad, np.zeros(n))
    act = BoundProblem(lambda x: (float(np.sum((x + 1) ** 2)), 2 * (x + 1)), np.zeros(n), np.ones(n))
    x2, r2 = minimize(act, np.full(n, 0.5))

    def rosen(x):
        a, b = x
        return (1 - a) ** 2 + 100 * (b - a * a) ** 2, np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])

    ros = BoundProblem(rosen, [-2.0, -2.0], [2.0, 2.0])
    x3, r3 = minimize(ros, np.array([-1.2, 1.0]))
    x3b, r3b = minimize(ros, np.array([-1.2, 1.0]))
    checks = {
        "quadratic": r1.converged and np.max(np.abs(x1 - 0.3)) <= 1e-7,
        "active bound": r2.converged and np.array_equal(x2, np.zeros(n)),
        "rosenbrock": r3.converged and np.max(np.abs(x3 - 1)) <= 1e-5,
        "monotone": all(mono(r.value_trace) for r in (r1, r2, r3)),
        "bitwise": r3.value_trace == r3b.value_trace and np.array_equal(x3, x3b),
        "n+10": r1.iterations <= n + 10,
    }
    ok = criterion("C7 optimizer suite", all(checks.values()), ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok


def test_c08_five_cell_cluster(criterion, outdir):
    out = outdir / "c08"
    res = cli(out, "cluster", "--k", "5", "--alpha", "1", "target_resolution=150")
    areas = res["sharp"]["per_phase_area"]
    hs = res["sharp"]["per_phase_h_alpha"]
    from cheegerpack.io import read_field

    u = np.array([read_field(out / f"phase_{i}.f64") for i in range(5)])
    overlap = int(np.sum(np.sum(u > 0.5, axis=0) > 1))
    competitor = 5 * 2 / 0.15
    ok = criterion(
        "C8 five-cell cluster",
        all(a > 0 for a in areas) and overlap == 0 and sum(hs) < competitor,
        f"sum h1={sum(hs):.3f} < {competitor:.3f}, overlapping nodes={overlap}, areas "
        + ", ".join(f"{a:.4f}" for a in areas),
    )
    assert ok


def periodic_components(mask: np.ndarray) -> int:
    """Connected components of a boolean image on the flat torus."""
    labels, n = ndimage.label(mask)
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in ((labels[0], labels[-1]), (labels[:, 0], labels[:, -1])):
        for x, y in zip(a, b):
            if x and y:
                parent[find(x)] = find(y)
    return len({find(i) for i in range(1, n + 1)})


def test_c09_perimeter_product(criterion, outdir):
    out = outdir / "c09"
    res = cli(out, "perimeter-product", "--k", "8")
    areas = np.array(res["sharp"]["per_phase_area"])
    spread = float(np.max(np.abs(areas / areas.mean() - 1)))
    from cheegerpack.io import read_field

    pieces = [periodic_components(read_field(out / f"phase_{i}.f64") > 0.5) for i in range(8)]
    ok = criterion(
        "C9 perimeter product, 8 periodic cells",
        spread <= 0.02 and pieces == [1] * 8,
        f"max area deviation {spread:.4f} (tol 0.02); components per cell {pieces} (all 1); "
        f"objective {res['final_energy']:.6f}; m={res['stages'][-1]['m']}; junctions: inspect {out / 'phases.png'}",
    )
    assert ok


def test_c10_cube_smoke(criterion, outdir):
    out = outdir / "c10"
    res = cli(out, "cheeger", 'domain={"type": "cube"}', "target_resolution=64")
    h = res["sharp"]["per_phase_h_alpha"][0]
    traces = {}
    for line in (out / "trace.csv").read_text().splitlines()[1:]:
        stage, _, _, _, value = line.split(",")
        traces.setdefault(stage, []).append(float(value))
    mono = all(all(b <= a for a, b in zip(t, t[1:])) for t in traces.values())
    m = res["stages"][-1]["m"]
    ok = criterion(
        "C10 3-D cube smoke",
        math.isfinite(h) and mono and m >= 64 and (out / "surface_0.png").exists(),
        f"m={m}, h1={h:.4f}, traces monotone={mono}, render={'surface_0.png'}",
    )
    assert ok
