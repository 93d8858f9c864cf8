"""The eight acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line (printed directly and again in the
terminal summary).  Criteria 1, 2, 3 and 6 share one fuzz pass of 100 specs
per case; it takes a few minutes on one core.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from riccati_lab.astro import StellarModel, physicality_report, profile, riccati_from_physics, solve_with_case
from riccati_lab.calculus import constant
from riccati_lab.checks import case_rng, check_case, fuzz_case, random_spec
from riccati_lab.cli import run
from riccati_lab.riccati import RiccatiProblem, detect_classical, sup_residual

pytestmark = pytest.mark.slow

SEED = 0
N_PER_CASE = 100


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"CRITERION {k} {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def worst(results, metric):
    vals = [getattr(r, metric) for r in results if not math.isnan(getattr(r, metric))]
    return (max(vals) if vals else math.nan), len(vals)


@pytest.fixture(scope="module")
def fuzz():
    t0 = time.perf_counter()
    results = [r for case in range(1, 11) for r in fuzz_case(case, N_PER_CASE, SEED)]
    return results, time.perf_counter() - t0


def test_criterion_1_construction_suite(fuzz):
    results, elapsed = fuzz
    cond, _ = worst(results, "condition")
    part, _ = worst(results, "particular")
    fam, _ = worst(results, "family")
    errors = [r for r in results if r.error]
    ok = (len(results) == 10 * N_PER_CASE and not errors and cond <= 1e-9 and part <= 1e-6
          and fam <= 1e-6 and elapsed <= 300.0)
    record(1, ok, f"specs={len(results)} condition={cond:.2e} particular={part:.2e} family={fam:.2e} "
                  f"errors={len(errors)} runtime={elapsed:.0f}s")


def test_criterion_2_oracle_equivalence(fuzz):
    results, _ = fuzz
    err, n = worst(results, "oracle")
    gap, n_poles = worst(results, "pole_gap")
    ok = n == len(results) and err <= 1e-6 and (n_poles == 0 or gap <= 1e-3)
    record(2, ok, f"oracle={err:.2e} over {n} specs, pole gap={gap:.2e} over {n_poles} blow-ups")


def test_criterion_3_theorem_equals_general_formula(fuzz):
    results, _ = fuzz
    err, n = worst(results, "theorem")
    record(3, n == len(results) and err <= 1e-8, f"theorem-vs-general={err:.2e} over {n} specs")


def test_criterion_4_classical_cross_checks():
    I = (0.0, 1.0)
    notes = []

    p = RiccatiProblem.from_exprs("1", "-2", "1", I)
    rep = detect_classical(p)
    fam_ok = rep.sum_zero and all(
        sup_residual(p, rep.sum_zero_family(K), p.grid()) <= 1e-9 for K in (math.inf, 2.0, -5.0))
    notes.append(f"sum-zero={fam_ok}")

    p = RiccatiProblem.from_exprs("-1", "0", "1", I)
    rep = detect_classical(p)
    roots_ok = False
    if rep.constant_discriminant and rep.discriminant_roots:
        yp, ym = rep.discriminant_roots
        xs = p.grid()
        roots_ok = (np.allclose(yp(xs), -1.0) and np.allclose(ym(xs), 1.0)
                    and sup_residual(p, yp, xs) == 0.0 and sup_residual(p, ym, xs) == 0.0)
    notes.append(f"discriminant={roots_ok}")

    lm_ok = True
    worst_res = 0.0
    for lam, mu in [(1.0, 1.0), (2.0, -1.0), (0.3, 1.7), (1.0, 0.5)]:
        b, c = "sin(3*x) + x", "1 + x^2"
        a = f"-(({lam!r})^2*({c}) + ({lam!r})*({mu!r})*({b}))/({mu!r})^2"
        rep = detect_classical(RiccatiProblem.from_exprs(a, b, c, I))
        s = abs(lam) + abs(mu)
        want = np.array([lam, mu]) / s
        got = np.array(rep.lambda_mu_pair) if rep.lambda_mu else np.array([np.nan, np.nan])
        lm_ok &= rep.lambda_mu and rep.lambda_mu_residual <= 1e-9 and (
            np.allclose(got, want, atol=1e-9) or np.allclose(got, -want, atol=1e-9))
        worst_res = max(worst_res, rep.lambda_mu_residual)
    notes.append(f"lambda-mu={lm_ok} (residual {worst_res:.1e})")
    record(4, fam_ok and roots_ok and lm_ok, " ".join(notes))


def test_criterion_5_cross_ratio():
    vals = []
    for i in range(20):
        case = 1 + i % 10
        rng = case_rng(1000 + i, case)
        _, cc = random_spec(case, rng)
        vals.append(check_case(cc, rng, n_family=4, n_oracle=0, n_theorem=0).cross_ratio)
    ok = len(vals) == 20 and all(v <= 1e-8 for v in vals)
    record(5, ok, f"problems=20 worst variation={max(vals):.2e}")


def test_criterion_6_equivalent_formulas(fuzz):
    results, _ = fuzz
    g1, n1 = worst(results, "gs1")
    g2, n2 = worst(results, "gs2")
    ok = n1 > 0 and n2 > 0 and g1 <= 1e-8 and g2 <= 1e-8
    record(6, ok, f"gs1={g1:.2e} gs2={g2:.2e} over {n1} specs with y_p bounded away from zero")


def test_criterion_7_astro_fixed_points():
    t0 = time.perf_counter()
    notes = []

    vac = StellarModel.from_exprs("0", "0", 1.0)
    prof = profile(vac, constant(0.0, vac.domain))
    vac_dev = max(float(np.max(np.abs(getattr(prof, k)))) for k in ("rho", "p_r", "p_perp", "m"))
    notes.append(f"vacuum={vac_dev:.1e}")

    eta0 = 0.15
    m = StellarModel.from_exprs(repr(eta0), "0", 1.0)
    prof = profile(m, constant(0.0, m.domain))
    rho_dev = float(np.max(np.abs(prof.rho - 6 * eta0)))
    mass_dev = prof.mass_roundtrip()
    notes.append(f"rho-6eta0={rho_dev:.1e} mass={mass_dev:.1e}")

    res = 0.0
    for case, f in [(1, "0.3"), (2, "1 + x"), (5, "0.2"), (7, "-1"), (10, "0.4")]:
        sol = solve_with_case("0.1 + 0.05*x", 1.0, case, f)
        res = max(res, sup_residual(riccati_from_physics(sol.model), sol.u, sol.model.grid()))
    notes.append(f"mapped-residual={res:.1e}")

    sol = solve_with_case("0.1*(1 - x)", 1.0, 7, "-1")
    rep = physicality_report(profile(sol.model, sol.u))
    loc = abs(rep["i"].r_star - math.sqrt(0.6)) if rep["i"].r_star is not None else math.inf
    notes.append(f"planted (i) {rep['i'].status} at {loc:.1e} from sqrt(0.6)")

    elapsed = time.perf_counter() - t0
    notes.append(f"runtime={elapsed:.1f}s")
    ok = (vac_dev <= 1e-12 and rho_dev <= 1e-8 and mass_dev <= 1e-6 and res <= 1e-6
          and rep["i"].status == "FAIL" and loc <= 1e-3 and elapsed <= 30.0)
    record(7, ok, " ".join(notes))


def test_criterion_8_determinism(tmp_path):
    runs = {
        "fuzz.csv": ["fuzz", "--case", "all", "--n", "2", "--seed", "42"],
        "case.csv": ["construct", "--case", "4", "--a", "0.5", "--b", "x", "--f", "1 + x", "--C5", "1",
                     "--Cs", "2", "-1"],
        "verify.csv": ["verify", "--case", "1", "--b", "0", "--c", "1", "--f", "4", "--C", "3"],
        "profile.csv": ["star", "--eta", "0.1 + 0.05*x", "--case", "1", "--f", "0.3"],
    }
    same = {}
    for name, argv in runs.items():
        blobs = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            code = run(argv + ["--out", str(out)])
            blobs.append((code, (out / name).read_bytes()))
        same[name] = blobs[0] == blobs[1] and blobs[0][0] == 0
    record(8, all(same.values()), " ".join(f"{k}={'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
