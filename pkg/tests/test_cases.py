import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riccati_lab.cases import (
    CASE_MANIFEST,
    CaseSpec,
    condition_sides,
    construct,
    manifest_json,
    seed_relation_check,
    theorem_family,
    validate_condition,
)
from riccati_lab.checks import case_rng, check_case, random_spec
from riccati_lab.errors import GuardViolation, RadicandNegative, SpecError
from riccati_lab.riccati import detect_classical, family_from_bc, integrate_numeric, sup_residual

I01 = (0.0, 1.0)
XS = np.linspace(0.0, 1.0, 33)

# integral of exp(t^2) over [0, 1]; composite Simpson with 2^20 panels
GAUSS_GROWTH = 1.4626517459071816


def spec(case, **kw):
    return CaseSpec.from_exprs(case, kw.pop("interval", I01), **kw)


# worked examples ------------------------------------------------------------------------

def test_case1_trivial():
    cc = construct(spec(1, f="0", b="0", c="1"))
    assert np.all(cc.problem.a(XS) == 0.0)
    assert np.all(cc.y_p(XS) == 0.0)
    assert np.allclose(cc.general(2.0, XS), 1 / (2 - XS), rtol=1e-14)
    assert cc.condition_residual == 0.0
    assert seed_relation_check(cc) == 0.0
    assert cc.general.formula == "C0"


def test_case1_gaussian_growth():
    cc = construct(spec(1, f="4", b="0", c="1"))
    assert np.allclose(cc.y_p(XS), XS, atol=1e-14)
    assert np.allclose(cc.problem.a(XS), 1 - XS ** 2, atol=1e-13)
    assert cc.condition_residual <= 1e-9
    assert seed_relation_check(cc) <= 1e-8
    # closed form at x = 1 from the frozen quadrature oracle
    assert cc.general(2.0, 1.0) == pytest.approx(math.e / (2.0 - GAUSS_GROWTH) + 1.0, rel=1e-10)
    tr = integrate_numeric(cc.problem, 0.0, 0.0, 1, 0.4)
    C0 = cc.general.match_constant(0.0, 0.0)
    err = np.abs(cc.general(C0, tr.x) - tr.y) / np.maximum(1.0, np.abs(tr.y))
    assert np.max(err) <= 1e-6


def test_case7_constant_coefficients():
    cc = construct(spec(7, f="2", b="0", c="1"))
    assert np.all(cc.problem.a(XS) == -1.0)
    assert np.all(cc.y_p(XS) == 1.0)
    assert validate_condition(cc) == 0.0
    want = np.exp(2 * XS) / (3.0 - (np.exp(2 * XS) - 1) / 2) + 1
    assert np.allclose(cc.general(3.0, XS), want, rtol=1e-13)
    # with the integral anchored at 0 the other constant root sits at C = -1/2
    assert np.allclose(cc.general(-0.5, XS), -1.0, atol=1e-13)


def test_case10_reproduces_case7_family():
    c7 = construct(spec(7, f="2", b="0", c="1"))
    c10 = construct(spec(10, f="1", b="0", c="1", branch=1))
    assert np.all(c10.problem.a(XS) == -1.0)
    assert np.all(c10.y_p(XS) == 1.0)
    assert seed_relation_check(c10) == 0.0
    for C in (3.0, -2.0, 0.25):
        K = c10.general.match_constant(0.0, float(c7.general(C, 0.0)))
        xs = c7.general.safe_grid(C)
        assert np.max(np.abs(c10.general(K, xs) - c7.general(C, xs))) <= 1e-12


def test_interior_base_point():
    cc = construct(spec(1, f="4", b="0", c="1", x0=0.5))
    assert cc.general.x0 == 0.5
    assert abs(cc.y_p(0.5)) < 1e-15
    assert cc.condition_residual <= 1e-9


# guards and schema -----------------------------------------------------------------------

def test_guard_c_vanishing_at_left_end():
    with pytest.raises(GuardViolation) as info:
        construct(spec(1, f="1", b="0", c="x"))
    assert info.value.x == 0.0 and "c" in info.value.guard


def test_guard_sign_change_is_bisected():
    with pytest.raises(GuardViolation) as info:
        construct(spec(7, f="1", b="0", c="x - 0.3"))
    assert info.value.x == pytest.approx(0.3, abs=1e-11)


def test_radicand_negative_located():
    with pytest.raises(RadicandNegative) as info:
        construct(spec(2, f="0.6 - x", b="0", c="1"))
    assert info.value.x == pytest.approx(0.6, abs=1e-11)


def test_case3_integral_term_guard():
    # L = int(a + f/4c) - C3 = x - 1 vanishes at the right end
    with pytest.raises(GuardViolation) as info:
        construct(spec(3, f="0", a="1", c="1", constants={"C3": 1.0}, branch=-1))
    assert info.value.x == pytest.approx(1.0)


def test_case8_requires_nonvanishing_generator():
    with pytest.raises(GuardViolation) as info:
        construct(spec(8, f="x - 0.5", a="1", c="1"))
    assert "f4" in info.value.guard


@pytest.mark.parametrize(
    "kw",
    [
        dict(f="1", b="0"),                      # missing c
        dict(f="1", b="0", c="1", a="1"),        # extra a
        dict(f="1", b="0", c="1", branch=1),     # no branch for case 1
        dict(f="1", b="0", c="1", constants={"C3": 1.0}),
        dict(f="1", b="0", c="1", interval=(1.0, 0.0)),
        dict(f="1", b="0", c="1", x0=2.0),
    ],
)
def test_schema_errors(kw):
    with pytest.raises(SpecError):
        spec(1, **kw)


def test_bad_branch_and_unknown_case():
    with pytest.raises(SpecError):
        spec(2, f="1", b="0", c="1", branch=0)
    with pytest.raises(SpecError):
        spec(11, f="1", b="0", c="1")


def test_defaults_from_manifest():
    s = spec(3, f="1", a="1", c="1")
    assert s.branch == -1 and dict(s.constants) == {"C3": 0.0}
    assert spec(4, f="1", a="1", b="0").branch == 1


def test_manifest_is_published_and_consistent():
    data = json.loads(manifest_json())
    assert sorted(map(int, data)) == list(range(1, 11))
    for k, entry in CASE_MANIFEST.items():
        assert entry["completes"] not in entry["free"]
        assert sorted(entry["free"] + [entry["completes"]]) == ["a", "b", "c"]
        assert entry["branch"] == (k in (2, 3, 4, 10))


def test_digest_is_stable_and_sensitive():
    s1 = spec(1, f="4", b="0", c="1")
    s2 = spec(1, f="4", b="0", c="1")
    s3 = spec(1, f="4", b="0", c="1", constants={"C1": 0.5})
    assert s1.digest() == s2.digest() != s3.digest()
    assert len(s1.digest()) == 16


# branch consistency ----------------------------------------------------------------------

def test_case10_branches_differ_by_twice_the_generator():
    kw = dict(f="1 + x^2", b="sin(x)", c="2 + x")
    plus = construct(spec(10, branch=1, **kw))
    minus = construct(spec(10, branch=-1, **kw))
    assert np.allclose(plus.y_p(XS) - minus.y_p(XS), 2 * (1 + XS ** 2), atol=1e-14)
    assert seed_relation_check(plus) <= 1e-12 and seed_relation_check(minus) <= 1e-12


@pytest.mark.parametrize("case, kw", [
    (2, dict(f="1 + x", b="x", c="1 + x^2")),
    (4, dict(f="1 + x", a="0.5", b="x", constants={"C5": 1.0})),
])
def test_branches_give_one_signed_difference(case, kw):
    plus = construct(spec(case, branch=1, **kw))
    minus = construct(spec(case, branch=-1, **kw))

    def root(cc):
        return 2 * cc.problem.c(XS) * cc.y_p(XS) + cc.problem.b(XS)

    # the two branches sit on opposite roots of the quadratic relation
    assert np.all(root(plus) > 0) and np.all(root(minus) < 0)
    assert np.allclose(root(plus) - root(minus), 2 * np.sqrt(1 + XS + XS ** 2), atol=1e-9)
    if case == 2:
        d = plus.y_p(XS) - minus.y_p(XS)
        assert np.all(d > 0) or np.all(d < 0)


def test_case3_printed_family_needs_negative_root():
    cc = construct(spec(3, f="0.5", a="1", c="1", constants={"C3": -1.0}, branch=1))
    with pytest.raises(SpecError):
        theorem_family(cc)


# condition and seed recomputation ---------------------------------------------------------

@pytest.mark.parametrize("case", range(1, 11))
def test_condition_sides_agree_and_seed_holds(case):
    _, cc = random_spec(case, case_rng(7, case))
    lhs, rhs = condition_sides(cc)
    assert lhs.shape == (257,)
    assert validate_condition(cc) <= 1e-9
    assert seed_relation_check(cc) <= 1e-8
    assert sup_residual(cc.problem, cc.y_p, cc.problem.grid()) <= 1e-6


@pytest.mark.parametrize("case", range(1, 11))
def test_displayed_family_equals_general_formula(case):
    _, cc = random_spec(case, case_rng(11, case))
    th = theorem_family(cc)
    bc = family_from_bc(cc.problem, cc.y_p, cc.spec.x0)
    for C in (1.7, -2.3):
        C = bc.match_constant(0.0, float(cc.y_p(0.0)) + 1.0 / C)
        xs = bc.safe_grid(C)
        K = th.match_constant(0.0, float(bc(C, 0.0)))
        err = np.abs(th(K, xs) - bc(C, xs)) / (1 + np.abs(bc(C, xs)))
        assert np.max(err) <= 1e-8


# classical round trip ----------------------------------------------------------------------

@pytest.mark.parametrize("case", range(1, 11))
def test_constructions_are_not_mislabelled_classical(case):
    _, cc = random_spec(case, case_rng(3, case))
    p = cc.problem
    rep = detect_classical(p)
    xs = p.grid(129)
    av, bv, cv = p.a(xs), p.b(xs), p.c(xs)
    if rep.sum_zero:
        assert np.max(np.abs(av + bv + cv)) <= 1e-8 * (1 + np.max(np.abs([av, bv, cv])))
    if rep.lambda_mu:
        lam, mu = rep.lambda_mu_pair
        assert np.max(np.abs(lam * lam * cv + lam * mu * bv + mu * mu * av)) <= 1e-8 * (1 + np.max(np.abs(cv)))
    if rep.constant_discriminant:
        assert np.max(np.abs(cv - 1)) <= 1e-9
    # generic random constructions satisfy none of them
    assert rep.flags() == (False, False, False)


def test_classical_flags_fire_on_classical_construction():
    cc = construct(spec(7, f="2", b="0", c="1"))
    rep = detect_classical(cc.problem)
    assert rep.constant_discriminant and rep.discriminant == pytest.approx(4.0)


# fuzz property ------------------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2 ** 31 - 1))
def test_random_constructions_pass_the_battery(case, seed):
    rng = case_rng(seed, case)
    _, cc = random_spec(case, rng)
    result = check_case(cc, rng, n_family=4)
    assert result.passed(), (result.failures(), result.row())


def test_docs_copy_of_manifest_is_current():
    from pathlib import Path

    doc = Path(__file__).resolve().parents[1] / "docs" / "case_manifest.json"
    if not doc.exists():
        pytest.skip("docs not present")
    assert json.loads(doc.read_text()) == json.loads(manifest_json())
