import math

import numpy as np
import pytest

from minitest.model import ConstantLedger, NullSpec, canonicalize
from minitest.rates import (
    BracketError,
    exponents,
    fixed_point_bounds,
    frobenius_rate,
    index_A,
    index_I,
    index_profile,
    index_U,
    lower_bound_terms,
    minimax_rate,
    partial_norm,
    rate_terms,
    truncated_two_thirds_norm,
)


def random_probability_vectors(count, seed=0):
    """Sorted probability vectors of four shapes: uniform, geometric, power-law, sparse."""
    gen = np.random.default_rng(seed)
    for i in range(count):
        N = int(gen.integers(2, 400))
        shape = i % 4
        if shape == 0:
            p = np.ones(N)
        elif shape == 1:
            p = gen.uniform(0.3, 0.95) ** np.arange(N)
        elif shape == 2:
            p = np.arange(1, N + 1) ** -gen.uniform(0.3, 3.0)
        else:
            m = max(1, N // 10)
            p = np.zeros(N)
            p[gen.choice(N, m, replace=False)] = gen.exponential(1.0, m)
        p = p / p.sum()
        yield np.sort(p)[::-1]


def test_exponents_examples():
    assert exponents(1) == (2 / 3, 2 / 3)
    assert exponents(2) == (2.0, 0.0)
    r, b = exponents(4 / 3)
    assert r == pytest.approx(1.0, abs=1e-15) and b == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        exponents(0.9)


def test_index_I_examples():
    assert index_I([0, 0, 0], 7, 0.01) == 0
    assert index_I([0.5], 10, 0.01) == 1
    assert index_I(np.full(1000, 1e-3), 100, 0.05) == 995


def test_index_I_brute_force(rng):
    for _ in range(200):
        p = np.sort(rng.exponential(1, rng.integers(1, 30)))[::-1] / 10
        n = int(rng.integers(1, 200))
        c = float(rng.uniform(0.001, 0.1))
        brute = next(J for J in range(p.size + 1) if math.fsum(p[J:] ** 2) <= c / n ** 2)
        assert index_I(p, n, c) == brute


def test_index_A_examples():
    led = ConstantLedger.defaults(0.1)
    assert index_A([0.3, 0.2], 0, 10, 1.0, led.c_A4) == 0
    # t = 2: the condition is 1 >= threshold
    n = 10
    thr = led.c_A / (math.sqrt(n) * math.sqrt(math.sqrt(0.3 ** 2 + 0.2 ** 2)))
    assert thr <= 1
    assert index_A([0.3, 0.2], 2, n, 2.0, led.c_A4) == 2
    assert index_A([0.4, 1e-9], 2, 10, 1.0, led.c_A4) == 1


def test_index_A_brute_force(rng):
    led = ConstantLedger.defaults(0.2)
    for _ in range(200):
        p = np.sort(rng.exponential(1, rng.integers(1, 20)) ** 3)[::-1]
        p /= p.sum()
        n = int(rng.integers(1, 500))
        t = float(rng.uniform(1, 2))
        I = index_I(p, n, led.c_I)
        r, b = exponents(t)
        thr = led.c_A / (math.sqrt(n) * math.fsum(p[:I] ** r) ** 0.25) if I else math.inf
        cands = [a for a in range(1, I + 1) if p[a - 1] > 0 and p[a - 1] ** (b / 2) >= thr]
        assert index_A(p, I, n, t, led.c_A4) == (max(cands) if cands else 0)


def test_zero_coordinates_never_enter_bulk():
    assert index_A([0.5, 0.0, 0.0], 3, 1000, 2.0, 1.0) == 1


def test_index_U_examples():
    assert index_U([0.5, 0, 0], 1, 1, 10, 0.01) == 2
    assert index_U([0.5, 0.2, 0, 0], 2, 2, 10, 0.01) == 3
    assert index_U([0.5], 1, 1, 10, 0.01) is None


def test_index_U_geometric_scan():
    led = ConstantLedger.defaults(0.1)
    p = 0.5 * 2.0 ** -np.arange(1, 40)
    n = 50
    I = index_I(p, n, led.c_I)
    brute = None
    for U in range(I + 1, p.size + 1):
        if n * n * p[U - 1] * math.fsum(p[U - 1:]) <= led.c_u:
            brute = U
            break
    assert index_U(p, I, I, n, led.c_u) == brute
    assert brute is not None and brute > I


def test_partial_norm_examples():
    assert partial_norm([0.1, 0.2], 1, 1, 1) == 0.0
    assert partial_norm([0.1, 0.2], 0, 2, 1) == pytest.approx(0.3)
    assert partial_norm([0.4, 0.1], 0, 2, 2 / 3) == pytest.approx((0.4 ** (2 / 3) + 0.1 ** (2 / 3)) ** 1.5)
    assert partial_norm([0.4, 0.1], 0, 2, 2 / 3) == pytest.approx(0.66037, abs=1e-5)


def test_rate_dirac_multinomial():
    spec = NullSpec("multinomial", [1.0, 0.0, 0.0], t=2.0)
    for n in (100, 1000):
        rb = minimax_rate(spec, n)
        assert rb.bulk_term == 0 and rb.tail_term == 0
        assert rb.total == pytest.approx(1.0 / n, rel=1e-15)


def test_rate_uniform_bulk_term_scaling():
    N = 10_000
    spec = NullSpec("multinomial", np.full(N, 1.0 / N), t=2.0)
    ratios = [minimax_rate(spec, n).bulk_term * math.sqrt(n) * N ** 0.25 for n in (1000, 4000)]
    assert ratios[0] == pytest.approx(ratios[1], rel=0.05)
    assert ratios[0] == pytest.approx(1.0, rel=1e-3)  # only the dropped coordinate differs


def test_rate_zero_vector():
    spec = NullSpec("binomial", np.zeros(5))
    for n in (1, 10, 300):
        rb = minimax_rate(spec, n)
        assert rb.total == 1.0 / n


def test_rate_terms_t1_tail_is_l1_mass():
    led = ConstantLedger.defaults(0.1)
    p = np.array([0.3] + [1e-4] * 50)
    rb = rate_terms(p, 100, 1.0, led)
    prof = index_profile(p, 100, 1.0, led)
    assert rb.tail_term == pytest.approx(math.fsum(p[prof.I:]))


def test_rate_at_least_inverse_n():
    for p in random_probability_vectors(200, seed=3):
        for n in (5, 50, 500):
            for t in (1.0, 1.3, 2.0):
                rb = rate_terms(p, n, t, ConstantLedger.defaults(0.2))
                assert rb.total >= 1.0 / n and all(map(math.isfinite, rb.to_dict().values()))


def test_tail_form_A_flag():
    spec = NullSpec("poisson", np.arange(1, 80) ** -2.0, t=1.0)
    a = minimax_rate(spec, 100, tail_form="A")
    i = minimax_rate(spec, 100, tail_form="I")
    assert a.tail_term >= i.tail_term


def test_frobenius_examples():
    assert frobenius_rate(np.zeros((3, 3)), 7) == pytest.approx(1 / 7)
    assert frobenius_rate([[0, 0.25], [0.25, 0]], 4) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        frobenius_rate([[0, 0.2], [0.3, 0]], 4)


def test_frobenius_constant_matrix_slope():
    # all edges delta: the root term is sqrt(delta sqrt(m(m-1)/2) / n), i.e. ~ sqrt(m delta / n)
    delta, n = 0.01, 10_000
    vals = []
    for m in (20, 80, 320):
        P = np.full((m, m), delta)
        np.fill_diagonal(P, 0)
        vals.append(frobenius_rate(P, n) - 1 / n)
    slopes = np.diff(np.log(vals)) / np.diff(np.log([20, 80, 320]))
    np.testing.assert_allclose(slopes, 0.5, atol=0.01)


def test_t2_specialization_matches_frobenius():
    gen = np.random.default_rng(4)
    for _ in range(20):
        m = int(gen.integers(3, 12))
        U = np.triu(gen.uniform(0.05, 0.5, (m, m)), 1)
        P = U + U.T
        n = int(gen.integers(10, 1000))
        spec = NullSpec("binomial", P[np.triu_indices(m, 1)], t=2.0)
        prof = index_profile(canonicalize(spec).work, n, 2.0, spec.constants)
        assert prof.I == prof.N  # every entry is large at these n
        assert minimax_rate(spec, n).total == pytest.approx(frobenius_rate(P, n), rel=0, abs=1e-12)


def test_squared_mass_beyond_A_is_small():
    for i, p in enumerate(random_probability_vectors(1000, seed=1)):
        led = ConstantLedger.defaults((0.1, 0.2, 0.5)[i % 3])
        for n in (10, 100, 1000):
            prof = index_profile(p, n, 1.0 + (i % 11) / 10, led)
            assert math.fsum(p[prof.A:] ** 2) <= (led.c_A4 + led.c_I) / n ** 2 * (1 + 1e-12)


def test_tail_mass_past_I_and_U_comparable():
    worst = 0.0
    for i, p in enumerate(random_probability_vectors(600, seed=2)):
        led = ConstantLedger.defaults((0.1, 0.2, 0.5)[i % 3])
        for n in (10, 100, 1000):
            prof = index_profile(p, n, 1.5, led)
            if prof.U is None:
                continue
            big = math.fsum(p[prof.I:]) + 1 / n
            small = math.fsum(p[prof.U - 1:]) + 1 / n
            assert small <= big * (1 + 1e-12)
            worst = max(worst, big / small)
            assert big <= (3 + math.sqrt(led.c_I)) * small
    assert worst >= 1.0


def test_tail_mass_past_I_and_A_comparable():
    for i, p in enumerate(random_probability_vectors(600, seed=5)):
        led = ConstantLedger.defaults((0.1, 0.2, 0.5)[i % 3])
        const = 1 + led.c_A4 / led.c_I + led.c_A4 / math.sqrt(led.c_I)
        for n in (10, 100, 1000):
            prof = index_profile(p, n, 1.0, led)
            tI = math.fsum(p[prof.I:]) + 1 / n
            tA = math.fsum(p[prof.A:]) + 1 / n
            assert tI <= tA * (1 + 1e-12)
            assert tA <= const * tI


def test_upper_and_lower_rate_forms_agree():
    worst = 1.0
    for i, p in enumerate(random_probability_vectors(400, seed=6)):
        led = ConstantLedger.defaults(0.2)
        for n in (10, 100, 1000):
            t = 1.0 + (i % 5) / 4
            up = rate_terms(p, n, t, led).total
            lo = lower_bound_terms(p, n, t, led).total
            worst = max(worst, up / lo, lo / up)
    assert worst < 1e3


def test_fixed_point_dirac_exact():
    fb = fixed_point_bounds(np.array([1.0, 0.0, 0.0]), 100, 3.0, 0.5)
    assert fb.eps_plus == 3.0 / 100 and fb.eps_minus == 0.5 / 100
    assert fb.first_case and fb.bounds_match


def test_fixed_point_uniform():
    fb = fixed_point_bounds(np.full(100, 0.01), 1000, 2.0, 1.0)
    assert fb.ratio <= 16 * 2.0
    assert fb.bounds_match
    # both are fixed points up to the bisection tolerance
    f_plus = 2.0 * math.sqrt(truncated_two_thirds_norm(np.full(100, 0.01), fb.eps_plus / 16) / 1000) + 2.0 / 1000
    assert fb.eps_plus <= f_plus * (1 + 1e-9)


def test_fixed_point_flags_consistent():
    for p in random_probability_vectors(100, seed=7):
        fb = fixed_point_bounds(p, 200, 2.0, 1.0)
        assert fb.bounds_match == (fb.eps_plus <= 16 * 2.0 * fb.eps_minus * (1 + 1e-10))
        assert fb.eps_minus <= fb.eps_plus * (1 + 1e-9)


def test_fixed_point_input_checks():
    with pytest.raises(ValueError):
        fixed_point_bounds(np.array([0.2, 0.8]), 10, 2.0, 1.0)
    with pytest.raises(ValueError):
        fixed_point_bounds(np.array([0.8, 0.2]), 10, 1.0, 2.0)
    assert issubclass(BracketError, RuntimeError)
