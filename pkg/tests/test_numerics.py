import math
import random
from fractions import Fraction

import mpmath
import pytest
from mpmath import mp, mpf

from circlerenorm import numerics
from circlerenorm.errors import (
    DegenerateInterval,
    EmptyExpansion,
    NonPositiveData,
    NoSignChange,
    PreconditionError,
)
from circlerenorm.numerics import (
    ContinuedFraction,
    PolynomialJetPair,
    bisect_monotone,
    cf_expand,
    compare_expansions,
    convergents,
    fd_derivative,
    fit_decay,
    format_scalar,
    gauss_shift,
    hermite_fit,
    parse_scalar,
    taylor_invert,
    taylor_pow,
    use_precision,
)

PI_50 = "3.14159265358979323846264338327950288419716939937510"


def integer_cf_frac(x: Fraction, depth):
    """Continued fraction of a positive rational by exact arithmetic (oracle)."""
    out = []
    while x and len(out) < depth:
        inv = 1 / x
        d = int(inv)
        out.append(d)
        x = inv - d
    return out


class TestContinuedFractions:
    def test_golden_mean_digits(self):
        x = (mpmath.sqrt(5) - 1) / 2
        assert cf_expand(x, 5).digits == (1, 1, 1, 1, 1)

    def test_rational_exhausts(self):
        cf = cf_expand(mpf(2) / 5, 8)
        assert cf.digits == (2, 2)
        assert cf.exhausted

    def test_pi_digits_against_integer_oracle(self):
        # oracle: integer-arithmetic continued fraction of a 50-digit pi decimal
        pi_frac = Fraction(PI_50.replace(".", "")) / 10**50
        expected = tuple(integer_cf_frac(pi_frac - 3, 4))
        assert expected == (7, 15, 1, 292)
        got = cf_expand(mp.pi - 3, 4)
        assert got.digits == expected

    def test_domain_checks(self):
        with pytest.raises(PreconditionError):
            cf_expand(mpf(0), 3)
        with pytest.raises(PreconditionError):
            cf_expand(mpf("1.5"), 3)

    def test_convergents_fibonacci(self):
        assert convergents(ContinuedFraction((1, 1, 1, 1))) == [
            (0, 1), (1, 1), (1, 2), (2, 3), (3, 5)]

    def test_convergents_single_digit(self):
        assert convergents(ContinuedFraction((2,))) == [(0, 1), (1, 2)]

    def test_convergents_hand_checkable(self):
        assert convergents(ContinuedFraction((7, 15, 1)))[-1] == (16, 113)

    def test_convergent_recurrence_and_coprimality_random(self):
        rng = random.Random(20240901)
        for _ in range(50):
            digits = tuple(rng.randint(1, 20) for _ in range(rng.randint(1, 30)))
            conv = convergents(ContinuedFraction(digits))
            p2, q2 = 1, 0
            p1, q1 = 0, 1
            for (p, q), r in zip(conv[1:], digits):
                assert p == r * p1 + p2 and q == r * q1 + q2
                assert math.gcd(p, q) == 1
                p2, q2, p1, q1 = p1, q1, p, q
            # value check against exact fraction arithmetic
            val = Fraction(0)
            for r in reversed(digits):
                val = Fraction(1, 1) / (r + val)
            assert val == Fraction(conv[-1][0], conv[-1][1])

    def test_convergent_approximation_quality(self):
        rng = random.Random(7)
        for _ in range(20):
            x = mpmath.sqrt(rng.randint(2, 400))
            x = x - mpmath.floor(x)
            if x < mpf("0.01") or x > mpf("0.99"):
                continue
            cf = cf_expand(x, 10)
            conv = convergents(cf)
            for n in range(1, len(conv) - 1):
                p, q = conv[n]
                q_next = conv[n + 1][1]
                assert abs(mpf(p) / q - x) < mpf(1) / (q * q_next)

    def test_gauss_shift_basic(self):
        assert gauss_shift(ContinuedFraction((2, 3, 4))).digits == (3, 4)

    def test_gauss_shift_to_empty(self):
        out = gauss_shift(ContinuedFraction((1,)))
        assert out.digits == () and out.exhausted

    def test_gauss_shift_empty_raises(self):
        with pytest.raises(EmptyExpansion):
            gauss_shift(ContinuedFraction(()))

    def test_gauss_shift_fixed_point(self):
        cf = ContinuedFraction.golden(10)
        out = cf
        for _ in range(4):
            out = gauss_shift(out)
        assert out.digits == (1,) * 6

    def test_shift_commutes_with_gauss_map(self):
        rng = random.Random(31337)
        for _ in range(20):
            x = mpmath.sqrt(rng.randint(2, 300))
            x = x - mpmath.floor(x)
            if x < mpf("0.05") or x > mpf("0.95"):
                continue
            a = gauss_shift(cf_expand(x, 9))
            g = 1 / x
            g -= mpmath.floor(g)
            b = cf_expand(g, 8)
            k = min(len(a.digits), len(b.digits))
            assert a.digits[:k] == b.digits[:k]

    def test_compare_expansions_orderings(self):
        t = ContinuedFraction((1, 2, 3))
        # larger digit at even index -> smaller number
        assert compare_expansions(ContinuedFraction((2,)), t) == -1
        # larger digit at odd index -> larger number
        assert compare_expansions(ContinuedFraction((1, 3)), t) == 1
        assert compare_expansions(ContinuedFraction((1, 1)), t) == -1
        # full prefix match
        assert compare_expansions(ContinuedFraction((1, 2, 3, 9)), t) == 0
        # early termination = cylinder extreme
        assert compare_expansions(ContinuedFraction((1,)), t) == 1
        assert compare_expansions(ContinuedFraction(()), t) == -1

    def test_bounds_bracket_value(self):
        cf = cf_expand(mp.pi - 3, 5)
        lo, hi = cf.bounds()
        x = Fraction(PI_50.replace(".", "")) / 10**50 - 3
        assert lo < x < hi


class TestBisection:
    def test_sqrt2(self):
        root = bisect_monotone(lambda x: x * x - 2, 1, 2, mpf("1e-12"))
        assert abs(root - mpmath.sqrt(2)) < mpf("1e-12")

    def test_identity_zero(self):
        root = bisect_monotone(lambda x: x, -1, 1, mpf("1e-20"))
        assert abs(root) < mpf("1e-20")

    def test_predicate_mode(self):
        root = bisect_monotone(lambda x: bool(x >= mpf("0.3")), 0, 1, mpf("1e-15"))
        assert abs(root - mpf("0.3")) < mpf("1e-14")

    def test_no_sign_change(self):
        with pytest.raises(NoSignChange):
            bisect_monotone(lambda x: x * x + 1, -1, 1, mpf("1e-10"))

    def test_decreasing_function(self):
        root = bisect_monotone(lambda x: 2 - x, 0, 5, mpf("1e-15"))
        assert abs(root - 2) < mpf("1e-14")


class TestHermite:
    def test_reproduces_linear(self):
        jets = PolynomialJetPair(mpf(0), (mpf(0), mpf(1), mpf(0), mpf(0)),
                                 mpf(1), (mpf(1), mpf(1), mpf(0), mpf(0)))
        poly = hermite_fit(jets)
        mono = poly.monomial_coefficients()
        assert abs(mono[0]) < mpf("1e-28")
        assert abs(mono[1] - 1) < mpf("1e-28")
        assert all(abs(c) < mpf("1e-28") for c in mono[2:])

    def test_sin_accuracy_on_grid(self):
        xl, xr = mpf(0), mp.pi / 2
        jl = (mpmath.sin(xl), mpmath.cos(xl), -mpmath.sin(xl))
        jr = (mpmath.sin(xr), mpmath.cos(xr), -mpmath.sin(xr))
        poly = hermite_fit(PolynomialJetPair(xl, jl, xr, jr))
        worst = max(abs(poly(xl + (xr - xl) * mpf(i) / 200) -
                        mpmath.sin(xl + (xr - xl) * mpf(i) / 200))
                    for i in range(201))
        assert worst < mpf("1e-3")

    def test_constant(self):
        jets = PolynomialJetPair(mpf(0), (mpf(5),), mpf(1), (mpf(5),))
        poly = hermite_fit(jets)
        assert abs(poly(mpf("0.37")) - 5) < mpf("1e-30")

    def test_degenerate_interval(self):
        with pytest.raises(DegenerateInterval):
            hermite_fit(PolynomialJetPair(mpf(1), (mpf(0), mpf(1)),
                                          mpf(1) + mpf("1e-33"), (mpf(0), mpf(1))))

    def test_jets_reproduced_at_endpoints(self):
        jl = (mpf("0.3"), mpf("1.2"), mpf("-0.7"), mpf("2.0"))
        jr = (mpf("1.1"), mpf("0.4"), mpf("0.9"), mpf("-1.5"))
        jets = PolynomialJetPair(mpf("-0.5"), jl, mpf("0.75"), jr)
        poly = hermite_fit(jets)
        assert poly.degree <= 2 * jets.order + 1
        got_l = poly.jet(mpf("-0.5"), 3)
        got_r = poly.jet(mpf("0.75"), 3)
        for a, b in zip(got_l, jl):
            assert abs(a - b) < mpf("1e-26")
        for a, b in zip(got_r, jr):
            assert abs(a - b) < mpf("1e-26")

    def test_projection_property(self):
        rng = random.Random(99)
        for _ in range(5):
            jl = tuple(mpf(rng.uniform(-2, 2)) for _ in range(4))
            jr = tuple(mpf(rng.uniform(-2, 2)) for _ in range(4))
            jets = PolynomialJetPair(mpf(0), jl, mpf(1), jr)
            poly = hermite_fit(jets)
            refit = hermite_fit(PolynomialJetPair(
                mpf(0), tuple(poly.jet(mpf(0), 3)),
                mpf(1), tuple(poly.jet(mpf(1), 3))))
            for a, b in zip(poly.newton_coeffs, refit.newton_coeffs):
                assert abs(a - b) < mpf("1e-25")

    def test_mismatched_jets_rejected(self):
        with pytest.raises(PreconditionError):
            PolynomialJetPair(mpf(0), (mpf(1), mpf(2)), mpf(1), (mpf(1),))


class TestDecayFit:
    def test_exact_geometric(self):
        series = [(n, 2 * mpf("0.5") ** n) for n in range(6)]
        fit = fit_decay(series)
        assert abs(fit.log_lambda - mpmath.log(mpf("0.5"))) < mpf("1e-28")
        assert fit.residual < mpf("1e-28")
        assert fit.decays

    def test_constant_series(self):
        fit = fit_decay([(n, mpf(1)) for n in range(5)])
        assert abs(fit.log_lambda) < mpf("1e-28")

    def test_noisy_geometric(self):
        rng = random.Random(4242)
        lam = mpf("0.7")
        series = [(n, 3 * lam ** n * (1 + mpf(rng.uniform(-0.05, 0.05))))
                  for n in range(12)]
        fit = fit_decay(series)
        assert abs(fit.log_lambda - mpmath.log(lam)) < mpf("0.05")

    def test_nonpositive_rejected(self):
        with pytest.raises(NonPositiveData):
            fit_decay([(0, mpf(1)), (1, mpf(0)), (2, mpf(1))])

    def test_too_short(self):
        with pytest.raises(PreconditionError):
            fit_decay([(0, mpf(1)), (1, mpf(1))])


class TestTaylorKernels:
    def test_taylor_pow_square_root(self):
        # (1 + h)^(1/2) around h=0
        coeffs = taylor_pow([mpf(1), mpf(1)], mpf("0.5"), 4)
        expected = [mpf(1), mpf("0.5"), mpf("-0.125"), mpf("0.0625"),
                    mpf("-0.0390625")]
        for a, b in zip(coeffs, expected):
            assert abs(a - b) < mpf("1e-30")

    def test_taylor_invert_roundtrip(self):
        a = [mpf(0), mpf(2), mpf("0.3"), mpf("-0.1"), mpf("0.05")]
        g = taylor_invert(a, 4)
        from circlerenorm.numerics import taylor_compose
        comp = taylor_compose(a, g, 4)
        assert abs(comp[1] - 1) < mpf("1e-30")
        assert all(abs(c) < mpf("1e-30") for c in comp[2:])

    def test_fd_derivative_matches_sin(self):
        for order in (1, 2, 3):
            got = fd_derivative(mpmath.sin, mpf("0.3"), order)
            exact = mpmath.sin(mpf("0.3") + order * mp.pi / 2)
            assert abs(got - exact) < mpf("1e-6")


class TestPrecisionAndFormatting:
    def test_levels(self):
        with numerics.working_precision("standard"):
            assert mp.prec == 53
        with numerics.working_precision("high"):
            assert mp.prec == 212
        assert mp.prec == 106  # extended restored by fixture

    def test_scalar_roundtrip_bits(self):
        rng = random.Random(2)
        for _ in range(50):
            x = mpf(rng.random()) * mpf(10) ** rng.randint(-20, 3)
            assert parse_scalar(format_scalar(x)) == x

    def test_unknown_level(self):
        with pytest.raises(PreconditionError):
            use_precision("quadruple")
        use_precision("extended")
