import math

import mpmath
import pytest

from baez_duarte import (ASYMPTOTIC, EXACT, GAMMA_RATIO, PRODUCT, ck_generic,
                         ck_oscillation_asymptotic, ck_oscillation_exact,
                         ck_oscillation_general, ck_trend, criterion_strip_ratio, envelope,
                         next_ordinate, off_line_scenario, oscillation_terms, pochhammer_pk,
                         required_precision_for_generic, sine_approx_params,
                         sine_approximation, trend_asymptote_constant, truncation_floor,
                         violation_index_estimate, y_curve, zeros_needed)
from precision_core import (DomainError, InsufficientPrecisionError, digits_of_agreement,
                            make_context)
from special_functions import binomial
from zero_store import ZeroTableError, degrade_derivatives, seed_ordinates

PARTIAL_SUMS_K100000 = [
    (10000, "5.65168726144550e+14115"),
    (20000, "4.00927204946289e+21729"),
    (30000, "6.08771775660005e+26526"),
    (40000, "5.17938759373151e+29225"),
    (50000, "1.26030418446100e+30100"),
    (60000, "3.45292506248767e+29225"),
    (70000, "2.60902189568574e+26526"),
    (80000, "1.00231801236572e+21729"),
    (90000, "6.27965251271723e+14114"),
    (100000, "1.60975799392038e-9"),
]


def direct_ck(k, dps):
    with mpmath.workdps(dps):
        return mpmath.fsum((-1) ** j * binomial(k, j) / mpmath.zeta(2 * j + 2)
                           for j in range(k + 1))


# ---------------------------------------------------------------------------
# generic sum
# ---------------------------------------------------------------------------

def test_generic_k0_is_inverse_zeta2():
    ctx = make_context(50)
    value, trace = ck_generic(0, ctx)
    with mpmath.workdps(70):
        assert abs(value - 6 / mpmath.pi ** 2) < mpmath.mpf(10) ** -60
    assert [n for n, _ in trace.rows] == [0]


@pytest.mark.parametrize("k", [1, 2, 10, 60])
def test_generic_matches_direct_sum(k):
    ctx = make_context(required_precision_for_generic(k, 40))
    value, _ = ck_generic(k, ctx)
    reference = direct_ck(k, ctx.working_digits + 20)
    with mpmath.workdps(ctx.working_digits):
        assert digits_of_agreement(value, reference) >= 40


def test_trace_rows_at_stride_and_final():
    ctx = make_context(required_precision_for_generic(100, 20))
    value, trace = ck_generic(100, ctx, trace_stride=10)
    assert [n for n, _ in trace.rows] == list(range(0, 101, 10))
    assert trace.rows[-1][1] == value
    with ctx.workdps():
        partial = mpmath.fsum((-1) ** j * binomial(100, j) / mpmath.zeta(2 * j + 2)
                              for j in range(31))
        assert abs(trace.rows[3][1] - partial) < mpmath.mpf(10) ** -20 * abs(partial)
    assert 40 <= trace.peak_index <= 60


def test_stride_above_k_leaves_only_the_final_row():
    ctx = make_context(required_precision_for_generic(20, 20))
    value, trace = ck_generic(20, ctx, trace_stride=50)
    assert trace.rows == [(20, value)]


def test_generic_refuses_low_precision():
    with pytest.raises(InsufficientPrecisionError) as info:
        ck_generic(1000, make_context(100))
    assert info.value.required_digits == required_precision_for_generic(1000, 10)
    with pytest.raises(DomainError):
        ck_generic(-1, make_context(20))
    with pytest.raises(DomainError):
        ck_generic(10, make_context(20), trace_stride=0)


def test_required_precision():
    assert required_precision_for_generic(100000, 1000) == 30103 + 1000 + 50
    assert required_precision_for_generic(1000, 100) == 452


def test_checkpoint_callback_cadence():
    ctx = make_context(required_precision_for_generic(50, 20))
    seen = []
    ck_generic(50, ctx, on_checkpoint=lambda state: seen.append(state.next_j), checkpoint_every=20)
    assert seen == [20, 40, 51]


@pytest.mark.slow
def test_precision_loss_law():
    """P = 452 against P = 700 at k = 1000: the gap is the binomial peak over |c_k|."""
    k = 1000
    low = make_context(452)
    high = make_context(700)
    low_value, _ = ck_generic(k, low)
    high_value, _ = ck_generic(k, high)
    with high.workdps():
        d = digits_of_agreement(low_value, high_value)
        peak_term = max(binomial(k, j) / mpmath.zeta(2 * j + 2) for j in (499, 500, 501))
        lost = float(mpmath.log10(peak_term / abs(high_value)))
    expected = low.working_digits - lost
    assert d >= 100
    assert expected - 8 <= d <= expected + 3


# ---------------------------------------------------------------------------
# trend
# ---------------------------------------------------------------------------

def direct_trend(k, dps):
    with mpmath.workdps(dps):
        two_pi = 2 * mpmath.pi
        total = 0
        for m in range(2, 400):
            weight = (mpmath.gamma(k + 1) * mpmath.gamma(m)
                      / (mpmath.gamma(k + m + 1) * mpmath.gamma(2 * m - 1)))
            total += (-1) ** m * weight * two_pi ** (2 * m) / mpmath.zeta(2 * m - 1)
        return -total / two_pi ** 2


@pytest.mark.parametrize("k", [0, 1, 10, 1000])
def test_trend_matches_direct_series(k):
    ctx = make_context(40)
    value = ck_trend(k, ctx)
    reference = direct_trend(k, 120)
    with mpmath.workdps(60):
        assert abs(value - reference) < mpmath.mpf(10) ** -38 * abs(reference)


def test_trend_asymptote():
    ctx = make_context(30)
    k = 10 ** 6
    with ctx.workdps():
        scaled = k ** 2 * ck_trend(k, ctx)
        limit = trend_asymptote_constant(ctx)
        assert abs(limit - mpmath.mpf("-16.4211933")) < mpmath.mpf(10) ** -6
        with mpmath.workdps(50):
            expected = -(2 * mpmath.pi) ** 2 / (2 * mpmath.zeta(3))
        assert abs(limit - expected) < mpmath.mpf(10) ** -28
        assert abs(scaled / limit - 1) < mpmath.mpf("2e-5")


# ---------------------------------------------------------------------------
# oscillation
# ---------------------------------------------------------------------------

def test_pochhammer_two_routes():
    ctx = make_context(50)
    s = mpmath.mpc("0.25", "7.0673625708")
    product = pochhammer_pk(30, s, ctx, PRODUCT)
    ratio = pochhammer_pk(30, s, ctx, GAMMA_RATIO)
    with ctx.workdps():
        assert abs(product - ratio) < mpmath.mpf(10) ** -45 * abs(product)
    assert pochhammer_pk(5, 3, ctx, PRODUCT) == 0
    with pytest.raises(DomainError):
        pochhammer_pk(5, 3, ctx, GAMMA_RATIO)


def test_exact_oscillation_two_methods(first_zero_table):
    ctx = make_context(50)
    for k in (0, 7, 50):
        ratio = ck_oscillation_exact(k, first_zero_table, 1, ctx, GAMMA_RATIO)
        product = ck_oscillation_exact(k, first_zero_table, 1, ctx, PRODUCT)
        with ctx.workdps():
            assert abs(ratio - product) < mpmath.mpf(10) ** -45 * max(abs(ratio), 1e-30)


def test_asymptotic_form_approaches_exact(first_zero_table):
    ctx = make_context(40)
    params = sine_approx_params(first_zero_table[1], ctx)
    for k in (10 ** 4, 10 ** 5):
        exact = ck_oscillation_exact(k, first_zero_table, 1, ctx)
        asymptotic = ck_oscillation_asymptotic(k, first_zero_table, 1, ctx)
        bound, _ = envelope(k, params)
        assert abs(exact - asymptotic) < 0.05 * bound


def test_oscillation_needs_prepared_zeros(first_zero_table, fifty_zeros_40):
    with pytest.raises(ZeroTableError):
        ck_oscillation_exact(10, first_zero_table, 2, make_context(40))
    with pytest.raises(InsufficientPrecisionError):
        ck_oscillation_exact(10, fifty_zeros_40, 5, make_context(60))
    with pytest.raises(DomainError):
        ck_oscillation_asymptotic(0, first_zero_table, 1, make_context(40))
    with pytest.raises(DomainError):
        oscillation_terms(10, first_zero_table, 1, make_context(40), form="pade")


def test_general_form_on_the_line_is_the_asymptotic_form(fifty_zeros_40):
    ctx = make_context(40)
    zeros = fifty_zeros_40.zeros[:10]
    general = ck_oscillation_general(5000, [z.rho for z in zeros], [z.zeta_prime for z in zeros],
                                     ctx)
    asymptotic = ck_oscillation_asymptotic(5000, fifty_zeros_40, 10, ctx)
    with ctx.workdps():
        assert abs(general - asymptotic) < mpmath.mpf(10) ** -35 * abs(asymptotic)
    with pytest.raises(DomainError):
        ck_oscillation_general(10, [zeros[0].rho], [], ctx)


# ---------------------------------------------------------------------------
# sine approximation and envelope
# ---------------------------------------------------------------------------

def test_sine_constants(first_zero_table):
    params = sine_approx_params(first_zero_table[1], make_context(40))
    assert mpmath.mpf("7.775061e-5") <= params.amplitude_A <= mpmath.mpf("7.775063e-5")
    assert abs(params.phase_phi - mpmath.mpf("2.592434")) < mpmath.mpf("1e-6")
    with mpmath.workdps(60):
        rho = mpmath.zetazero(1)
        g = mpmath.gamma(mpmath.mpc(0.75, -rho.imag / 2)) / mpmath.zeta(rho, derivative=1)
        expected = mpmath.fmod(mpmath.pi / 2 - mpmath.arg(g), 2 * mpmath.pi)
        if expected < 0:
            expected += 2 * mpmath.pi
        assert abs(params.phase_phi - expected) < mpmath.mpf(10) ** -35
        assert abs(params.amplitude_A - abs(g)) < mpmath.mpf(10) ** -35 * abs(g)


def test_sine_approximation_is_the_one_zero_asymptotic_sum(first_zero_table):
    ctx = make_context(40)
    params = sine_approx_params(first_zero_table[1], ctx)
    for k in (100, 1000, 123456):
        one_zero = ck_oscillation_asymptotic(k, first_zero_table, 1, ctx)
        with ctx.workdps():
            assert abs(sine_approximation(k, params, ctx) - one_zero) < \
                mpmath.mpf(10) ** -35 * params.amplitude_A


def test_envelope_and_strip_ratio(first_zero_table):
    params = sine_approx_params(first_zero_table[1], make_context(30))
    upper, lower = envelope(10 ** 4, params)
    assert upper == -lower
    assert abs(upper - params.amplitude_A / 1000) < mpmath.mpf(10) ** -20
    assert abs(criterion_strip_ratio(10 ** 4, upper, params) - 1) < mpmath.mpf(10) ** -12
    with pytest.raises(DomainError):
        envelope(0, params)


def test_envelope_contains_c_k_at_1e5(fifty_zeros_40):
    ctx = make_context(40)
    params = sine_approx_params(fifty_zeros_40[1], ctx)
    k = 10 ** 5
    with ctx.workdps():
        c_k = ck_trend(k, ctx) + ck_oscillation_asymptotic(k, fifty_zeros_40, 50, ctx)
        upper, lower = envelope(k, params)
        assert lower < c_k < upper
        assert abs(c_k - mpmath.mpf("1.60975799392038e-9")) < mpmath.mpf("1e-11")


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def test_zeros_needed_rule():
    ordinates = ["14.13", "21.02", "25.01", "30.42", "32.93"]
    gamma_needed, count = zeros_needed(10, ordinates)
    assert abs(gamma_needed - 40 * math.log(10) / math.pi) < 1e-12
    assert count == 3
    assert mpmath.mpf(ordinates[count - 1]) <= gamma_needed < mpmath.mpf(ordinates[count])
    assert zeros_needed(10, ordinates[:2])[1] is None
    assert zeros_needed(0, ordinates) == (0, 0)
    assert zeros_needed(10)[1] is None
    with pytest.raises(DomainError):
        zeros_needed(-1)


def test_zeros_needed_for_a_thousand_digits_gamma():
    gamma_needed, _ = zeros_needed(1000)
    assert abs(gamma_needed - mpmath.mpf("2931.7")) < 0.5


@pytest.mark.extended
def test_zeros_needed_for_a_thousand_digits():
    _, count = zeros_needed(1000, seed_ordinates(2403))
    assert count == 2402


def test_truncation_floor_and_next_ordinate(first_zero_table, fifty_zeros_40):
    assert next_ordinate(fifty_zeros_40, 10) == fifty_zeros_40[11].gamma
    assert abs(next_ordinate(first_zero_table, 1) - mpmath.mpf("21.022039639")) < 1e-8
    with mpmath.workdps(30):
        assert abs(truncation_floor(236.52422966581620580)
                   - mpmath.exp(-mpmath.pi * mpmath.mpf("236.52422966581620580") / 4)) < 1e-90
    with pytest.raises(DomainError):
        truncation_floor(0)


def test_violation_index_estimate():
    value = violation_index_estimate(0.1, 1e4, 1.0)
    assert abs(value - 2e4 / 0.1 * math.log10(math.e)) < 1e-6
    for delta in (0, 0.5, -0.1):
        with pytest.raises(DomainError):
            violation_index_estimate(delta, 1e4, 1.0)


def test_off_line_zero_escapes_the_strip(first_zero_table):
    ctx = make_context(30)
    params = sine_approx_params(first_zero_table[1], ctx)
    rows = off_line_scenario([10 ** 4, 10 ** 8, 10 ** 12], 0.1, 20.0, 1.0, params, ctx)
    ratios = [r for _, r in rows]
    assert ratios[0] < ratios[1] < ratios[2]
    assert abs((ratios[1] - ratios[0]) - 0.2) < 1e-9
    flat = off_line_scenario([10 ** 4, 10 ** 8], 0, 20.0, 1.0, params, ctx)
    assert abs(flat[0][1] - flat[1][1]) < 1e-9


# ---------------------------------------------------------------------------
# desk-scale experiment: k = 1000 against 100 zeros at 120 digits
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def desk_generic():
    ctx = make_context(required_precision_for_generic(1000, 100))
    value, _ = ck_generic(1000, ctx)
    return value


@pytest.mark.slow
def test_desk_agreement(hundred_zeros_120, desk_generic):
    ctx = make_context(120)
    with ctx.workdps():
        explicit = ck_trend(1000, ctx) + ck_oscillation_exact(1000, hundred_zeros_120, 100, ctx)
        d = digits_of_agreement(desk_generic, explicit)
        measured = abs(desk_generic - explicit)
    floor = truncation_floor(next_ordinate(hundred_zeros_120, 100))
    assert d >= 72
    assert mpmath.mpf(10) ** -4 < measured / floor < 100


@pytest.mark.slow
def test_residuals_of_refined_zeros(hundred_zeros_120):
    assert all(zero.residual < mpmath.mpf(10) ** -116 for zero in hundred_zeros_120.zeros)
    with mpmath.workdps(130):
        assert abs(hundred_zeros_120[1].gamma - mpmath.zetazero(1).imag) < mpmath.mpf(10) ** -119


@pytest.mark.slow
def test_y_curve_converging_regime(hundred_zeros_120, desk_generic):
    ctx = make_context(120)
    points = y_curve(1000, desk_generic, hundred_zeros_120, 60, ctx)
    assert points[0].n == 0 and points[0].gamma is None
    close = 0
    for point in points[5:61]:
        predicted = 4 / (math.pi * float(hundred_zeros_120[point.n + 1].gamma))
        if abs(float(point.y) - predicted) <= 0.2 * predicted:
            close += 1
    assert close >= 0.8 * 56


@pytest.mark.slow
def test_y_curve_plateau_with_degraded_derivatives(hundred_zeros_120, desk_generic):
    ctx = make_context(120)
    trend = ck_trend(1000, ctx)
    clean = y_curve(1000, desk_generic, hundred_zeros_120, 100, ctx, EXACT, trend)
    degraded = y_curve(1000, desk_generic, degrade_derivatives(hundred_zeros_120, 40), 100, ctx,
                       EXACT, trend)
    departure = next(p.n for p, q in zip(degraded[1:], clean[1:]) if p.y > 1.05 * q.y)
    assert 100 <= hundred_zeros_120[departure].gamma <= 170
    plateau = degraded[min(departure + 10, 100)].y
    for point in degraded[departure + 10:]:
        assert abs(point.y - plateau) <= 0.05 * plateau
    assert degraded[-1].y > 1.3 * clean[-1].y


def test_y_curve_trend_only_row(first_zero_table):
    ctx = make_context(30)
    with ctx.workdps():
        points = y_curve(10, mpmath.mpf("0.01"), first_zero_table, 0, ctx)
    assert len(points) == 1
    assert points[0].n == 0 and not points[0].saturated


def test_y_curve_asymptotic_form(fifty_zeros_40):
    ctx = make_context(40)
    exact_points = y_curve(5000, mpmath.mpf(0), fifty_zeros_40, 3, ctx, EXACT, mpmath.mpf(0))
    asym_points = y_curve(5000, mpmath.mpf(0), fifty_zeros_40, 3, ctx, ASYMPTOTIC, mpmath.mpf(0))
    assert exact_points[0].saturated and asym_points[0].saturated
    assert abs(exact_points[3].log10_distance - asym_points[3].log10_distance) < 0.1


# ---------------------------------------------------------------------------
# full-scale runs
# ---------------------------------------------------------------------------

@pytest.mark.extended
def test_partial_sums_at_k_100000():
    ctx = make_context(required_precision_for_generic(100000, 15))
    _, trace = ck_generic(100000, ctx, trace_stride=10000)
    with ctx.workdps():
        rows = {n: mpmath.nstr(s, 15, strip_zeros=False, min_fixed=0, max_fixed=0)
                for n, s in trace.rows}
    for n, printed in PARTIAL_SUMS_K100000:
        assert rows[n] == printed


def test_trace_magnitudes_mirror_around_the_middle():
    k = 200
    ctx = make_context(required_precision_for_generic(k, 20))
    _, trace = ck_generic(k, ctx, trace_stride=20)
    rows = dict(trace.rows)
    with ctx.workdps():
        for n in range(20, 100, 20):
            left = mpmath.log10(abs(rows[n]))
            right = mpmath.log10(abs(rows[k - n]))
            assert abs(left - right) < 1.5


@pytest.fixture(scope="module")
def small_k_generic():
    ctx = make_context(required_precision_for_generic(100, 120))
    value, _ = ck_generic(100, ctx)
    return value


def agreement_by_zero_count(k, c_generic, table, counts, ctx):
    terms = oscillation_terms(k, table, max(counts), ctx)
    trend = ck_trend(k, ctx)
    with ctx.workdps():
        return terms, {L: (digits_of_agreement(c_generic, trend + mpmath.fsum(terms[:L])),
                           abs(c_generic - trend - mpmath.fsum(terms[:L])))
                       for L in counts}


@pytest.mark.slow
def test_decomposition_at_k_1000(hundred_zeros_120, desk_generic):
    ctx = make_context(120)
    counts = (10, 25, 50, 100)
    _, results = agreement_by_zero_count(1000, desk_generic, hundred_zeros_120, counts, ctx)
    for L in counts:
        floor = truncation_floor(next_ordinate(hundred_zeros_120, L))
        assert results[L][1] <= 3 * floor * 100
    digits = [results[L][0] for L in counts]
    assert digits == sorted(digits)


@pytest.mark.slow
def test_decomposition_at_k_100(hundred_zeros_120, small_k_generic):
    ctx = make_context(120)
    counts = (10, 25, 50, 100)
    terms, results = agreement_by_zero_count(100, small_k_generic, hundred_zeros_120, counts,
                                             ctx)
    for L in counts[:-1]:
        assert results[L][1] <= 3 * abs(terms[L]) * 100
    digits = [results[L][0] for L in counts]
    assert digits == sorted(digits)


@pytest.mark.slow
def test_degraded_derivatives_stall_the_agreement(fifty_zeros_40, desk_generic):
    ctx = make_context(40)
    degraded = degrade_derivatives(fifty_zeros_40, 15)
    _, exact = agreement_by_zero_count(1000, desk_generic, fifty_zeros_40, (25, 50), ctx)
    _, stalled = agreement_by_zero_count(1000, desk_generic, degraded, (25, 50), ctx)
    assert abs(stalled[25][0] - stalled[50][0]) <= 1
    assert exact[50][0] >= stalled[50][0] + 10
