import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satolab.errors import DensityUnavailable, SpecError
from satolab.levy_core import (
    DirectionMeasure,
    Custom,
    LevyProfile,
    Lognormal,
    PowerKernel,
    ProcessSpec,
    Stable,
    StepKernel,
    StudentT,
    TabulatedKernel,
    TailFn,
    PowerLog,
    K_of_r,
    L_of_r,
    M_of_r,
    eta_l_tail,
    gaussian_spec,
    K_tailfn,
)

# frozen independent oracles (mpmath, 30 digits)
CAUCHY_L1 = 0.46833071736273074706  # (2/pi)(arctan e^3 - arctan 1)
LOGNORMAL_L1 = 0.49865010196836990547  # Phi(3) - Phi(0)
LOGNORMAL_M1 = 0.19947114020071633897  # p(1)/2
STUDENT3_M2 = 0.02546479089470325425  # Gamma(2)/(sqrt(pi) Gamma(3/2)) 5^{-2}
ETA_POWER = 0.22396733584274423980  # alpha=1.5, H=1, l=2, r=2


def power_profile(alpha=1.0, c=1.0):
    return LevyProfile(DirectionMeasure.positive_1d(c), PowerKernel(alpha))


class TestK:
    def test_power_law_value(self):
        prof = LevyProfile(DirectionMeasure.positive_1d(3.0), PowerKernel(1.0))
        assert K_of_r(prof, 2.0) == pytest.approx(1.5, rel=1e-14)

    def test_zero_profile(self):
        prof = LevyProfile.zero(1)
        assert np.all(K_of_r(prof, np.geomspace(1e-3, 1e3, 7)) == 0)

    def test_symmetric_two_atoms(self):
        prof = LevyProfile(DirectionMeasure.symmetric_1d(2.0), PowerKernel(0.5))
        assert K_of_r(prof, 4.0) == pytest.approx(1.0)  # total weight 2 times 4^{-1/2}

    def test_rejects_nonpositive_r(self):
        with pytest.raises(ValueError):
            K_of_r(power_profile(), 0.0)


class TestEta:
    def test_power_closed_form(self):
        prof = power_profile(1.5)
        assert eta_l_tail(prof, 2, 1.0, 2.0) == pytest.approx(ETA_POWER, rel=1e-9)

    def test_zero_kernel(self):
        assert eta_l_tail(LevyProfile.zero(1), 1, 1.0, 3.0) == 0.0

    def test_additivity(self):
        prof, H, r = power_profile(0.8), 0.7, 1.3
        two = eta_l_tail(prof, 2, H, r)
        one = eta_l_tail(prof, 1, H, r) + eta_l_tail(prof, 1, H, math.exp(H) * r)
        assert two == pytest.approx(one, rel=1e-8)

    def test_step_kernel_stops_at_support(self):
        prof = LevyProfile(DirectionMeasure.positive_1d(), StepKernel.from_values([5.0], [1.0, 0.0]))
        assert eta_l_tail(prof, 1, 1.0, 10.0) == 0.0
        assert eta_l_tail(prof, 1, 1.0, 2.0) == pytest.approx(math.log(2.5), rel=1e-9)  # window [2, 2e] cut at 5

    def test_bad_l(self):
        with pytest.raises(ValueError):
            eta_l_tail(power_profile(), 0, 1.0, 1.0)


class TestLM:
    def test_cauchy_L_quadrature(self):
        spec = ProcessSpec(1.0, 1, StudentT(1.0))
        est, se = L_of_r(spec, 1.0)
        assert se == 0.0
        assert est == pytest.approx(CAUCHY_L1, rel=1e-7)

    def test_lognormal_L(self):
        est, _ = L_of_r(ProcessSpec(1.0, 1, Lognormal()), 1.0)
        assert est == pytest.approx(LOGNORMAL_L1, rel=1e-7)

    def test_L_vanishes_far_out(self):
        est, _ = L_of_r(ProcessSpec(1.0, 1, StudentT(3.0)), 1e8)
        assert est < 1e-20

    def test_L_monte_carlo_positive(self):
        spec = ProcessSpec(1.0 / 1.5, 1, Stable(1.5))
        est, se = L_of_r(spec, 1.0, n_mc=20_000, rng=1)
        assert est > 0 and se > 0

    def test_student_M(self):
        assert M_of_r(ProcessSpec(1.0, 1, StudentT(3.0)), 2.0) == pytest.approx(STUDENT3_M2, rel=1e-12)

    def test_symmetric_M_equals_density(self):
        spec = ProcessSpec(1.0, 1, StudentT(2.5))
        assert M_of_r(spec, 1.7) == pytest.approx(float(spec.density(1.7)), rel=1e-14)

    def test_lognormal_M_halved(self):
        assert M_of_r(ProcessSpec(1.0, 1, Lognormal()), 1.0) == pytest.approx(LOGNORMAL_M1, rel=1e-12)

    def test_M_unavailable(self):
        with pytest.raises(DensityUnavailable):
            M_of_r(ProcessSpec(1 / 1.5, 1, Stable(1.5)), 1.0)


class TestValidation:
    def test_deterministic_rejected(self):
        with pytest.raises(SpecError):
            ProcessSpec(1.0, 1, Custom(LevyProfile.zero(1)))

    def test_bad_H(self):
        with pytest.raises(SpecError):
            ProcessSpec(0.0, 1, Stable(1.0))

    def test_bessel_H_fixed(self):
        from satolab.levy_core import BesselHit

        with pytest.raises(SpecError):
            ProcessSpec(1.0, 1, BesselHit(3))
        assert ProcessSpec(2.0, 1, BesselHit(3)).H == 2.0

    def test_gaussian_part_must_be_psd(self):
        with pytest.raises(SpecError):
            gaussian_spec([[1.0, 2.0], [2.0, 1.0]])

    def test_direction_atoms_unit(self):
        with pytest.raises(SpecError):
            DirectionMeasure(np.array([[2.0]]), np.array([1.0]))

    def test_direction_weights_positive(self):
        with pytest.raises(SpecError):
            DirectionMeasure(np.array([[1.0]]), np.array([0.0]))

    def test_increasing_kernel_rejected(self):
        with pytest.raises(SpecError):
            LevyProfile(DirectionMeasure.positive_1d(), TabulatedKernel(np.array([1.0, 2.0]), np.array([1.0, 2.0])))

    def test_levy_integrability(self):
        with pytest.raises(SpecError):
            power_profile(2.5)  # small-jump part not integrable
        with pytest.raises(SpecError):
            power_profile(0.0)  # large-jump part not integrable

    def test_weibull_range(self):
        from satolab.levy_core import Weibull

        with pytest.raises(SpecError):
            Weibull(1.5)

    def test_tailfn_monotone_kinds(self):
        with pytest.raises(SpecError):
            TailFn("K", np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        TailFn("custom", np.array([1.0, 2.0]), np.array([1.0, 2.0]))


class TestSerialization:
    def test_spec_round_trip(self):
        prof = LevyProfile(DirectionMeasure.symmetric_1d(), TabulatedKernel(np.geomspace(0.1, 10, 9), np.geomspace(5, 0.01, 9)))
        spec = ProcessSpec(0.5, 1, Custom(prof), np.array([[2.0]]), np.array([0.1]), 1.5)
        back = ProcessSpec.from_dict(spec.to_dict())
        r = np.geomspace(1e-3, 1e3, 50)
        assert np.array_equal(back.K(r), spec.K(r))
        assert back.to_dict() == spec.to_dict()

    def test_tailfn_bit_exact(self):
        r = np.geomspace(1.0, 1e6, 37)
        f = TailFn("custom", r, 1 / (r + np.pi), PowerLog(1.0, 1.0, 0.0))
        back = TailFn.from_dict(f.to_dict())
        assert np.array_equal(back.values, f.values) and np.array_equal(back.r, f.r)

    def test_stable_spec_round_trip(self):
        spec = ProcessSpec(1.0, 1, Stable(1.0, scale=2.0))
        assert ProcessSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()


class TestKTailFn:
    def test_stable_family_attached(self):
        f = K_tailfn(ProcessSpec(1.0, 1, Stable(1.0)))
        assert f.kind == "K" and f.family is not None and f.family.name == "power_log"


# properties

@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.1, 1.9), r1=st.floats(1e-3, 1e3), r2=st.floats(1e-3, 1e3))
def test_K_decreasing(alpha, r1, r2):
    prof = power_profile(alpha)
    lo, hi = min(r1, r2), max(r1, r2)
    assert K_of_r(prof, lo) >= K_of_r(prof, hi)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.2, 1.8), r=st.floats(0.01, 100.0), eps=st.sampled_from([0.01, 0.1]),
       H=st.floats(0.3, 2.0), l=st.integers(1, 3))
def test_eta_sandwich(alpha, r, eps, H, l):
    prof = power_profile(alpha)
    eta = eta_l_tail(prof, l, H, r)
    assert eta <= l * H * K_of_r(prof, r) * (1 + 1e-9)
    assert eta >= math.log1p(eps) * K_of_r(prof, (1 + eps) * r) * (1 - 1e-9)


@settings(max_examples=15, deadline=None)
@given(r=st.floats(1e-3, 1e5))
def test_L_positive_for_nondeterministic(r):
    for spec in (ProcessSpec(1.0, 1, StudentT(2.0)), ProcessSpec(1.0, 1, Lognormal())):
        assert L_of_r(spec, r)[0] > 0
