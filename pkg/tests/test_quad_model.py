import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from commonbath.errors import ParameterError, StructureError, UnsupportedConfigurationError, UsageError
from commonbath.quad_model import (
    BathMode, BathSpec, QuadraticSystem, build_one_body_io, build_two_body_bilinear, build_two_body_common,
    extract_io_parameters, has_lower_bound, is_io_form, min_potential_eigenvalue, rescale_bath_cm,
    split_cm_rel, to_cm_rel,
)

from conftest import stiffness_by_polarization

positive = st.floats(0.1, 10.0)
baths = st.lists(st.tuples(positive, positive), min_size=0, max_size=6).map(BathSpec.from_pairs)


def common_potential(m, w, bath):
    def V(r):
        x1, x2, q = r[0], r[1], r[2:]
        out = 0.5 * m * w**2 * (x1**2 + x2**2)
        for (mj, wj), qj in zip(((b.mass, b.frequency) for b in bath), q):
            c = mj * wj**2
            # each oscillator's own IO bath, minus one copy of the free bath energy
            out += 0.5 * c * (qj - x1) ** 2 + 0.5 * c * (qj - x2) ** 2 - 0.5 * c * qj**2
        return out
    return V


def bilinear_potential(m, w, bath):
    def V(r):
        x1, x2, q = r[0], r[1], r[2:]
        out = 0.5 * m * w**2 * (x1**2 + x2**2)
        for b, qj in zip(bath, q):
            out += 0.5 * b.coupling * qj**2 - b.coupling * qj * (x1 + x2)
        return out
    return V


class TestBathTypes:
    def test_invalid_modes_rejected(self):
        with pytest.raises(ParameterError):
            BathMode(0.0, 1.0)
        with pytest.raises(ParameterError):
            BathMode(1.0, -2.0)
        with pytest.raises(ParameterError):
            BathMode(float("inf"), 1.0)

    def test_empty_bath(self):
        bath = BathSpec()
        assert len(bath) == 0
        assert bath.couplings.shape == (0,)

    def test_couplings(self):
        assert BathSpec.from_pairs([(2, 3)]).couplings[0] == 18.0


class TestBuilders:
    def test_bare_oscillator(self):
        sys = build_one_body_io(1.0, 1.0, BathSpec())
        np.testing.assert_array_equal(sys.stiffness, [[1.0]])
        assert sys.labels == ("x",)

    def test_one_body_single_mode(self, unit_bath):
        sys = build_one_body_io(1.0, 1.0, unit_bath)
        np.testing.assert_array_equal(sys.stiffness, [[2, -1], [-1, 1]])
        assert sys.roles == ("system", "bath")

    def test_one_body_free_particle_zero_mode(self, unit_bath):
        sys = build_one_body_io(1.0, 0.0, unit_bath)
        np.testing.assert_array_equal(sys.stiffness, [[1, -1], [-1, 1]])
        assert abs(min_potential_eigenvalue(sys)) < 1e-15

    def test_two_body_common_examples(self, unit_bath):
        np.testing.assert_array_equal(build_two_body_common(1, 1, BathSpec()).stiffness, np.eye(2))
        np.testing.assert_array_equal(
            build_two_body_common(1, 1, unit_bath).stiffness, [[2, 0, -1], [0, 2, -1], [-1, -1, 1]]
        )
        assert build_two_body_common(1, 1, BathSpec.from_pairs([(2, 3)])).stiffness[0, 0] == 19.0

    def test_two_body_bilinear_examples(self, unit_bath):
        np.testing.assert_array_equal(
            build_two_body_bilinear(1, 1, unit_bath).stiffness, [[1, 0, -1], [0, 1, -1], [-1, -1, 1]]
        )
        np.testing.assert_array_equal(
            build_two_body_bilinear(1, 1, BathSpec()).stiffness, build_two_body_common(1, 1, BathSpec()).stiffness
        )

    @settings(max_examples=50, deadline=None)
    @given(m=positive, w=st.floats(0.0, 10.0), bath=baths)
    def test_builders_match_hand_written_potentials(self, m, w, bath):
        n = len(bath) + 2
        for builder, potential in ((build_two_body_common, common_potential),
                                   (build_two_body_bilinear, bilinear_potential)):
            K = builder(m, w, bath).stiffness
            oracle = stiffness_by_polarization(potential(m, w, bath), n)
            np.testing.assert_allclose(K, oracle, rtol=1e-9, atol=1e-9 * np.max(np.abs(oracle)))

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            build_one_body_io(0.0, 1.0, BathSpec())
        with pytest.raises(ParameterError):
            build_two_body_common(1.0, -1.0, BathSpec())

    def test_quadratic_system_invariants(self):
        with pytest.raises(ParameterError):
            QuadraticSystem(("a", "b"), [1, 1], [[1, 0.5], [0.4, 1]], ("system", "bath"))
        with pytest.raises(UsageError):
            QuadraticSystem(("a",), [1, 1], [[1]], ("system",))
        with pytest.raises(ParameterError):
            QuadraticSystem(("a",), [-1], [[1]], ("system",))
        with pytest.raises(UsageError):
            QuadraticSystem(("a",), [1], [[1]], ("planet",))

    def test_values_are_read_only(self, unit_bath):
        sys = build_one_body_io(1, 1, unit_bath)
        with pytest.raises(ValueError):
            sys.stiffness[0, 0] = 5.0


class TestBoundedness:
    def test_common_zero_mode(self, unit_bath):
        sys = build_two_body_common(1, 1, unit_bath)
        assert abs(min_potential_eigenvalue(sys)) < 1e-14
        np.testing.assert_allclose(sys.stiffness @ np.array([1.0, 1.0, 2.0]), 0.0, atol=1e-15)

    def test_bilinear_no_lower_bound(self, unit_bath):
        lam = min_potential_eigenvalue(build_two_body_bilinear(1, 1, unit_bath))
        # characteristic polynomial route, independent of eigh
        roots = np.sort(np.roots(np.poly(np.array([[1, 0, -1], [0, 1, -1], [-1, -1, 1.0]]))).real)
        assert lam == pytest.approx(1 - np.sqrt(2), abs=1e-12)
        assert roots[0] == pytest.approx(1 - np.sqrt(2), abs=1e-12)

    def test_one_body_positive(self, rng):
        for _ in range(20):
            bath = BathSpec.from_arrays(rng.uniform(0.1, 5, 4), rng.uniform(0.1, 5, 4))
            assert min_potential_eigenvalue(build_one_body_io(rng.uniform(0.1, 5), rng.uniform(0.1, 5), bath)) > 0

    def test_has_lower_bound_examples(self):
        assert has_lower_bound(build_two_body_common(1, 1, BathSpec.from_pairs([(1, 0.5)]))).bounded
        report = has_lower_bound(build_two_body_common(1, 1, BathSpec.from_pairs([(1, 2)])))
        assert not report.bounded and report.violations
        assert has_lower_bound(build_two_body_common(1, 1, BathSpec())).bounded

    def test_unbounded_direction(self):
        # V along x1 = x2 = s, q = 2s is (m w^2 - sum c) s^2 = -3 s^2
        sys = build_two_body_common(1, 1, BathSpec.from_pairs([(1, 2)]))
        assert sys.potential(np.array([1.0, 1.0, 2.0])) == pytest.approx(-3.0)

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ParameterError):
            has_lower_bound(build_two_body_common(1, 1, BathSpec()), tol=-1)

    @settings(max_examples=200, deadline=None)
    @given(m=positive, w=positive, bath=baths)
    def test_common_sign_rule(self, m, w, bath):
        sys = build_two_body_common(m, w, bath)
        gap = m * w**2 - bath.couplings.sum()
        lam = np.linalg.eigvalsh(sys.stiffness)[0]
        tol = 1e-9 * sys.scale
        if abs(gap) > tol and abs(lam) > tol:
            assert np.sign(lam) == np.sign(gap)

    @settings(max_examples=100, deadline=None)
    @given(m=positive, w=positive, bath=baths)
    def test_bilinear_unbounded_beyond_half(self, m, w, bath):
        if 2 * bath.couplings.sum() > m * w**2 * (1 + 1e-6):
            assert min_potential_eigenvalue(build_two_body_bilinear(m, w, bath)) < 0


class TestCentreOfMass:
    def test_masses(self):
        cm = to_cm_rel(build_two_body_common(1, 1, BathSpec()))
        np.testing.assert_allclose(cm.masses, [2.0, 0.5])
        np.testing.assert_allclose(cm.stiffness, np.diag([2.0, 0.5]))
        assert cm.labels == ("X", "x")

    def test_couplings(self, unit_bath):
        cm = to_cm_rel(build_two_body_common(1, 1, unit_bath))
        assert cm.stiffness[0, 2] == pytest.approx(-2.0)
        assert cm.stiffness[1, 2] == 0.0

    def test_unequal_masses(self):
        sys = build_two_body_common(1, 1, BathSpec())
        odd = QuadraticSystem(sys.labels, [1.0, 2.0], sys.stiffness, sys.roles)
        with pytest.raises(UnsupportedConfigurationError):
            to_cm_rel(odd)

    def test_needs_two_system_coordinates(self, unit_bath):
        with pytest.raises(UsageError):
            to_cm_rel(build_one_body_io(1, 1, unit_bath))

    @settings(max_examples=30, deadline=None)
    @given(m=positive, w=positive, bath=baths, seed=st.integers(0, 2**32 - 1))
    def test_hamiltonian_preserved(self, m, w, bath, seed):
        rng = np.random.default_rng(seed)
        sys = build_two_body_common(m, w, bath)
        cm = to_cm_rel(sys)
        n = len(sys)
        for _ in range(100):
            r, p = rng.normal(size=n), rng.normal(size=n)
            X, x = (r[0] + r[1]) / 2, r[0] - r[1]
            P, pr = p[0] + p[1], (p[0] - p[1]) / 2
            new_r = np.concatenate([[X, x], r[2:]])
            new_p = np.concatenate([[P, pr], p[2:]])
            before = sys.energy(r, p)
            assert cm.energy(new_r, new_p) == pytest.approx(before, rel=1e-12, abs=1e-12 * sys.scale)

    @settings(max_examples=30, deadline=None)
    @given(m=positive, w=positive, bath=baths)
    def test_relative_sector_structure(self, m, w, bath):
        cm = to_cm_rel(build_two_body_common(m, w, bath))
        assert np.all(cm.stiffness[1, 2:] == 0.0)
        w_rel2 = w**2 + bath.couplings.sum() / m
        assert cm.stiffness[1, 1] == pytest.approx(cm.masses[1] * w_rel2, rel=1e-12)


class TestSplitAndRescale:
    @settings(max_examples=50, deadline=None)
    @given(m=positive, w=positive, bath=baths)
    def test_split_identity(self, m, w, bath):
        cm = to_cm_rel(build_two_body_common(m, w, bath))
        h_cm, h_rel = split_cm_rel(cm)
        tol = 1e-12 * max(cm.scale, 1.0)
        np.testing.assert_allclose(h_cm.stiffness + h_rel.stiffness, cm.stiffness, rtol=0, atol=tol)
        np.testing.assert_allclose(h_cm.inverse_masses + h_rel.inverse_masses, cm.inverse_masses,
                                   rtol=1e-12, atol=0)

    def test_relative_frequency(self, unit_bath):
        _, h_rel = split_cm_rel(to_cm_rel(build_two_body_common(1, 1, unit_bath)))
        i = h_rel.index("x")
        assert h_rel.stiffness[i, i] / h_rel.masses[i] == pytest.approx(2.0)

    def test_relative_bath_block_negative(self, rng):
        bath = BathSpec.from_arrays(rng.uniform(0.5, 2, 3), rng.uniform(0.5, 2, 3))
        _, h_rel = split_cm_rel(to_cm_rel(build_two_body_common(3, 3, bath)))
        b = h_rel.bath_indices
        assert np.all(np.linalg.eigvalsh(h_rel.stiffness[np.ix_(b, b)]) < 0)
        assert np.all(h_rel.masses[b] < 0)

    def test_split_needs_cm_coordinates(self, unit_bath):
        with pytest.raises(UsageError):
            split_cm_rel(build_two_body_common(1, 1, unit_bath))

    def test_rescale_example(self):
        h_cm, _ = split_cm_rel(to_cm_rel(build_two_body_common(1, 1, BathSpec.from_pairs([(2, 1)]))))
        out = rescale_bath_cm(h_cm)
        M, w, tilde = extract_io_parameters(out)
        assert (M, w) == pytest.approx((2.0, 1.0))
        assert tilde.masses[0] == pytest.approx(1.0)
        assert tilde.frequencies[0] == pytest.approx(2.0)
        assert is_io_form(out).is_io_form
        reduced = h_cm.drop_inert()
        np.testing.assert_allclose(out.stiffness, reduced.stiffness, rtol=0, atol=1e-14)

    def test_rescale_rejects_bilinear(self, unit_bath):
        h_cm, _ = split_cm_rel(to_cm_rel(build_two_body_bilinear(1, 1, unit_bath)))
        with pytest.raises(StructureError):
            rescale_bath_cm(h_cm)


class TestIOForm:
    def test_one_body_builder(self, rng):
        bath = BathSpec.from_arrays(rng.uniform(0.5, 2, 5), rng.uniform(0.5, 2, 5))
        assert is_io_form(build_one_body_io(1.3, 0.7, bath)).is_io_form

    def test_relative_part_fails(self, unit_bath):
        _, h_rel = split_cm_rel(to_cm_rel(build_two_body_common(1, 1, unit_bath)))
        report = is_io_form(h_rel)
        assert not report.is_io_form
        assert "negative bath diagonal block" in report.violations
        assert "counterterm without linear coupling" in report.violations

    def test_empty_bath_relative_part_is_trivially_io(self):
        _, h_rel = split_cm_rel(to_cm_rel(build_two_body_common(1, 1, BathSpec())))
        assert is_io_form(h_rel).is_io_form

    def test_rejects_two_system_coordinates(self, unit_bath):
        with pytest.raises(UsageError):
            is_io_form(build_two_body_common(1, 1, unit_bath))

    def test_inferred_counterterm(self, unit_bath):
        sys = build_one_body_io(1, 1, unit_bath)
        bare = QuadraticSystem(sys.labels, sys.masses, sys.stiffness, sys.roles)
        assert is_io_form(bare).is_io_form
        broken = bare.stiffness.copy()
        broken[0, 1] = broken[1, 0] = -0.5
        report = is_io_form(QuadraticSystem(sys.labels, sys.masses, broken, sys.roles))
        assert "coupling is not a complete square" in report.violations

    def test_bath_bath_coupling_detected(self, rng):
        bath = BathSpec.from_arrays([1, 1], [1, 2])
        sys = build_one_body_io(1, 1, bath)
        K = sys.stiffness.copy()
        K[1, 2] = K[2, 1] = 0.1
        report = is_io_form(QuadraticSystem(sys.labels, sys.masses, K, sys.roles, sys.counterterm))
        assert "bath-bath coupling" in report.violations

    @settings(max_examples=30, deadline=None)
    @given(m=positive, w=positive, bath=baths, seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, m, w, bath, seed):
        cm = to_cm_rel(build_two_body_common(m, w, bath))
        h_cm, h_rel = split_cm_rel(cm)
        perm = [0, 1, *(2 + np.random.default_rng(seed).permutation(len(bath)))]
        for part in (h_cm, h_rel):
            permuted = QuadraticSystem(
                tuple(part.labels[i] for i in perm), part.masses[perm], part.stiffness[np.ix_(perm, perm)],
                tuple(part.roles[i] for i in perm), part.counterterm[np.ix_(perm, perm)], partial=True,
            )
            a, b = is_io_form(part), is_io_form(permuted)
            assert a.is_io_form == b.is_io_form
            assert set(a.violations) == set(b.violations)
        assert is_io_form(h_cm).is_io_form
        assert is_io_form(rescale_bath_cm(h_cm)).is_io_form
        assert (len(bath) == 0) == is_io_form(h_rel).is_io_form
