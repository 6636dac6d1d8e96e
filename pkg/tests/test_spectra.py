import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfood.errors import DomainError
from rfood.spectra import (
    Spectrum,
    benign_diagnostics,
    critical_index,
    effective_rank,
    effective_ranks,
    highdim_diagnostics,
    identity_spectrum,
    make_example_spectrum,
    read_spectrum,
    spectrum_from_text,
    write_spectrum,
)

SIM1 = make_example_spectrum("sim1", 40)


def brute_effective_rank(lam, k):
    return sum(lam[k:]) / lam[k]


def brute_critical_index(lam, b, n):
    for k in range(len(lam)):
        if brute_effective_rank(lam, k) >= b * n:
            return k
    return None


def random_spectrum(rng, p_max=200):
    p = int(rng.integers(2, p_max + 1))
    lam = np.sort(10 ** rng.uniform(-4, 2, size=p))[::-1]
    return Spectrum(lam)


spectra = st.lists(
    st.floats(min_value=1e-6, max_value=1e3, allow_nan=False, allow_infinity=False),
    min_size=1,
    max_size=60,
).map(lambda xs: Spectrum.from_unsorted(xs))


class TestSpectrumType:
    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            Spectrum([1.0, 0.0])
        with pytest.raises(DomainError):
            Spectrum([1.0, -2.0])

    def test_rejects_increasing(self):
        with pytest.raises(DomainError):
            Spectrum([1.0, 2.0])

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            Spectrum([])

    def test_immutable(self):
        s = Spectrum([2.0, 1.0])
        with pytest.raises(ValueError):
            s.eigenvalues[0] = 5.0
        with pytest.raises(AttributeError):
            s.label = "x"

    def test_trace(self):
        s = Spectrum([3.0, 2.0, 1.0])
        assert s.trace == 6.0
        assert s.trace_sq == 14.0
        assert s.p == 3


class TestEffectiveRank:
    def test_identity(self):
        assert effective_rank(Spectrum([1, 1, 1, 1]), 0) == 4

    def test_sim1_k0(self):
        assert effective_rank(SIM1, 0) == pytest.approx(10.75, rel=1e-15)

    def test_sim1_k1(self):
        assert effective_rank(SIM1, 1) == pytest.approx(39.0, rel=1e-15)

    def test_last_index_is_one(self):
        assert effective_rank(SIM1, 39) == 1.0

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            effective_rank(SIM1, 40)
        with pytest.raises(DomainError):
            effective_rank(SIM1, -1)

    @given(st.integers(1, 300))
    def test_identity_is_p_minus_k(self, p):
        r = effective_ranks(identity_spectrum(p))
        np.testing.assert_array_equal(r, p - np.arange(p))

    @given(spectra)
    def test_positive(self, spec):
        assert np.all(effective_ranks(spec) > 0)

    @given(spectra, st.floats(1e-3, 1e3))
    def test_scale_free(self, spec, c):
        np.testing.assert_allclose(effective_ranks(spec.scaled(c)), effective_ranks(spec), rtol=1e-10)


class TestCriticalIndex:
    def test_identity(self):
        assert critical_index(Spectrum([1, 1, 1, 1]), 1, 2) == 0

    def test_sim1_small_b(self):
        assert critical_index(SIM1, 0.25, 40) == 0

    def test_sim1_undefined(self):
        assert critical_index(SIM1, 1, 40) is None

    def test_brute_force_agreement(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            spec = random_spectrum(rng)
            lam = spec.eigenvalues.tolist()
            k = int(rng.integers(0, spec.p))
            assert effective_rank(spec, k) == pytest.approx(brute_effective_rank(lam, k), rel=1e-10)
            b = float(rng.uniform(0.05, 3))
            n = int(rng.integers(1, 60))
            assert critical_index(spec, b, n) == brute_critical_index(lam, b, n)

    @given(spectra, st.floats(0.01, 10), st.integers(1, 100))
    def test_definition(self, spec, b, n):
        k = critical_index(spec, b, n)
        r = effective_ranks(spec)
        if k is None:
            assert np.all(r < b * n)
        else:
            assert r[k] >= b * n
            assert np.all(r[:k] < b * n)

    @given(spectra, st.floats(1e-3, 1e3), st.floats(0.01, 10), st.integers(1, 100))
    def test_scale_invariant(self, spec, c, b, n):
        # sums of scaled floats can move a ratio by an ulp right at the threshold
        k1, k2 = critical_index(spec, b, n), critical_index(spec.scaled(c), b, n)
        if k1 != k2:
            r = effective_ranks(spec)
            near = [k for k in (k1, k2) if k is not None]
            assert any(abs(r[k] - b * n) <= 1e-12 * b * n for k in near)


class TestBenignDiagnostics:
    def test_identity_arithmetic(self):
        d = benign_diagnostics(Spectrum([1, 1, 1, 1]), n=4, b=1.0, xi=1.0)
        assert d.r0_over_n == 1.0
        assert d.tail_ratio == pytest.approx(4.0)
        assert d.kstar == 0 and d.kstar_over_n == 0.0

    def test_undefined_propagates(self):
        d = benign_diagnostics(SIM1, n=40, b=1.0)
        assert d.kstar is None and d.kstar_over_n is None
        assert d.r0_over_n >= 0 and d.tail_ratio >= 0

    def test_example2_n32(self):
        spec = make_example_spectrum("example2", 32)
        assert benign_diagnostics(spec, 32, b=6.0).kstar == 2

    def test_example1_n4(self):
        spec = make_example_spectrum("example1", 4, s=0.5)
        assert benign_diagnostics(spec, 4, b=6.0).kstar == 1

    def test_example_ratios_shrink_in_n(self):
        # k*/n and the tail ratio fall for both examples; r0/n falls for Example 1
        for kind, s in (("example1", 0.5), ("example2", None)):
            ds = [benign_diagnostics(make_example_spectrum(kind, n, s=s), n, b=6.0) for n in (2, 3, 4, 5, 6, 8)]
            ks = [d.kstar_over_n for d in ds]
            tails = [d.tail_ratio for d in ds]
            assert all(a >= b for a, b in zip(ks, ks[1:]))
            assert all(a > b for a, b in zip(tails, tails[1:]))
            if kind == "example1":
                r0 = [d.r0_over_n for d in ds]
                assert all(a > b for a, b in zip(r0, r0[1:]))

    def test_example2_r0_over_n_rises_at_small_n(self):
        # r0 ~ 6 n^{5/6} - c, so r0/n only starts to fall for n around 8
        vals = [benign_diagnostics(make_example_spectrum("example2", n), n).r0_over_n for n in (2, 4, 8)]
        assert vals[0] < vals[1] < vals[2]


class TestHighDim:
    def test_boundary(self):
        n = 3
        d = highdim_diagnostics(identity_spectrum(n**4), n, n**4)
        assert d.n_le_p_quarter and d.p_quarter_margin == pytest.approx(1.0)
        assert d.m_ge_p

    def test_example1_n4(self):
        d = highdim_diagnostics(make_example_spectrum("example1", 4, s=0.5), 4, 1024)
        assert d.n_le_p_quarter
        assert d.p_quarter_margin * 4 == pytest.approx(1024**0.25)

    def test_m_below_p(self):
        assert not highdim_diagnostics(identity_spectrum(50), 2, 10).m_ge_p

    def test_ratios(self):
        d = highdim_diagnostics(identity_spectrum(16), 2, 100, threshold=2.0)
        assert d.trace_ratio == pytest.approx(16 / 2**0.75)
        assert d.log_ratio == pytest.approx(2 / math.log(100))
        assert d.trace_ok and not d.log_ok and not d.all_ok


class TestExampleSpectra:
    def test_sim1(self):
        s = make_example_spectrum("sim1", 40)
        assert s.eigenvalues[0] == 1.0
        np.testing.assert_array_equal(s.eigenvalues[1:], 0.25)
        assert s.p == 40

    def test_sim2(self):
        s = make_example_spectrum("sim2", 3)
        np.testing.assert_allclose(s.eigenvalues, [1, 2 ** (-5 / 12), 3 ** (-5 / 12)], rtol=1e-15)

    def test_example2(self):
        s = make_example_spectrum("example2", 2)
        assert s.p == 32 and s.eigenvalues[0] == 1.0
        np.testing.assert_allclose(s.eigenvalues, np.arange(1, 33) ** (-5 / 6), rtol=1e-15)

    def test_example1_formula(self):
        n, s = 3, 0.4
        p = n**5
        spec = make_example_spectrum("example1", n, s=s)
        assert spec.p == p and spec.eigenvalues[0] == 1.0
        k = np.arange(2, p + 1)
        tail = (1 + s * s - 2 * s * np.cos(k * np.pi / (p + 1))) / (
            (1 + s * s - 2 * s * np.cos(np.pi / (p + 1))) * n ** (21 / 5)
        )
        np.testing.assert_allclose(spec.eigenvalues[1:], np.sort(tail)[::-1], rtol=1e-14)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.2, 1.5, None])
    def test_example1_bad_s(self, s):
        with pytest.raises(DomainError):
            make_example_spectrum("example1", 2, s=s)

    def test_unknown(self):
        with pytest.raises(DomainError):
            make_example_spectrum("nope", 3)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        spec = Spectrum([1.0, 1 / 3, 0.1, 1e-9], label="demo")
        path = tmp_path / "s.txt"
        write_spectrum(spec, path)
        back = read_spectrum(path)
        assert back == spec and back.label == "demo"
        assert path.read_text().splitlines()[0] == "# label: demo"

    def test_decimal_notation(self, tmp_path):
        path = tmp_path / "s.txt"
        write_spectrum(Spectrum([1e-7]), path)
        assert "e" not in path.read_text().lower().replace("label", "")

    def test_bad_file(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("1.0\nabc\n")
        with pytest.raises(DomainError):
            read_spectrum(path)

    def test_from_text(self, tmp_path):
        assert spectrum_from_text("sim1", 4, 40) == SIM1
        assert spectrum_from_text("power(0.5)", 4, 3).eigenvalues[2] == pytest.approx(3**-0.5)
        path = tmp_path / "s.txt"
        write_spectrum(SIM1, path)
        assert spectrum_from_text(f"file:{path}", 1, 1) == SIM1
