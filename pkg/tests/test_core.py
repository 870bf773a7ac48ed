"""Two-phase dot product vs the weight-shared MAC baseline and the reference."""
import random
from collections import Counter

import pytest

from pasm import codebook as cbm
from pasm.codebook import Codebook, build_codebook, decode, encode
from pasm.convref import KernelSet, Tensor3, conv2d_ref, dot_ref, guard_bits
from pasm.core import (
    pas_accumulate,
    pas_reset,
    pasm_conv2d,
    pasm_dot,
    pasm_multiply_phase,
    ws_mac_dot,
)
from pasm.errors import (
    AccumulatorWidthError,
    FormatMismatchError,
    InvariantError,
    ShapeError,
)
from pasm.fxp import Fxp, FxpArray, QFormat, from_real, resize
from pasm.instrument import count_ops

Q80 = QFormat(8, 0)
Q160 = QFormat(16, 0)
Q248 = QFormat(24, 8)


def make_codebook(raws, fmt=Q80):
    wci = len(raws).bit_length() - 1
    return Codebook(tuple(Fxp(r, fmt) for r in raws), wci)


def random_stream(rng, fmt, b, n):
    quarter = 1 << (fmt.total_bits - 3)
    raws = [rng.getrandbits(fmt.total_bits - 2) - quarter for _ in range(n)]
    idxs = [rng.getrandbits(b.bit_length() - 1) for _ in range(n)]
    cw = [rng.getrandbits(fmt.total_bits - 2) - quarter for _ in range(b)]
    return FxpArray(fmt, raws, validate=False), idxs, make_codebook(cw, fmt)


def guarded_formats(fmt, b, n):
    g = guard_bits(n)
    w, f = fmt.total_bits, fmt.frac_bits
    acc_pas = QFormat(w + g, f)
    acc_mac = QFormat(2 * w + g, 2 * f)
    out = QFormat(acc_pas.total_bits + w + guard_bits(b), 2 * f)
    return acc_pas, acc_mac, out


class TestPasState:
    def test_reset(self):
        st = pas_reset(16, QFormat(40, 8))
        assert st.b == 16
        assert set(st.bins) == {0}
        st4 = pas_reset(4, Q160)
        assert st4.bins == (0, 0, 0, 0)

    def test_reset_rejects_non_power_of_two(self):
        with pytest.raises(InvariantError):
            pas_reset(12, Q160)

    def test_reset_then_multiply_is_zero(self):
        cb = make_codebook([3, -7, 19, 11])
        out = pasm_multiply_phase(pas_reset(4, Q160), cb, QFormat(32, 0))
        assert out.raw == 0

    def test_accumulate_is_functional_and_local(self):
        st0 = pas_reset(4, Q160)
        st1 = pas_accumulate(st0, Fxp(25, Q160), 2)
        assert st0.bins == (0, 0, 0, 0)
        assert st1.bins == (0, 0, 25, 0)
        st2 = pas_accumulate(st1, Fxp(-5, Q160), 2)
        assert st2.bins == (0, 0, 20, 0)
        changed = [i for i, (a, b) in enumerate(zip(st1.bins, st2.bins)) if a != b]
        assert changed == [2]

    def test_accumulate_zero_is_identity(self):
        st = pas_accumulate(pas_reset(4, Q160), Fxp(9, Q160), 1)
        assert pas_accumulate(st, Fxp(0, Q160), 3).bins == st.bins

    def test_accumulate_index_out_of_range(self):
        with pytest.raises(IndexError):
            pas_accumulate(pas_reset(4, Q160), Fxp(1, Q160), 4)

    def test_accumulate_frac_mismatch(self):
        with pytest.raises(FormatMismatchError):
            pas_accumulate(pas_reset(4, QFormat(16, 4)), Fxp(1, Q80), 0)

    def test_random_accumulates_match_per_bin_big_integer_sums(self):
        rng = random.Random(2)
        acc = QFormat(24, 0)
        st = pas_reset(8, acc)
        sums = [0] * 8
        for _ in range(1000):
            v = rng.randrange(-500, 501)
            k = rng.randrange(8)
            st = pas_accumulate(st, Fxp(v, Q160), k)
            sums[k] += v
        assert list(st.bins) == sums  # guarded width, so no wrap occurred


class TestWorkedExample:
    def test_accumulate_phase(self):
        st = pas_reset(2, Q248)
        st = pas_accumulate(st, from_real(26.7, Q248), 0)
        st = pas_accumulate(st, from_real(3.4, Q248), 1)
        st = pas_accumulate(st, from_real(6.1, Q248), 0)
        assert st.bins[0] == 6835 + 1562 == 8397
        assert st.bin_value(0).value == 32.80078125

    def test_multiply_phase(self):
        st = pas_reset(2, Q248)
        st = pas_accumulate(st, from_real(32.8, Q248), 0)
        cb = Codebook((from_real(1.7, Q248), from_real(0.0, Q248)), 1)
        out = pasm_multiply_phase(st, cb, QFormat(48, 16))
        assert out.raw == 8397 * 435

    def test_single_pair_both_paths(self):
        cb = make_codebook([3, 7, 19, 11], Q160)
        images = FxpArray(Q160, [25])
        a = pasm_dot(images, [2], cb, QFormat(24, 0), QFormat(48, 0))
        b = ws_mac_dot(images, [2], cb, QFormat(40, 0), QFormat(48, 0))
        assert a.raw == b.raw == 19 * 25 == 475


class TestMultiplyPhase:
    def test_two_bin_hand_case(self):
        st = pas_reset(2, Q160)
        st = pas_accumulate(st, Fxp(1, Q160), 0)
        st = pas_accumulate(st, Fxp(2, Q160), 1)
        cb = make_codebook([3, 4])
        assert pasm_multiply_phase(st, cb, QFormat(32, 0)).raw == 11

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            pasm_multiply_phase(pas_reset(4, Q160), make_codebook([3, 4]), Q160)

    def test_exactly_b_multiplies(self):
        for b in (2, 4, 16, 64):
            st = pas_reset(b, Q160)
            cb = make_codebook(list(range(b)))
            with count_ops() as ops:
                pasm_multiply_phase(st, cb, QFormat(40, 0))
            assert ops.multiplies == b


class TestDotEquivalence:
    def test_empty_inputs(self):
        cb = make_codebook([1, 2, 3, 4])
        assert pasm_dot(FxpArray(Q80, []), [], cb, Q160, QFormat(32, 0)).raw == 0
        assert ws_mac_dot(FxpArray(Q80, []), [], cb, Q160, QFormat(32, 0)).raw == 0

    def test_matches_explicit_phase_composition(self):
        rng = random.Random(21)
        for _ in range(50):
            b = rng.choice((2, 4, 8))
            images, idxs, cb = random_stream(rng, Q80, b, rng.randrange(0, 40))
            acc, _, out = guarded_formats(Q80, b, len(images))
            st = pas_reset(b, acc)
            for img, k in zip(images, idxs):
                st = pas_accumulate(st, img, k)
            composed = pasm_multiply_phase(st, cb, out)
            assert pasm_dot(images, idxs, cb, acc, out) == composed

    def test_200_random_cases_match_reference(self):
        rng = random.Random(22)
        for _ in range(200):
            fmt = QFormat(rng.choice((8, 16)), rng.choice((0, 3)))
            b = rng.choice((4, 16))
            n = rng.randrange(0, 200)
            images, idxs, cb = random_stream(rng, fmt, b, n)
            acc_pas, acc_mac, out = guarded_formats(fmt, b, n)
            r_pasm = pasm_dot(images, idxs, cb, acc_pas, out)
            r_ws = ws_mac_dot(images, idxs, cb, acc_mac, out)
            gathered = FxpArray(fmt, [cb.raws[k] for k in idxs], validate=False)
            r_ref = resize(dot_ref(images, gathered, acc_mac), out)
            assert r_pasm.raw == r_ws.raw == r_ref.raw

    def test_ws_mac_matches_big_integer_oracle(self):
        rng = random.Random(23)
        for _ in range(100):
            b = 8
            n = rng.randrange(0, 60)
            images, idxs, cb = random_stream(rng, Q80, b, n)
            _, acc_mac, out = guarded_formats(Q80, b, n)
            r = ws_mac_dot(images, idxs, cb, acc_mac, out)
            exact = sum(v * cb.raws[k] for v, k in zip(images.raws, idxs))
            assert r.raw == exact

    def test_constant_index_distributes(self):
        rng = random.Random(24)
        images, _, cb = random_stream(rng, Q80, 4, 30)
        k = 3
        _, acc_mac, out = guarded_formats(Q80, 4, 30)
        r = ws_mac_dot(images, [k] * 30, cb, acc_mac, out)
        assert r.raw == cb.raws[k] * sum(images.raws)

    def test_mixed_image_and_weight_formats(self):
        # images and shared weights may use different widths and fractions
        rng = random.Random(29)
        img_fmt = QFormat(8, 0)
        wt_fmt = QFormat(16, 4)
        b, n = 4, 50
        raws = [rng.randrange(-32, 32) for _ in range(n)]
        idxs = [rng.randrange(b) for _ in range(n)]
        cw = [rng.randrange(-2048, 2048) for _ in range(b)]
        cb = Codebook(tuple(Fxp(r, wt_fmt) for r in cw), 2)
        images = FxpArray(img_fmt, raws)
        acc_pas = QFormat(8 + guard_bits(n), 0)
        acc_mac = QFormat(24 + guard_bits(n), 4)
        out = QFormat(acc_pas.total_bits + 16 + guard_bits(b), 4)
        r_pasm = pasm_dot(images, idxs, cb, acc_pas, out)
        r_ws = ws_mac_dot(images, idxs, cb, acc_mac, out)
        gathered = FxpArray(wt_fmt, [cw[k] for k in idxs])
        r_ref = resize(dot_ref(images, gathered, acc_mac), out)
        exact = sum(v * cw[k] for v, k in zip(raws, idxs))
        assert r_pasm.raw == r_ws.raw == r_ref.raw == exact

    def test_narrow_wrap_around_variant_still_agrees(self):
        # ring behavior: every path wraps identically at a deliberately
        # narrow common width, even though none equals the exact sum
        rng = random.Random(25)
        narrow = QFormat(10, 0)
        for _ in range(300):
            b = rng.choice((2, 4))
            n = rng.randrange(0, 80)
            images, idxs, cb = random_stream(rng, Q80, b, n)
            r_pasm = pasm_dot(images, idxs, cb, narrow, narrow)
            r_ws = ws_mac_dot(images, idxs, cb, narrow, narrow)
            gathered = FxpArray(Q80, [cb.raws[k] for k in idxs], validate=False)
            r_ref = dot_ref(images, gathered, narrow)
            assert r_pasm.raw == r_ws.raw == r_ref.raw

    def test_permutation_invariance(self):
        rng = random.Random(26)
        images, idxs, cb = random_stream(rng, Q80, 4, 64)
        acc, _, out = guarded_formats(Q80, 4, 64)
        baseline = pasm_dot(images, idxs, cb, acc, out)
        paired = list(zip(images.raws, idxs))
        for _ in range(10):
            rng.shuffle(paired)
            shuffled = FxpArray(Q80, [p[0] for p in paired], validate=False)
            assert pasm_dot(shuffled, [p[1] for p in paired], cb, acc, out) == baseline

    def test_frequency_counting_mode(self):
        # images identically one in an integer format turn bins into counters
        rng = random.Random(27)
        idxs = [rng.randrange(8) for _ in range(500)]
        ones = FxpArray(Q160, [1] * 500)
        st = pas_reset(8, QFormat(26, 0))
        for k in idxs:
            st = pas_accumulate(st, ones[0], k)
        assert list(st.bins) == [Counter(idxs)[k] for k in range(8)]

    def test_multiplication_counts(self):
        rng = random.Random(28)
        for n, b in ((0, 4), (17, 4), (256, 16), (100, 64)):
            images, idxs, cb = random_stream(rng, Q80, b, n)
            acc_pas, acc_mac, out = guarded_formats(Q80, b, n)
            with count_ops() as pasm_ops:
                pasm_dot(images, idxs, cb, acc_pas, out)
            with count_ops() as ws_ops:
                ws_mac_dot(images, idxs, cb, acc_mac, out)
            assert pasm_ops.multiplies == b
            assert pasm_ops.bin_writes == n
            assert ws_ops.multiplies == n

    def test_length_mismatch_and_bad_index(self):
        cb = make_codebook([1, 2, 3, 4])
        images = FxpArray(Q80, [1, 2])
        with pytest.raises(ShapeError):
            pasm_dot(images, [0], cb, Q160, QFormat(32, 0))
        with pytest.raises(IndexError):
            pasm_dot(images, [0, 4], cb, Q160, QFormat(32, 0))
        with pytest.raises(IndexError):
            ws_mac_dot(images, [0, -1], cb, Q160, QFormat(32, 0))


def random_conv_case(rng, fmt, k, b):
    width = rng.randrange(k, 9)
    height = rng.randrange(k, 9)
    c = rng.randrange(1, 5)
    oc = rng.randrange(1, 4)
    quarter = 1 << (fmt.total_bits - 3)
    inp = Tensor3(width, height, c, fmt, tuple(
        rng.getrandbits(fmt.total_bits - 2) - quarter
        for _ in range(width * height * c)))
    kern = KernelSet(oc, k, c, fmt, tuple(
        rng.getrandbits(fmt.total_bits - 2) - quarter
        for _ in range(oc * k * k * c)))
    cb = build_codebook(FxpArray(fmt, list(kern.raws), validate=False), b,
                        rng.choice(cbm.METHODS))
    return inp, cb, encode(kern, cb)


def conv_formats(fmt, k, c, b):
    n = k * k * c
    w, f = fmt.total_bits, fmt.frac_bits
    acc = QFormat(w + guard_bits(n), f)
    out = QFormat(acc.total_bits + w + guard_bits(b), 2 * f)
    ref_acc = QFormat(2 * w + guard_bits(n), 2 * f)
    return acc, out, ref_acc


class TestPasmConv2d:
    def test_identity_codebook_crops_input(self):
        fmt = QFormat(16, 4)
        one = from_real(1.0, fmt)
        cb = Codebook((one, Fxp(0, fmt)), 1)
        rng = random.Random(31)
        inp = Tensor3(4, 3, 1, fmt, tuple(rng.randrange(-200, 200) for _ in range(12)))
        kern = KernelSet(1, 1, 1, fmt, (one.raw,))
        enc = encode(kern, cb)
        out = pasm_conv2d(inp, enc, cb, QFormat(16, 4), QFormat(40, 8))
        assert out.raws == inp.raws

    def test_matches_reference_on_random_layers(self):
        rng = random.Random(32)
        for _ in range(40):
            fmt = QFormat(rng.choice((8, 16)), rng.choice((0, 4)))
            k = rng.choice((1, 2, 3))
            b = rng.choice((4, 16))
            inp, cb, enc = random_conv_case(rng, fmt, k, b)
            acc, out, ref_acc = conv_formats(fmt, k, enc.input_channels, b)
            got = pasm_conv2d(inp, enc, cb, acc, out)
            want = conv2d_ref(inp, decode(enc), ref_acc)
            assert got == want

    def test_operation_counts_for_5x5_32_channel_window(self):
        rng = random.Random(33)
        fmt = Q160
        k, c, b = 5, 32, 16
        inp = Tensor3(5, 5, c, fmt, tuple(
            rng.randrange(-100, 100) for _ in range(5 * 5 * c)))
        kern = KernelSet(1, k, c, fmt, tuple(
            rng.randrange(-100, 100) for _ in range(k * k * c)))
        cb = build_codebook(FxpArray(fmt, list(kern.raws), validate=False), b)
        enc = encode(kern, cb)
        acc, out, _ = conv_formats(fmt, k, c, b)
        with count_ops() as ops:
            result = pasm_conv2d(inp, enc, cb, acc, out)
        assert result.width == result.height == 1  # one output element
        assert ops.bin_writes == 800               # 5*5*32 accumulations
        assert ops.multiplies == b                 # one per bin

    def test_rejects_narrow_bin_accumulator(self):
        rng = random.Random(34)
        inp, cb, enc = random_conv_case(rng, Q80, 3, 4)
        n = 9 * enc.input_channels
        _, out, _ = conv_formats(Q80, 3, enc.input_channels, 4)
        with pytest.raises(AccumulatorWidthError):
            pasm_conv2d(inp, enc, cb, QFormat(8 + guard_bits(n) - 1, 0), out)

    def test_rejects_narrow_output_accumulator(self):
        rng = random.Random(35)
        inp, cb, enc = random_conv_case(rng, Q80, 2, 4)
        acc, _, _ = conv_formats(Q80, 2, enc.input_channels, 4)
        with pytest.raises(AccumulatorWidthError):
            pasm_conv2d(inp, enc, cb, acc, QFormat(acc.total_bits + 8 + 1, 0))

    def test_rejects_channel_mismatch(self):
        rng = random.Random(36)
        inp, cb, enc = random_conv_case(rng, Q80, 2, 4)
        bad = Tensor3.zeros(4, 4, enc.input_channels + 1, Q80)
        acc, out, _ = conv_formats(Q80, 2, enc.input_channels, 4)
        with pytest.raises(ShapeError):
            pasm_conv2d(bad, enc, cb, acc, out)
