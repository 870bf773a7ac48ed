"""Reference convolution and dot product against independent oracles."""
import random
from fractions import Fraction

import pytest

from pasm.convref import KernelSet, Tensor3, conv2d_ref, dot_ref, guard_bits
from pasm.errors import AccumulatorWidthError, FormatMismatchError, ShapeError
from pasm.fxp import FxpArray, QFormat, from_real, resize, wrap_raw

Q80 = QFormat(8, 0)
Q168 = QFormat(16, 8)


def scalar_conv_oracle(inp, kernels):
    """Independent triple-loop convolution on exact Fractions."""
    k = kernels.kernel_size
    out_w, out_h = inp.width - k + 1, inp.height - k + 1
    out = []
    for wx in range(out_w):
        for hy in range(out_h):
            for o in range(kernels.output_channels):
                total = Fraction(0)
                for x in range(k):
                    for y in range(k):
                        for i in range(kernels.input_channels):
                            total += (inp.at(wx + x, hy + y, i).exact()
                                      * kernels.at(o, x, y, i).exact())
                out.append(total)
    return out


class TestGuardBits:
    @pytest.mark.parametrize("n,g", [(0, 0), (1, 0), (2, 1), (3, 2), (4, 2),
                                     (5, 3), (800, 10), (1024, 10), (1025, 11)])
    def test_values(self, n, g):
        assert guard_bits(n) == g


class TestDotRef:
    def test_empty_sum(self):
        assert dot_ref([], [], QFormat(16, 0)).raw == 0

    def test_hand_case(self):
        images = FxpArray(Q80, [1, 2, 3])
        weights = FxpArray(Q80, [4, 5, 6])
        r = dot_ref(images, weights, QFormat(16, 0))
        assert r.raw == 32  # 4 + 10 + 18, confirmed by the integer oracle below
        assert r.raw == sum(a * b for a, b in zip([1, 2, 3], [4, 5, 6]))

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            dot_ref(FxpArray(Q80, [1]), FxpArray(Q80, [1, 2]), QFormat(16, 0))

    def test_guarded_accumulation_matches_big_integer_oracle(self):
        rng = random.Random(5)
        for _ in range(200):
            n = rng.randrange(0, 300)
            w = rng.choice((8, 16))
            fmt = QFormat(w, rng.randrange(0, w))
            raws_a = [rng.randrange(fmt.raw_min, fmt.raw_max + 1) for _ in range(n)]
            raws_b = [rng.randrange(fmt.raw_min, fmt.raw_max + 1) for _ in range(n)]
            acc = QFormat(2 * w + guard_bits(n), 2 * fmt.frac_bits)
            r = dot_ref(FxpArray(fmt, raws_a), FxpArray(fmt, raws_b), acc)
            assert r.raw == sum(a * b for a, b in zip(raws_a, raws_b))

    def test_wrap_around_matches_oracle_mod_width(self):
        rng = random.Random(6)
        acc = QFormat(12, 0)
        for _ in range(100):
            n = rng.randrange(0, 64)
            raws_a = [rng.randrange(-128, 128) for _ in range(n)]
            raws_b = [rng.randrange(-128, 128) for _ in range(n)]
            r = dot_ref(FxpArray(Q80, raws_a), FxpArray(Q80, raws_b), acc)
            exact = sum(a * b for a, b in zip(raws_a, raws_b))
            assert r.raw == wrap_raw(exact, 12)

    def test_truncating_accumulator_folds_per_element(self):
        # acc frac below product frac: each product is floored before the add
        fmt = QFormat(8, 2)
        images = FxpArray(fmt, [1, 1])    # 0.25 each
        weights = FxpArray(fmt, [1, 1])   # products: 1/16 each
        r = dot_ref(images, weights, QFormat(16, 2))
        assert r.raw == 0  # each 1/16 truncates to zero at 2 frac bits


class TestConv2dRef:
    def test_identity_kernel(self):
        rng = random.Random(1)
        raws = [rng.randrange(-2000, 2000) for _ in range(5 * 4 * 3)]
        inp = Tensor3(5, 4, 3, Q168, tuple(raws))
        one = from_real(1.0, Q168).raw
        kern = KernelSet(3, 1, 3, Q168, tuple(
            one if o == i else 0 for o in range(3) for i in range(3)
        ))
        out = conv2d_ref(inp, kern, QFormat(34, 16))
        assert out.raws == inp.raws
        assert (out.width, out.height, out.channels) == (5, 4, 3)

    def test_zero_kernels(self):
        inp = Tensor3(4, 4, 2, Q80, tuple(range(-16, 16)))
        kern = KernelSet(2, 3, 2, Q80, (0,) * 36)
        out = conv2d_ref(inp, kern, QFormat(22, 0))
        assert set(out.raws) == {0}

    def test_all_ones_3x3(self):
        one = from_real(1.0, Q168).raw
        inp = Tensor3(3, 3, 1, Q168, (one,) * 9)
        kern = KernelSet(1, 3, 1, Q168, (one,) * 9)
        out = conv2d_ref(inp, kern, QFormat(36, 16))
        assert out.width == out.height == 1
        assert out.at(0, 0, 0).value == 9.0
        oracle = scalar_conv_oracle(inp, kern)
        assert out.at(0, 0, 0).exact() == oracle[0]

    def test_matches_scalar_oracle_on_random_layers(self):
        rng = random.Random(9)
        for _ in range(15):
            k = rng.choice((1, 2, 3))
            width = rng.randrange(k, 7)
            height = rng.randrange(k, 7)
            c = rng.randrange(1, 4)
            oc = rng.randrange(1, 4)
            fmt = QFormat(12, 4)
            inp = Tensor3(width, height, c, fmt, tuple(
                rng.randrange(-500, 500) for _ in range(width * height * c)))
            kern = KernelSet(oc, k, c, fmt, tuple(
                rng.randrange(-500, 500) for _ in range(oc * k * k * c)))
            n = k * k * c
            acc = QFormat(24 + guard_bits(n), 8)
            out = conv2d_ref(inp, kern, acc)
            oracle = scalar_conv_oracle(inp, kern)
            for got, want in zip(out.raws, oracle):
                # output truncates the exact sum to the input format, wrapping
                assert got == wrap_raw((want * fmt.scale).__floor__(), fmt.total_bits)

    def test_k1_equals_per_pixel_dot(self):
        rng = random.Random(12)
        c = 5
        inp = Tensor3(3, 3, c, Q80, tuple(rng.randrange(-50, 50) for _ in range(45)))
        kern = KernelSet(1, 1, c, Q80, tuple(rng.randrange(-50, 50) for _ in range(c)))
        acc = QFormat(16 + guard_bits(c), 0)
        out = conv2d_ref(inp, kern, acc)
        weights = FxpArray(Q80, list(kern.raws))
        for x in range(3):
            for y in range(3):
                window = FxpArray(Q80, [inp.raws[inp.index(x, y, i)] for i in range(c)])
                dot = dot_ref(window, weights, acc)
                assert out.at(x, y, 0) == resize(dot, Q80)

    def test_linearity_in_exact_arithmetic(self):
        # value ranges sized so neither output wraps in the input format
        rng = random.Random(13)
        fmt = QFormat(16, 0)
        inp_raws = [rng.randrange(-10, 11) for _ in range(4 * 4 * 2)]
        kern_raws = [rng.randrange(-100, 101) for _ in range(2 * 2 * 2 * 2)]
        acc = QFormat(40, 0)
        base = conv2d_ref(Tensor3(4, 4, 2, fmt, tuple(inp_raws)),
                          KernelSet(2, 2, 2, fmt, tuple(kern_raws)), acc)
        scaled = conv2d_ref(Tensor3(4, 4, 2, fmt, tuple(3 * r for r in inp_raws)),
                            KernelSet(2, 2, 2, fmt, tuple(kern_raws)), acc)
        assert all(s == 3 * b for s, b in zip(scaled.raws, base.raws))

    def test_channel_mismatch(self):
        inp = Tensor3.zeros(4, 4, 2, Q80)
        kern = KernelSet(1, 3, 3, Q80, (0,) * 27)
        with pytest.raises(ShapeError):
            conv2d_ref(inp, kern, QFormat(22, 0))

    def test_kernel_larger_than_input(self):
        inp = Tensor3.zeros(2, 2, 1, Q80)
        kern = KernelSet(1, 3, 1, Q80, (0,) * 9)
        with pytest.raises(ShapeError):
            conv2d_ref(inp, kern, QFormat(22, 0))

    def test_accumulator_too_narrow(self):
        inp = Tensor3.zeros(4, 4, 1, Q80)
        kern = KernelSet(1, 3, 1, Q80, (0,) * 9)
        with pytest.raises(AccumulatorWidthError):
            conv2d_ref(inp, kern, QFormat(19, 0))  # needs 16 + ceil(log2 9) = 20
        conv2d_ref(inp, kern, QFormat(20, 0))

    def test_accumulator_frac_must_match_product(self):
        inp = Tensor3.zeros(4, 4, 1, Q168)
        kern = KernelSet(1, 3, 1, Q168, (0,) * 9)
        with pytest.raises(FormatMismatchError):
            conv2d_ref(inp, kern, QFormat(40, 8))
