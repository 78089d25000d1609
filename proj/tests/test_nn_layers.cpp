#include <gtest/gtest.h>

#include <cmath>

#include "erfd/nn/layers.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace erfd;
using namespace erfd::nn;
using erfd::testing::random_tensor;

TEST(Conv3d, IdentityKernel) {
    Rng rng(1);
    const Tensor5 x = random_tensor({2, 3, 4, 5, 6}, rng);
    Tensor5 w({3, 3, 1, 1, 1});
    for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0, 0) = 1.0;
    const Tensor5 y = conv3d_forward(x, w, 1, 0);
    EXPECT_EQ(y.dims(), x.dims());
    EXPECT_EQ(y.data(), x.data());
}

TEST(Conv3d, OnesKernelOnConstant) {
    const Tensor5 x({1, 2, 5, 5, 5}, 1.5);
    const Tensor5 w({1, 2, 3, 3, 3}, 1.0);
    const Tensor5 y = conv3d_forward(x, w, 1, 1);
    ASSERT_EQ(y.dims(), (Tensor5::Dims{1, 1, 5, 5, 5}));
    for (int d = 1; d < 4; ++d) {
        for (int h = 1; h < 4; ++h) {
            for (int ww = 1; ww < 4; ++ww) EXPECT_NEAR(y.at(0, 0, d, h, ww), 2 * 27 * 1.5, 1e-12);
        }
    }
    // Corner voxels see 8 of the 27 taps.
    EXPECT_NEAR(y.at(0, 0, 0, 0, 0), 2 * 8 * 1.5, 1e-12);
}

TEST(Conv3d, MatchesDirectOracle) {
    Rng rng(2);
    for (int stride : {1, 2}) {
        for (int pad : {0, 1}) {
            const Tensor5 x = random_tensor({2, 3, 5, 6, 7}, rng);
            const Tensor5 w = random_tensor({4, 3, 3, 3, 3}, rng);
            const Tensor5 y = conv3d_forward(x, w, stride, pad);
            const int od = (5 + 2 * pad - 3) / stride + 1;
            const int oh = (6 + 2 * pad - 3) / stride + 1;
            const int ow = (7 + 2 * pad - 3) / stride + 1;
            ASSERT_EQ(y.dims(), (Tensor5::Dims{2, 4, od, oh, ow}));
            for (int n = 0; n < 2; ++n) {
                for (int o = 0; o < 4; ++o) {
                    for (int d = 0; d < od; ++d) {
                        for (int h = 0; h < oh; ++h) {
                            for (int q = 0; q < ow; ++q) {
                                double s = 0.0;
                                for (int c = 0; c < 3; ++c) {
                                    for (int a = 0; a < 3; ++a) {
                                        for (int b = 0; b < 3; ++b) {
                                            for (int e = 0; e < 3; ++e) {
                                                const int zd = d * stride - pad + a;
                                                const int zh = h * stride - pad + b;
                                                const int zw = q * stride - pad + e;
                                                if (zd < 0 || zh < 0 || zw < 0 || zd >= 5 ||
                                                    zh >= 6 || zw >= 7) {
                                                    continue;
                                                }
                                                s += w.at(o, c, a, b, e) * x.at(n, c, zd, zh, zw);
                                            }
                                        }
                                    }
                                }
                                ASSERT_NEAR(y.at(n, o, d, h, q), s, 1e-10);
                            }
                        }
                    }
                }
            }
        }
    }
}

TEST(Conv3d, ShapeErrors) {
    EXPECT_THROW(conv3d_forward(Tensor5({1, 2, 3, 3, 3}), Tensor5({1, 3, 1, 1, 1}), 1, 0), ShapeError);
    EXPECT_THROW(conv3d_forward(Tensor5({1, 2, 3, 3, 3}), Tensor5({1, 2, 2, 2, 2}), 1, 0), ShapeError);
    EXPECT_EQ(conv_output_extent(19, 3, 1, 1), 19);
    EXPECT_EQ(conv_output_extent(19, 3, 2, 0), 9);
}

TEST(Conv3d, BackwardIsThreadCountInvariant) {
    Rng rng(3);
    const Tensor5 x = random_tensor({5, 6, 4, 5, 6}, rng);
    const Tensor5 w = random_tensor({7, 6, 3, 3, 3}, rng);
    const Tensor5 g = random_tensor({5, 7, 4, 5, 6}, rng);
    const auto one = conv3d_backward(x, w, g, 1, 1, true, 1);
    const auto four = conv3d_backward(x, w, g, 1, 1, true, 4);
    EXPECT_EQ(one.weight.data(), four.weight.data());
    EXPECT_EQ(one.input.data(), four.input.data());
    EXPECT_EQ(conv3d_forward(x, w, 1, 1, 1).data(), conv3d_forward(x, w, 1, 1, 4).data());
}

TEST(GradientCheck, EveryLayerBelowOneMillionth) {
    for (const auto& report : erfd::testing::layer_grad_checks(7)) {
        EXPECT_LT(report.result.input_error, 1e-6) << report.name;
        EXPECT_LT(report.result.param_error, 1e-6) << report.name;
    }
}

TEST(BatchNorm, NormalizesPerChannel) {
    Rng rng(4);
    BatchNorm3d bn("bn", 3);
    Tensor5 x = random_tensor({4, 3, 2, 3, 4}, rng, 3.0);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += 5.0;
    const Tensor5 y = bn.forward(x, Mode::Train);
    const std::size_t per = y.spatial();
    auto moments = [&](const Tensor5& t, int c) {
        double sum = 0.0;
        double sq = 0.0;
        for (int n = 0; n < 4; ++n) {
            for (std::size_t i = 0; i < per; ++i) sum += t.plane(n, c)[i];
        }
        const double mean = sum / (4.0 * per);
        for (int n = 0; n < 4; ++n) {
            for (std::size_t i = 0; i < per; ++i) sq += std::pow(t.plane(n, c)[i] - mean, 2);
        }
        return std::pair{mean, sq / (4.0 * per)};
    };
    for (int c = 0; c < 3; ++c) {
        const double var_in = moments(x, c).second;
        const auto [mean, var] = moments(y, c);
        EXPECT_NEAR(mean, 0.0, 1e-12);
        // Unit variance up to the epsilon in the denominator.
        EXPECT_NEAR(var, var_in / (var_in + BatchNorm3d::kEpsilon), 1e-12);
    }
}

TEST(BatchNorm, NormalizedInputPassesThrough) {
    Rng rng(5);
    Tensor5 x = random_tensor({3, 2, 3, 3, 3}, rng);
    const std::size_t per = x.spatial();
    for (int c = 0; c < 2; ++c) {
        double sum = 0.0;
        for (int n = 0; n < 3; ++n) {
            for (std::size_t i = 0; i < per; ++i) sum += x.plane(n, c)[i];
        }
        const double mean = sum / (3.0 * per);
        double sq = 0.0;
        for (int n = 0; n < 3; ++n) {
            for (std::size_t i = 0; i < per; ++i) sq += std::pow(x.plane(n, c)[i] - mean, 2);
        }
        const double sd = std::sqrt(sq / (3.0 * per));
        for (int n = 0; n < 3; ++n) {
            for (std::size_t i = 0; i < per; ++i) x.plane(n, c)[i] = (x.plane(n, c)[i] - mean) / sd;
        }
    }
    BatchNorm3d bn("bn", 2);
    const Tensor5 y = bn.forward(x, Mode::Train);
    // Unit-variance input is only rescaled by the epsilon term.
    const double shrink = 1.0 / std::sqrt(1.0 + BatchNorm3d::kEpsilon);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i] * shrink, 1e-12);
}

TEST(BatchNorm, RunningStatsAndEvalMode) {
    BatchNorm3d bn("bn", 1);
    Tensor5 x({2, 1, 1, 1, 2}, std::vector<double>{1, 2, 3, 6});
    bn.forward(x, Mode::Train);
    // Batch mean 3, unbiased variance 14/3.
    EXPECT_NEAR(bn.running_mean()[0], 0.1 * 3.0, 1e-12);
    EXPECT_NEAR(bn.running_var()[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
    const Tensor5 y = bn.forward(x, Mode::Eval);
    const double sd = std::sqrt(bn.running_var()[0] + BatchNorm3d::kEpsilon);
    for (int i = 0; i < 4; ++i) {
        EXPECT_NEAR(y.data()[i], (x.data()[i] - bn.running_mean()[0]) / sd, 1e-12);
    }
    // A single constant sample stays finite.
    const Tensor5 flat({1, 1, 2, 2, 2}, 3.0);
    EXPECT_TRUE(bn.forward(flat, Mode::Train).all_finite());
}

TEST(Pooling, ExtentsAndConstants) {
    AvgPool3d pool;
    const Tensor5 x({1, 2, 24, 20, 19}, 2.5);
    const Tensor5 y = pool.forward(x);
    EXPECT_EQ(y.dims(), (Tensor5::Dims{1, 2, 12, 10, 9}));
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 2.5);
    EXPECT_EQ(pool.skipped_axes(), 0);

    AvgPool3d thin;
    const Tensor5 z = thin.forward(Tensor5({1, 1, 1, 4, 3}, 1.0));
    EXPECT_EQ(z.dims(), (Tensor5::Dims{1, 1, 1, 2, 1}));
    EXPECT_EQ(thin.skipped_axes(), 1);

    GlobalAvgPool gap;
    Tensor5 g({1, 1, 2, 1, 1}, std::vector<double>{1.0, 4.0});
    EXPECT_DOUBLE_EQ(gap.forward(g).data()[0], 2.5);
}

TEST(Softmax, RowsSumToOne) {
    Rng rng(6);
    Tensor5 logits = random_tensor({50, 2, 1, 1, 1}, rng, 20.0);
    logits.at(0, 0, 0, 0, 0) = 800.0;
    const Tensor5 p = softmax(logits);
    for (int n = 0; n < 50; ++n) {
        const double a = p.at(n, 0, 0, 0, 0);
        const double b = p.at(n, 1, 0, 0, 0);
        EXPECT_GE(a, 0.0);
        EXPECT_GE(b, 0.0);
        EXPECT_NEAR(a + b, 1.0, 1e-12);
    }
}

TEST(Softmax, CrossEntropyValue) {
    Tensor5 logits({2, 2, 1, 1, 1}, std::vector<double>{0.0, 0.0, 2.0, -1.0});
    const auto r = softmax_cross_entropy(logits, {1, 0});
    const double expected = 0.5 * (std::log(2.0) + std::log(1.0 + std::exp(-3.0)));
    EXPECT_NEAR(r.loss, expected, 1e-12);
    EXPECT_THROW(softmax_cross_entropy(logits, {1}), ShapeError);
}

TEST(Tensor, ConcatAndSlice) {
    Rng rng(8);
    const Tensor5 a = random_tensor({2, 3, 2, 2, 2}, rng);
    const Tensor5 b = random_tensor({2, 1, 2, 2, 2}, rng);
    const Tensor5 c = concat_channels(a, b);
    EXPECT_EQ(c.dims(), (Tensor5::Dims{2, 4, 2, 2, 2}));
    EXPECT_EQ(slice_channels(c, 0, 3).data(), a.data());
    EXPECT_EQ(slice_channels(c, 3, 1).data(), b.data());
    EXPECT_THROW(concat_channels(a, Tensor5({1, 1, 2, 2, 2})), ShapeError);
}
