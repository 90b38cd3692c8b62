#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "strnet/grad_check.hpp"
#include "strnet/gru.hpp"
#include "strnet/ops.hpp"
#include "strnet/tensor.hpp"

using namespace strnet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> d(shape_numel(shape));
  for (auto& v : d) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(d));
}

// Naive triple loop, independent of the library matmul path.
std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
  std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t l = 0; l < k; ++l) out[i * p + j] += a.at(i, l) * b.at(l, j);
  return out;
}

// Direct DFT by summation, used as the spectral oracle.
std::vector<std::complex<double>> dft_oracle(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      double ang = -2.0 * M_PI * double(k) * double(t) / double(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST(Tensor, ShapeDataInvariant) {
  EXPECT_THROW(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
  Tensor t({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(t.size(), 4u);
  EXPECT_DOUBLE_EQ(t.at(1, 0), 3.0);
}

TEST(Tensor, NonFiniteConstructionRejected) {
  EXPECT_THROW(Tensor({2}, {1.0, std::nan("")}), NumericError);
  EXPECT_THROW(Tensor({1}, {INFINITY}), NumericError);
}

TEST(Matmul, IdentityCase) {
  Rng rng(7);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor out = matmul(a, Tensor::identity(3));
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_DOUBLE_EQ(out.values()[i], a.values()[i]);
}

TEST(Matmul, HandExample) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {5, 6});
  Tensor out = matmul(a, b);
  EXPECT_DOUBLE_EQ(out.at(0, 0), 17.0);
  EXPECT_DOUBLE_EQ(out.at(1, 0), 39.0);
}

TEST(Matmul, ZeroOperand) {
  Rng rng(11);
  Tensor a = random_tensor({2, 4}, rng);
  Tensor out = matmul(a, Tensor::zeros({4, 3}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Matmul, ShapeMismatchReportsBothShapes) {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({2, 2}, {1, 2, 3, 4});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[2x2]"), std::string::npos);
  }
}

TEST(Matmul, MatchesNaiveOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor a = random_tensor({4, 6}, rng);
    Tensor b = random_tensor({6, 3}, rng);
    auto expect = matmul_oracle(a, b);
    Tensor out = matmul(a, b);
    for (std::size_t i = 0; i < expect.size(); ++i)
      EXPECT_NEAR(out.values()[i], expect[i], 1e-12);
  }
}

TEST(Softmax, EqualLogits) {
  Tensor out = softmax(Tensor::zeros({4}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, Singleton) {
  Tensor out = softmax(Tensor({1}, {3.7}));
  EXPECT_DOUBLE_EQ(out.values()[0], 1.0);
}

TEST(Softmax, ClosedForm) {
  Tensor out = softmax(Tensor({2}, {0.0, std::log(3.0)}));
  EXPECT_NEAR(out.values()[0], 0.25, 1e-15);
  EXPECT_NEAR(out.values()[1], 0.75, 1e-15);
}

TEST(Softmax, SimplexProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor v = random_tensor({7}, rng, -30.0, 30.0);
    Tensor out = softmax(v);
    double sum = 0.0;
    for (double y : out.values()) {
      EXPECT_GE(y, 0.0);
      sum += y;
    }
    EXPECT_LT(std::abs(sum - 1.0), 1e-12);
  }
}

TEST(Conv1dSame, IdentityKernel) {
  // width-1 kernel equal to the channel identity
  const std::size_t c = 3;
  std::vector<double> k(c * c * 1, 0.0);
  for (std::size_t i = 0; i < c; ++i) k[(i * c + i) * 1] = 1.0;
  Tensor kernels({c, c, 1}, std::move(k));
  Rng rng(3);
  Tensor x = random_tensor({5, c}, rng);
  Tensor out = conv1d_same(x, kernels, Tensor::zeros({c}));
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(out.values()[i], x.values()[i], 1e-15);
}

TEST(Conv1dSame, HandConvolution) {
  Tensor x({3, 1}, {0, 3, 6});
  Tensor kernels({1, 1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  Tensor out = conv1d_same(x, kernels, Tensor::zeros({1}));
  EXPECT_NEAR(out.at(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(out.at(1, 0), 3.0, 1e-15);
  EXPECT_NEAR(out.at(2, 0), 3.0, 1e-15);
}

TEST(Conv1dSame, ZeroKernels) {
  Rng rng(9);
  Tensor x = random_tensor({4, 2}, rng);
  Tensor out = conv1d_same(x, Tensor::zeros({2, 2, 3}), Tensor::zeros({2}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Conv1dSame, EvenWidthRejected) {
  Tensor x({4, 1}, {1, 2, 3, 4});
  EXPECT_THROW(conv1d_same(x, Tensor::zeros({1, 1, 2}), Tensor::zeros({1})), ValueError);
}

TEST(GlobalAvgPool, ConstantSequence) {
  Tensor x = Tensor::full({6, 3}, 2.5);
  Tensor out = global_avg_pool_time(x);
  ASSERT_EQ(out.shape(), (Shape{3}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(GlobalAvgPool, TwoPointMean) {
  Tensor x({2, 1}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(global_avg_pool_time(x).values()[0], 2.0);
}

TEST(GlobalAvgPool, MatchesSummationOracle) {
  Rng rng(13);
  Tensor x = random_tensor({9, 4}, rng);
  Tensor out = global_avg_pool_time(x);
  for (std::size_t c = 0; c < 4; ++c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < 9; ++t) acc += x.at(t, c);
    EXPECT_NEAR(out.values()[c], acc / 9.0, 1e-12);
  }
}

TEST(GlobalAvgPool, ZeroFramesRejected) {
  Tensor x = Tensor::zeros({0, 3});
  EXPECT_THROW(global_avg_pool_time(x), ValueError);
}

TEST(FftRoundtrip, IdentityForPow2Lengths) {
  Rng rng(17);
  for (std::size_t t : {1u, 2u, 4u, 8u, 16u}) {
    Tensor x = random_tensor({t, 3}, rng);
    Tensor out = fft_roundtrip(x);
    double max_err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      max_err = std::max(max_err, std::abs(out.values()[i] - x.values()[i]));
    EXPECT_LT(max_err, 1e-9) << "T=" << t;
  }
}

TEST(FftRoundtrip, IdentityForNonPow2Length) {
  Rng rng(19);
  Tensor x = random_tensor({6, 2}, rng);
  Tensor out = fft_roundtrip(x);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_NEAR(out.values()[i], x.values()[i], 1e-9);
}

TEST(FftSpectrum, ConstantSequenceIsDcOnly) {
  std::vector<std::complex<double>> buf(8, {3.0, 0.0});
  auto spec = fft::forward(buf);
  EXPECT_NEAR(spec[0].real(), 24.0, 1e-12);
  for (std::size_t k = 1; k < spec.size(); ++k) EXPECT_LT(std::abs(spec[k]), 1e-12);
}

TEST(FftSpectrum, CosineConcentratesInConjugateBins) {
  const std::size_t t_len = 8;
  std::vector<double> x(t_len);
  for (std::size_t t = 0; t < t_len; ++t) x[t] = std::cos(2.0 * M_PI * double(t) / t_len);
  // library FFT vs the direct-summation oracle
  std::vector<std::complex<double>> buf(t_len);
  for (std::size_t t = 0; t < t_len; ++t) buf[t] = {x[t], 0.0};
  auto spec = fft::forward(buf);
  auto oracle = dft_oracle(x);
  for (std::size_t k = 0; k < t_len; ++k) EXPECT_LT(std::abs(spec[k] - oracle[k]), 1e-9);
  // energy only in bins 1 and T-1
  EXPECT_NEAR(std::abs(spec[1]), 4.0, 1e-9);
  EXPECT_NEAR(std::abs(spec[t_len - 1]), 4.0, 1e-9);
  for (std::size_t k = 0; k < t_len; ++k) {
    if (k == 1 || k == t_len - 1) continue;
    EXPECT_LT(std::abs(spec[k]), 1e-9) << "bin " << k;
  }
}

TEST(FftRoundtrip, RemoveDcSubtractsTemporalMean) {
  Rng rng(23);
  Tensor x = random_tensor({8, 1}, rng);
  fft::SpectralMask mask{fft::MaskMode::kRemoveDc, 0.0};
  Tensor out = fft_roundtrip(x, mask);
  double mean = 0.0;
  for (std::size_t t = 0; t < 8; ++t) mean += x.at(t, 0);
  mean /= 8.0;
  for (std::size_t t = 0; t < 8; ++t) EXPECT_NEAR(out.at(t, 0), x.at(t, 0) - mean, 1e-9);
}

TEST(FftRoundtrip, NonFiniteInputRejected) {
  std::vector<double> d(8, 0.0);
  Tensor x({8, 1}, std::move(d));
  // construct a non-finite tensor through an op to bypass ctor validation
  Tensor bad = div(x, x);  // 0/0 -> NaN
  EXPECT_THROW(fft_roundtrip(bad), NumericError);
}

TEST(DiffSequence, HandExamples) {
  Tensor x({3, 1}, {1, 3, 6});
  Tensor d = diff_sequence(x);
  ASSERT_EQ(d.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(d.at(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(d.at(1, 0), 3.0);

  Tensor constant = Tensor::full({5, 2}, 4.2);
  Tensor dc = diff_sequence(constant);
  for (double v : dc.values()) EXPECT_DOUBLE_EQ(v, 0.0);

  std::vector<double> ramp(6);
  for (int t = 0; t < 6; ++t) ramp[t] = 0.5 * t;
  Tensor dr = diff_sequence(Tensor({6, 1}, std::move(ramp)));
  for (double v : dr.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(DiffSequence, TooShortRejected) {
  Tensor x({1, 2}, {1, 2});
  EXPECT_THROW(diff_sequence(x), ValueError);
}

// --- gradient checks ---------------------------------------------------------

TEST(GradCheck, LinearFunction) {
  Rng rng(31);
  Tensor x = random_tensor({6}, rng);
  auto res = grad_check([](const Tensor& t) { return sum_all(t); }, x);
  EXPECT_LT(res.max_rel_err, 1e-10) << res.describe();
}

TEST(GradCheck, QuadraticAtOnes) {
  Tensor x = Tensor::full({4}, 1.0);
  Tensor leaf({4}, {1, 1, 1, 1}, true);
  Tensor y = sum_all(mul(leaf, leaf));
  backward(y);
  for (double g : leaf.grad()) EXPECT_NEAR(g, 2.0, 1e-12);
  auto res = grad_check([](const Tensor& t) { return sum_all(mul(t, t)); }, x);
  EXPECT_LT(res.max_rel_err, 1e-9) << res.describe();
}

TEST(GradCheck, SigmoidSumAtZero) {
  Tensor x = Tensor::zeros({5});
  Tensor leaf({5}, std::vector<double>(5, 0.0), true);
  backward(sum_all(sigmoid(leaf)));
  for (double g : leaf.grad()) EXPECT_NEAR(g, 0.25, 1e-12);
  auto res = grad_check([](const Tensor& t) { return sum_all(sigmoid(t)); }, x);
  EXPECT_LT(res.max_rel_err, 1e-8) << res.describe();
}

TEST(GradCheck, EveryPrimitiveMatchesFiniteDifferences) {
  Rng rng(101);
  const double tol = 1e-4;
  const double eps = 1e-5;

  Tensor x44 = random_tensor({4, 4}, rng);
  Tensor x43 = random_tensor({4, 3}, rng);
  Tensor v4 = random_tensor({4}, rng);

  struct Case {
    const char* name;
    Tensor point;
    std::function<Tensor(const Tensor&)> f;
  };
  Tensor other = random_tensor({4, 4}, rng);
  Tensor bounded = random_tensor({4, 4}, rng, 0.5, 1.5);
  Tensor kernels = random_tensor({3, 3, 3}, rng);
  Tensor bias = random_tensor({3}, rng);
  Tensor x_pos = random_tensor({4, 4}, rng, 0.1, 1.0);

  std::vector<Case> cases;
  cases.push_back({"add", x44, [&](const Tensor& t) { return sum_all(mul(add(t, other), other)); }});
  cases.push_back({"sub", x44, [&](const Tensor& t) { return sum_all(mul(sub(other, t), other)); }});
  cases.push_back({"mul", x44, [&](const Tensor& t) { return sum_all(mul(t, other)); }});
  cases.push_back({"div_num", x44, [&](const Tensor& t) { return sum_all(div(t, bounded)); }});
  cases.push_back({"div_den", bounded, [&](const Tensor& t) { return sum_all(div(other, t)); }});
  cases.push_back({"scale", x44, [&](const Tensor& t) { return sum_all(scale(t, -2.5)); }});
  cases.push_back({"sigmoid", x44, [&](const Tensor& t) { return sum_all(sigmoid(t)); }});
  cases.push_back({"tanh", x44, [&](const Tensor& t) { return sum_all(mul(tanh_op(t), other)); }});
  cases.push_back({"exp", x44, [&](const Tensor& t) { return sum_all(exp_op(t)); }});
  cases.push_back({"sqrt", x_pos, [&](const Tensor& t) { return sum_all(sqrt_op(t)); }});
  cases.push_back({"sin", x44, [&](const Tensor& t) { return sum_all(mul(sin_op(t), other)); }});
  cases.push_back({"cos", x44, [&](const Tensor& t) { return sum_all(mul(cos_op(t), other)); }});
  cases.push_back({"matmul_a", x43, [&](const Tensor& t) {
                     return sum_all(mul(matmul(transpose(t), x43), Tensor::full({3, 3}, 0.7)));
                   }});
  cases.push_back({"matmul_b", x43, [&](const Tensor& t) {
                     return sum_all(matmul(x44, mul(t, t)));
                   }});
  cases.push_back({"transpose", x43, [&](const Tensor& t) { return sum_all(mul(transpose(t), transpose(x43))); }});
  cases.push_back({"softmax", v4, [&](const Tensor& t) {
                     return sum_all(mul(softmax(t), Tensor({4}, {0.1, -0.4, 1.2, 0.3})));
                   }});
  cases.push_back({"conv_x", x43, [&](const Tensor& t) {
                     return sum_all(mul(conv1d_same(t, kernels, bias), conv1d_same(x43, kernels, bias)));
                   }});
  cases.push_back({"conv_k", kernels, [&](const Tensor& t) {
                     return sum_all(mul(conv1d_same(x43, t, bias), x43));
                   }});
  cases.push_back({"conv_b", bias, [&](const Tensor& t) {
                     return sum_all(mul(conv1d_same(x43, kernels, t), x43));
                   }});
  cases.push_back({"pool", x43, [&](const Tensor& t) {
                     return sum_all(mul(global_avg_pool_time(t), bias));
                   }});
  cases.push_back({"fft", x43, [&](const Tensor& t) { return sum_all(mul(fft_roundtrip(t), x43)); }});
  cases.push_back({"fft_masked", x43, [&](const Tensor& t) {
                     fft::SpectralMask m{fft::MaskMode::kKeepTopQ, 0.5};
                     return sum_all(mul(fft_roundtrip(t, m), x43));
                   }});
  cases.push_back({"diff", x43, [&](const Tensor& t) {
                     return sum_all(mul(diff_sequence(t), diff_sequence(x43)));
                   }});
  cases.push_back({"slice", x44, [&](const Tensor& t) { return sum_all(mul(slice0(t, 1, 3), slice0(other, 0, 2))); }});
  cases.push_back({"concat", x43, [&](const Tensor& t) {
                     return sum_all(mul(concat0({t, scale(t, 2.0)}), concat0({x43, x43})));
                   }});
  cases.push_back({"tile", x43, [&](const Tensor& t) {
                     return sum_all(mul(tile0(t, 3), tile0(x43, 3)));
                   }});
  cases.push_back({"reshape", x43, [&](const Tensor& t) {
                     return sum_all(mul(reshape(t, {2, 6}), reshape(x43, {2, 6})));
                   }});
  cases.push_back({"mul_channels_x", x43, [&](const Tensor& t) {
                     return sum_all(mul(mul_channels(t, bias), x43));
                   }});
  cases.push_back({"mul_channels_g", bias, [&](const Tensor& t) {
                     return sum_all(mul(mul_channels(x43, t), x43));
                   }});
  cases.push_back({"add_rowvec", bias, [&](const Tensor& t) {
                     return sum_all(mul(add_rowvec(x43, t), x43));
                   }});
  cases.push_back({"scale_rows", v4, [&](const Tensor& t) {
                     return sum_all(mul(scale_rows(x43, t), x43));
                   }});
  cases.push_back({"mul_scalar_x", x43, [&](const Tensor& t) {
                     return sum_all(mul(mul_scalar_t(t, Tensor::scalar(1.7)), x43));
                   }});
  cases.push_back({"mul_scalar_s", Tensor::scalar(0.8), [&](const Tensor& t) {
                     return sum_all(mul(mul_scalar_t(x43, t), x43));
                   }});
  cases.push_back({"linear_map", v4, [&](const Tensor& t) {
                     std::vector<LinEntry> entries{{0, 0, 1.0}, {1, 1, -1.0}, {2, 2, 2.0},
                                                   {3, 3, 0.5}, {0, 3, 1.5}};
                     return sum_all(mul(linear_map(t, {4}, entries), v4));
                   }});
  cases.push_back({"euclid_norm", v4, [&](const Tensor& t) { return euclid_norm(t); }});
  cases.push_back({"mean", x43, [&](const Tensor& t) { return mean_all(mul(t, t)); }});

  for (const auto& c : cases) {
    auto res = grad_check(c.f, c.point, eps);
    EXPECT_LT(res.max_rel_err, tol) << c.name << ": " << res.describe();
  }
}

TEST(Tape, FanOutAccumulatesBranchGradients) {
  // y = sum(x) * 1 + sum(x*x) + sum(x) -> dy/dx = 2 + 2x
  Tensor leaf({3}, {0.5, -0.25, 1.0}, true);
  Tensor y = add(add(sum_all(leaf), sum_all(mul(leaf, leaf))), sum_all(leaf));
  backward(y);
  const auto& g = leaf.grad();
  EXPECT_NEAR(g[0], 2.0 + 1.0, 1e-12);
  EXPECT_NEAR(g[1], 2.0 - 0.5, 1e-12);
  EXPECT_NEAR(g[2], 2.0 + 2.0, 1e-12);

  Rng rng(77);
  Tensor point = random_tensor({5}, rng);
  auto res = grad_check(
      [](const Tensor& t) {
        Tensor a = mul(t, t);
        Tensor b = add(t, a);
        Tensor c = mul(a, b);  // a consumed twice, t three times
        return add(sum_all(c), sum_all(b));
      },
      point);
  EXPECT_LT(res.max_rel_err, 1e-4) << res.describe();
}

TEST(Tape, UntrackedStaysUntracked) {
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 4});
  Tensor c = add(mul(a, b), a);
  EXPECT_FALSE(c.requires_grad());
  EXPECT_THROW(backward(sum_all(c)), ValueError);
}
