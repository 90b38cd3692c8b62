#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "strnet/grad_check.hpp"
#include "strnet/ste.hpp"

using namespace strnet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  std::vector<double> d(shape_numel(shape));
  for (auto& v : d) v = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(d));
}

SteParams random_params(std::size_t channels, Rng& rng) { return SteParams::init(channels, rng); }

}  // namespace

TEST(SteTime, IdentityConvHalvesGruOutput) {
  Rng rng(1);
  const std::size_t c_len = 3;
  SteParams p = random_params(c_len, rng);
  p.conv_kernels = SteParams::identity_conv_kernels(c_len);
  p.conv_bias = Tensor::zeros({c_len});
  Tensor f = random_tensor({6, c_len}, rng);

  // M_1 = 0, A_1 = sigmoid(0) = 0.5, so output = 0.5 * GRU(F)
  Tensor out = time_domain_enhance(f, p);
  Tensor f_g = gru_forward(f, p.gru_time);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_NEAR(out.values()[i], 0.5 * f_g.values()[i], 1e-12);
}

TEST(SteTime, ZeroInputZeroOutput) {
  Rng rng(2);
  SteParams p = random_params(2, rng);
  p.gru_time.b_z = Tensor::zeros({2});
  p.gru_time.b_r = Tensor::zeros({2});
  p.gru_time.b_n = Tensor::zeros({2});
  Tensor out = time_domain_enhance(Tensor::zeros({5, 2}), p);
  // zero input with zero h0 and zero biases keeps every GRU step at zero,
  // checked here end to end against the gated product
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(SteTime, StaticChannelContributesNothingToOffset) {
  Rng rng(3);
  const std::size_t c_len = 3, t_len = 6;
  SteParams p = random_params(c_len, rng);
  p.conv_kernels = SteParams::identity_conv_kernels(c_len);

  Tensor f = random_tensor({t_len, c_len}, rng);
  std::vector<double> d(f.values().begin(), f.values().end());
  for (std::size_t t = 0; t < t_len; ++t) d[t * c_len + 1] = 0.77;  // constant channel
  Tensor fc(Shape{t_len, c_len}, std::move(d));

  Tensor s_f = conv1d_same(fc, p.conv_kernels, p.conv_bias);
  Tensor offset = sub(diff_sequence(s_f), diff_sequence(fc));
  for (double v : offset.values()) EXPECT_NEAR(v, 0.0, 1e-14);
}

// adding a time-constant offset to any channel leaves M_1 unchanged under the
// identity conv
TEST(SteTime, BackgroundOffsetInvariance) {
  Rng rng(4);
  const std::size_t c_len = 4, t_len = 8;
  SteParams p = random_params(c_len, rng);
  p.conv_kernels = SteParams::identity_conv_kernels(c_len);
  p.conv_bias = Tensor::zeros({c_len});

  Tensor f = random_tensor({t_len, c_len}, rng);
  std::vector<double> d(f.values().begin(), f.values().end());
  for (std::size_t t = 0; t < t_len; ++t) d[t * c_len + 2] += 5.0;
  Tensor shifted(Shape{t_len, c_len}, std::move(d));

  auto offset_of = [&](const Tensor& x) {
    Tensor s = conv1d_same(x, p.conv_kernels, p.conv_bias);
    return sub(diff_sequence(s), diff_sequence(x));
  };
  Tensor m_base = offset_of(f);
  Tensor m_shift = offset_of(shifted);
  for (std::size_t i = 0; i < m_base.size(); ++i)
    EXPECT_NEAR(m_base.values()[i], m_shift.values()[i], 1e-12);
}

TEST(SteTime, GateBoundsOutputByGruOutput) {
  Rng rng(5);
  const std::size_t c_len = 3;
  SteParams p = random_params(c_len, rng);
  Tensor f = random_tensor({6, c_len}, rng);
  Tensor out = time_domain_enhance(f, p);
  Tensor f_g = gru_forward(f, p.gru_time);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_LE(std::abs(out.values()[i]), std::abs(f_g.values()[i]) + 1e-15);
}

TEST(SteTime, TooFewFramesRejected) {
  Rng rng(6);
  SteParams p = random_params(2, rng);
  EXPECT_THROW(time_domain_enhance(random_tensor({1, 2}, rng), p), ValueError);
}

TEST(SteFreq, ZeroEverything) {
  SteParams p;
  p.channels = 2;
  p.conv_kernels = Tensor::zeros({2, 2, 3});
  p.conv_bias = Tensor::zeros({2});
  p.gru_time = GruParams::zeros(2, 2);
  p.gru_freq = GruParams::zeros(2, 2);
  Tensor out = freq_domain_enhance(Tensor::zeros({4, 2}), p);
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(SteFreq, MaskOffMatchesTimeBranchGatingLaw) {
  Rng rng(7);
  const std::size_t c_len = 3;
  SteParams p = random_params(c_len, rng);
  Tensor f = random_tensor({8, c_len}, rng);

  Tensor out = freq_domain_enhance(f, p);

  // with the mask off, F_fft == F within round-trip error, so the output
  // equals gating GRU(F) by sigmoid(avgpool(GRU(F) - F))
  Tensor f_g = gru_forward(f, p.gru_freq);
  Tensor gate = sigmoid(global_avg_pool_time(sub(f_g, f)));
  Tensor expect = mul_channels(f_g, gate);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_NEAR(out.values()[i], expect.values()[i], 1e-8);
}

TEST(SteFreq, DcMaskRemovesTemporalMeanBeforeGru) {
  Rng rng(8);
  const std::size_t t_len = 8;
  SteParams p = random_params(1, rng);
  Tensor f = random_tensor({t_len, 1}, rng);

  fft::SpectralMask mask{fft::MaskMode::kRemoveDc, 0.0};
  Tensor f_fft = fft_roundtrip(f, mask);
  double mean = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) mean += f.at(t, 0);
  mean /= double(t_len);
  for (std::size_t t = 0; t < t_len; ++t) EXPECT_NEAR(f_fft.at(t, 0), f.at(t, 0) - mean, 1e-9);

  // and the branch output equals the gating law applied to that signal
  Tensor out = freq_domain_enhance(f, p, mask);
  Tensor gate = sigmoid(global_avg_pool_time(sub(gru_forward(f, p.gru_freq), f)));
  Tensor expect = mul_channels(gru_forward(f_fft, p.gru_freq), gate);
  for (std::size_t i = 0; i < out.size(); ++i)
    EXPECT_NEAR(out.values()[i], expect.values()[i], 1e-9);
}

TEST(SteFreq, GateStrictlyInsideUnitInterval) {
  Rng rng(9);
  const std::size_t c_len = 5;
  SteParams p = random_params(c_len, rng);
  Tensor f = random_tensor({6, c_len}, rng);
  Tensor gate = sigmoid(global_avg_pool_time(sub(gru_forward(f, p.gru_freq), f)));
  for (double v : gate.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Ste, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  const std::size_t c_len = 2;
  SteParams p = random_params(c_len, rng);
  Tensor f = random_tensor({4, c_len}, rng);
  Tensor weight = random_tensor({4, c_len}, rng);

  auto time_wrt_f = grad_check(
      [&](const Tensor& t) { return sum_all(mul(time_domain_enhance(t, p), weight)); }, f);
  EXPECT_LT(time_wrt_f.max_rel_err, 1e-4) << "time/f: " << time_wrt_f.describe();

  auto time_wrt_conv = grad_check(
      [&](const Tensor& t) {
        SteParams q = p;
        q.conv_kernels = t;
        return sum_all(mul(time_domain_enhance(f, q), weight));
      },
      p.conv_kernels);
  EXPECT_LT(time_wrt_conv.max_rel_err, 1e-4) << "time/conv: " << time_wrt_conv.describe();

  auto freq_wrt_f = grad_check(
      [&](const Tensor& t) { return sum_all(mul(freq_domain_enhance(t, p), weight)); }, f);
  EXPECT_LT(freq_wrt_f.max_rel_err, 1e-4) << "freq/f: " << freq_wrt_f.describe();

  auto freq_wrt_un = grad_check(
      [&](const Tensor& t) {
        SteParams q = p;
        q.gru_freq.u_n = t;
        return sum_all(mul(freq_domain_enhance(f, q), weight));
      },
      p.gru_freq.u_n);
  EXPECT_LT(freq_wrt_un.max_rel_err, 1e-4) << "freq/u_n: " << freq_wrt_un.describe();
}
