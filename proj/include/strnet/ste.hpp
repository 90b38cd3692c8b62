#pragma once

#include "strnet/fft.hpp"
#include "strnet/gru.hpp"
#include "strnet/ops.hpp"

namespace strnet {

// Spatial tendency enhancing. Two branches derive motion-sensitive channel
// gates: the time branch from the offset between convolved and raw
// adjacent-frame differences, the frequency branch from the offset between a
// GRU encoding and the raw features paired with an FFT round-trip of the
// input. Each gate multiplies a GRU encoding channel-wise, broadcast over
// time.
struct SteParams {
  std::size_t channels = 0;
  Tensor conv_kernels;  // [C x C x 3], same-padded spatial map S_F
  Tensor conv_bias;     // [C]
  GruParams gru_time;
  GruParams gru_freq;

  static SteParams init(std::size_t channels, Rng& rng) {
    SteParams p;
    p.channels = channels;
    p.conv_kernels = uniform_init({channels, channels, 3}, channels * 3, rng);
    p.conv_bias = Tensor::zeros({channels});
    p.gru_time = GruParams::init(channels, channels, rng);
    p.gru_freq = GruParams::init(channels, channels, rng);
    return p;
  }

  // Width-3 kernel whose center tap is the channel identity; S_F == F.
  static Tensor identity_conv_kernels(std::size_t channels) {
    std::vector<double> k(channels * channels * 3, 0.0);
    for (std::size_t c = 0; c < channels; ++c) k[(c * channels + c) * 3 + 1] = 1.0;
    return Tensor({channels, channels, 3}, std::move(k));
  }
};

// S_F = conv(F); M_1 = diff(S_F) - diff(F); A_1 = sigmoid(avgpool(M_1));
// output(t) = GRU_time(F)(t) * A_1, channel-wise.
inline Tensor time_domain_enhance(const Tensor& f, const SteParams& p) {
  if (f.rank() != 2 || f.dim(1) != p.channels)
    throw ShapeError("time_domain_enhance expects [TxC] with C=" + std::to_string(p.channels));
  if (f.dim(0) < 2) throw ValueError("time_domain_enhance needs at least 2 frames");
  Tensor s_f = conv1d_same(f, p.conv_kernels, p.conv_bias);
  Tensor offset = sub(diff_sequence(s_f), diff_sequence(f));
  Tensor gate = sigmoid(global_avg_pool_time(offset));
  Tensor f_g = gru_forward(f, p.gru_time);
  return mul_channels(f_g, gate);
}

// F_fft = fft_roundtrip(F); M_2 = GRU_freq(F) - F; A_2 = sigmoid(avgpool(M_2));
// output(t) = GRU_freq(F_fft)(t) * A_2. The same GRU parameters serve both
// applications.
inline Tensor freq_domain_enhance(const Tensor& f, const SteParams& p,
                                  const fft::SpectralMask& mask = {}) {
  if (f.rank() != 2 || f.dim(1) != p.channels)
    throw ShapeError("freq_domain_enhance expects [TxC] with C=" + std::to_string(p.channels));
  if (f.dim(0) == 0) throw ValueError("freq_domain_enhance over zero frames");
  Tensor f_fft = fft_roundtrip(f, mask);
  Tensor offset = sub(gru_forward(f, p.gru_freq), f);
  offset.assert_finite("freq_domain_enhance offset");
  Tensor gate = sigmoid(global_avg_pool_time(offset));
  return mul_channels(gru_forward(f_fft, p.gru_freq), gate);
}

}  // namespace strnet
