#pragma once

#include <string>
#include <vector>

#include "strnet/body_model.hpp"
#include "strnet/container.hpp"
#include "strnet/tensor.hpp"

namespace strnet {

// One training sample: a feature window plus ground truth for its mid frame.
struct FeatureWindow {
  Tensor features;    // [T x C]
  Tensor gt_joints3d; // [J x 3]
  Tensor gt_joints2d; // [J x 2]
  Tensor gt_theta;    // [J x 3]
  Tensor gt_beta;     // [10]
  Tensor gt_cam;      // [3] = (s, tx, ty)
  int seq_id = 0;
  int frame_index = 0;  // mid-frame index within its sequence
};

struct SyntheticConfig {
  std::size_t num_sequences = 8;
  std::size_t frames_per_seq = 48;
  std::size_t seq_len = 16;  // T
  std::size_t channels = 64; // C
  std::size_t window_stride = 1;
  double noise_sigma = 0.0;
  double dropout_prob = 0.0;    // per-sequence probability of one dropout span
  std::size_t dropout_span = 4; // frames with their feature signal zeroed
  std::uint64_t asset_seed = 1234;
  std::uint64_t feature_seed = 7777;  // fixes the feature embedding across datasets
  std::size_t joints = 6;
  std::size_t vertices = 30;

  void validate() const {
    if (seq_len == 0 || channels == 0) throw ValueError("synthetic config: T and C must be > 0");
    if (num_sequences > 0 && frames_per_seq < seq_len)
      throw ValueError("synthetic config: frames_per_seq " + std::to_string(frames_per_seq) +
                       " is shorter than the window length T=" + std::to_string(seq_len));
    if (window_stride == 0) throw ValueError("synthetic config: stride must be >= 1");
    if (dropout_prob < 0.0 || dropout_prob > 1.0)
      throw ValueError("synthetic config: dropout_prob must lie in [0, 1]");
  }
};

struct Dataset {
  std::size_t seq_len = 0;
  std::size_t channels = 0;
  std::size_t joints = 0;
  std::size_t vertices = 0;
  std::uint64_t asset_seed = 0;
  std::vector<FeatureWindow> windows;

  // generation statistics, not serialized
  std::size_t gen_sequences = 0;
  std::size_t gen_dropout_frames = 0;

  ToyBodyModel asset() const { return ToyBodyModel::procedural(asset_seed, joints, vertices); }

  void save(const std::string& path) const {
    const std::size_t w = windows.size(), t = seq_len, c = channels, j = joints;
    ArrayContainer out;
    out.add_scalar("meta/T", double(t));
    out.add_scalar("meta/C", double(c));
    out.add_scalar("meta/J", double(j));
    out.add_scalar("meta/Nv", double(vertices));
    out.add_scalar("meta/asset_seed", double(asset_seed));
    out.add_scalar("meta/windows", double(w));

    std::vector<double> feat(w * t * c), j3d(w * j * 3), j2d(w * j * 2), th(w * j * 3),
        be(w * 10), cam(w * 3), sid(w), fidx(w);
    for (std::size_t i = 0; i < w; ++i) {
      const FeatureWindow& fw = windows[i];
      std::copy(fw.features.values().begin(), fw.features.values().end(),
                feat.begin() + i * t * c);
      std::copy(fw.gt_joints3d.values().begin(), fw.gt_joints3d.values().end(),
                j3d.begin() + i * j * 3);
      std::copy(fw.gt_joints2d.values().begin(), fw.gt_joints2d.values().end(),
                j2d.begin() + i * j * 2);
      std::copy(fw.gt_theta.values().begin(), fw.gt_theta.values().end(),
                th.begin() + i * j * 3);
      std::copy(fw.gt_beta.values().begin(), fw.gt_beta.values().end(), be.begin() + i * 10);
      std::copy(fw.gt_cam.values().begin(), fw.gt_cam.values().end(), cam.begin() + i * 3);
      sid[i] = double(fw.seq_id);
      fidx[i] = double(fw.frame_index);
    }
    out.add("features", {w, t, c}, std::move(feat));
    out.add("gt/joints3d", {w, j, 3}, std::move(j3d));
    out.add("gt/joints2d", {w, j, 2}, std::move(j2d));
    out.add("gt/theta", {w, j, 3}, std::move(th));
    out.add("gt/beta", {w, 10}, std::move(be));
    out.add("gt/cam", {w, 3}, std::move(cam));
    out.add("seq_id", {w}, std::move(sid));
    out.add("frame_index", {w}, std::move(fidx));
    out.save(path);
  }

  static Dataset load(const std::string& path) {
    ArrayContainer c = ArrayContainer::load(path);
    Dataset d;
    d.seq_len = std::size_t(c.get_scalar("meta/T"));
    d.channels = std::size_t(c.get_scalar("meta/C"));
    d.joints = std::size_t(c.get_scalar("meta/J"));
    d.vertices = std::size_t(c.get_scalar("meta/Nv"));
    d.asset_seed = std::uint64_t(c.get_scalar("meta/asset_seed"));
    const std::size_t w = std::size_t(c.get_scalar("meta/windows"));

    const auto& feat = c.get("features").data;
    const auto& j3d = c.get("gt/joints3d").data;
    const auto& j2d = c.get("gt/joints2d").data;
    const auto& th = c.get("gt/theta").data;
    const auto& be = c.get("gt/beta").data;
    const auto& cam = c.get("gt/cam").data;
    const auto& sid = c.get("seq_id").data;
    const auto& fidx = c.get("frame_index").data;

    const std::size_t t = d.seq_len, ch = d.channels, j = d.joints;
    d.windows.reserve(w);
    for (std::size_t i = 0; i < w; ++i) {
      FeatureWindow fw;
      fw.features = Tensor({t, ch}, std::vector<double>(feat.begin() + i * t * ch,
                                                        feat.begin() + (i + 1) * t * ch));
      fw.gt_joints3d = Tensor({j, 3}, std::vector<double>(j3d.begin() + i * j * 3,
                                                          j3d.begin() + (i + 1) * j * 3));
      fw.gt_joints2d = Tensor({j, 2}, std::vector<double>(j2d.begin() + i * j * 2,
                                                          j2d.begin() + (i + 1) * j * 2));
      fw.gt_theta = Tensor({j, 3}, std::vector<double>(th.begin() + i * j * 3,
                                                       th.begin() + (i + 1) * j * 3));
      fw.gt_beta = Tensor({10}, std::vector<double>(be.begin() + i * 10,
                                                    be.begin() + (i + 1) * 10));
      fw.gt_cam = Tensor({3}, std::vector<double>(cam.begin() + i * 3,
                                                  cam.begin() + (i + 1) * 3));
      fw.seq_id = int(sid[i]);
      fw.frame_index = int(fidx[i]);
      d.windows.push_back(std::move(fw));
    }
    return d;
  }
};

// Smooth random walks in pose space drive the toy body; per-frame features
// are a fixed random linear embedding of (3D joints, 2D joints, joint
// velocities) plus optional Gaussian noise. "Unconstrained scene" frames are
// simulated by zeroing the embedded signal on a contiguous span while the
// ground truth stays intact.
inline Dataset gen_synthetic_dataset(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t t_len = cfg.seq_len, c_len = cfg.channels, nj = cfg.joints;
  const std::size_t g_dim = 3 * nj + 2 * nj + 3 * nj;

  Dataset ds;
  ds.seq_len = t_len;
  ds.channels = c_len;
  ds.joints = nj;
  ds.vertices = cfg.vertices;
  ds.asset_seed = cfg.asset_seed;
  ds.gen_sequences = cfg.num_sequences;

  ToyBodyModel body = ds.asset();

  Rng master(seed ^ 0x9d2c5680ULL);
  Rng walk_rng = master.fork();
  Rng noise_rng = master.fork();
  Rng drop_rng = master.fork();

  // The embedding plays the part of a frozen feature extractor: it depends
  // on feature_seed alone, so datasets generated with different seeds but
  // one configuration share a feature code and can serve as train/val
  // splits.
  Rng embed_rng(cfg.feature_seed ^ 0x6a09e667f3bcc909ULL);
  std::vector<double> embed(c_len * g_dim);
  for (auto& v : embed) v = 3.0 * embed_rng.normal() / std::sqrt(double(g_dim));

  for (std::size_t s = 0; s < cfg.num_sequences; ++s) {
    // per-sequence shape, camera and pose walk
    std::vector<double> beta(10);
    for (auto& v : beta) v = 0.5 * walk_rng.normal();
    double cam[3] = {1.0 + 0.1 * walk_rng.uniform(-1, 1), 0.1 * walk_rng.uniform(-1, 1),
                     0.1 * walk_rng.uniform(-1, 1)};

    std::vector<double> raw(nj * 3), vel(nj * 3, 0.0);
    for (auto& v : raw) v = 0.3 * walk_rng.normal();

    std::vector<std::vector<double>> joints3d(cfg.frames_per_seq),
        joints2d(cfg.frames_per_seq), thetas(cfg.frames_per_seq);
    std::vector<std::vector<double>> feats(cfg.frames_per_seq);

    std::size_t drop_begin = cfg.frames_per_seq, drop_end = cfg.frames_per_seq;
    if (cfg.dropout_prob > 0.0 && drop_rng.uniform() < cfg.dropout_prob &&
        cfg.frames_per_seq >= cfg.dropout_span && cfg.dropout_span > 0) {
      drop_begin = std::size_t(drop_rng.below(cfg.frames_per_seq - cfg.dropout_span + 1));
      drop_end = drop_begin + cfg.dropout_span;
      ds.gen_dropout_frames += cfg.dropout_span;
    }

    std::vector<double> prev_joints;
    for (std::size_t f = 0; f < cfg.frames_per_seq; ++f) {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        vel[i] = 0.85 * vel[i] + 0.08 * walk_rng.normal();
        raw[i] += vel[i];
      }
      std::vector<double> theta(nj * 3);
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = 0.9 * std::tanh(raw[i]);

      BodyParams bp;
      bp.theta = theta;
      bp.beta = beta;
      bp.cam_s = cam[0];
      bp.cam_tx = cam[1];
      bp.cam_ty = cam[2];
      Tensor mesh = body_forward(body, bp);
      Tensor j3d = joints_from_mesh(body, mesh);
      Tensor j2d = project_weak_perspective(j3d, bp);

      joints3d[f].assign(j3d.values().begin(), j3d.values().end());
      joints2d[f].assign(j2d.values().begin(), j2d.values().end());
      thetas[f] = theta;

      // g = [joints3d, joints2d, joint velocity]
      std::vector<double> g(g_dim, 0.0);
      std::copy(joints3d[f].begin(), joints3d[f].end(), g.begin());
      std::copy(joints2d[f].begin(), joints2d[f].end(), g.begin() + 3 * nj);
      if (!prev_joints.empty())
        for (std::size_t i = 0; i < 3 * nj; ++i)
          g[5 * nj + i] = joints3d[f][i] - prev_joints[i];
      prev_joints = joints3d[f];

      std::vector<double> feat(c_len, 0.0);
      const bool dropped = f >= drop_begin && f < drop_end;
      if (!dropped)
        for (std::size_t c = 0; c < c_len; ++c)
          for (std::size_t i = 0; i < g_dim; ++i) feat[c] += embed[c * g_dim + i] * g[i];
      if (cfg.noise_sigma > 0.0)
        for (auto& v : feat) v += cfg.noise_sigma * noise_rng.normal();
      feats[f] = std::move(feat);
    }

    for (std::size_t start = 0; start + t_len <= cfg.frames_per_seq;
         start += cfg.window_stride) {
      const std::size_t mid = start + t_len / 2;
      FeatureWindow fw;
      std::vector<double> wf(t_len * c_len);
      for (std::size_t t = 0; t < t_len; ++t)
        std::copy(feats[start + t].begin(), feats[start + t].end(), wf.begin() + t * c_len);
      fw.features = Tensor({t_len, c_len}, std::move(wf));
      fw.gt_joints3d = Tensor({nj, 3}, std::vector<double>(joints3d[mid]));
      fw.gt_joints2d = Tensor({nj, 2}, std::vector<double>(joints2d[mid]));
      fw.gt_theta = Tensor({nj, 3}, std::vector<double>(thetas[mid]));
      fw.gt_beta = Tensor({10}, std::vector<double>(beta));
      fw.gt_cam = Tensor({3}, {cam[0], cam[1], cam[2]});
      fw.seq_id = int(s);
      fw.frame_index = int(mid);
      ds.windows.push_back(std::move(fw));
    }
  }
  return ds;
}

}  // namespace strnet
