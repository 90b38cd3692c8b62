#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "strnet/dataset.hpp"
#include "strnet/model.hpp"
#include "strnet/trainer.hpp"

namespace strnet {

// Run configuration: every knob of the model, data generator, loss and
// optimizer, loadable from a `key = value` file. Unknown keys are rejected
// at parse time; numeric preconditions are checked before any compute.
struct RunConfig {
  std::uint64_t seed = 1;

  // model
  std::size_t seq_len = 16;   // T
  std::size_t channels = 64;  // C
  std::size_t fragments = 4;
  bool ttr_share_weights = false;
  std::size_t strategy_iters = 3;
  bool strategy_literal = false;
  std::string mask_mode = "off";  // off | remove_dc | keep_top_q
  double mask_q = 0.5;
  long gru_hidden = -1;  // -1: equal to C (required wherever outputs add to inputs)
  std::size_t reg_hidden = 64;
  std::size_t reg_iters = 3;

  // body
  std::size_t joints = 6;
  std::size_t vertices = 30;
  std::uint64_t asset_seed = 1234;

  // loss
  LossWeights loss_weights;
  bool supervise_all_frames = false;

  // optimizer / schedule
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t patience = 5;
  double lr_factor = 10.0;
  double stop_below_lr = 0.0;

  // training
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t steps_per_epoch = 0;  // 0: one full pass per epoch
  std::size_t threads = 0;

  // data generation
  std::size_t data_sequences = 8;
  std::size_t data_frames = 48;
  std::size_t data_stride = 1;
  double noise_sigma = 0.0;
  double dropout_prob = 0.0;
  std::size_t dropout_span = 4;
  std::uint64_t feature_seed = 7777;
  std::string data_path;
  std::string val_data_path;

  // evaluation
  bool eval_gt_oracle = false;

  fft::SpectralMask mask() const {
    fft::SpectralMask m;
    if (mask_mode == "off")
      m.mode = fft::MaskMode::kOff;
    else if (mask_mode == "remove_dc")
      m.mode = fft::MaskMode::kRemoveDc;
    else if (mask_mode == "keep_top_q")
      m.mode = fft::MaskMode::kKeepTopQ;
    else
      throw ValueError("ste.mask.mode must be off, remove_dc or keep_top_q, got '" +
                       mask_mode + "'");
    m.q = mask_q;
    return m;
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.seq_len = seq_len;
    m.channels = channels;
    m.fragments = fragments;
    m.ttr_share_weights = ttr_share_weights;
    m.strategy_iters = strategy_iters;
    m.strategy_literal = strategy_literal;
    m.mask = mask();
    m.joints = joints;
    m.vertices = vertices;
    m.reg_hidden = reg_hidden;
    m.reg_iters = reg_iters;
    return m;
  }

  SyntheticConfig synthetic_config() const {
    SyntheticConfig s;
    s.num_sequences = data_sequences;
    s.frames_per_seq = data_frames;
    s.seq_len = seq_len;
    s.channels = channels;
    s.window_stride = data_stride;
    s.noise_sigma = noise_sigma;
    s.dropout_prob = dropout_prob;
    s.dropout_span = dropout_span;
    s.asset_seed = asset_seed;
    s.feature_seed = feature_seed;
    s.joints = joints;
    s.vertices = vertices;
    return s;
  }

  TrainOptions train_options() const {
    TrainOptions t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.steps_per_epoch = steps_per_epoch;
    t.lr = lr;
    t.adam = {beta1, beta2, adam_eps};
    t.patience = patience;
    t.lr_factor = lr_factor;
    t.stop_below_lr = stop_below_lr;
    t.loss_weights = loss_weights;
    t.supervise_all_frames = supervise_all_frames;
    t.shuffle_seed = seed;
    t.threads = threads;
    return t;
  }

  void validate() const {
    mask();  // checks the mode string
    if (mask_q < 0.0 || mask_q > 1.0) throw ValueError("ste.mask.q must lie in [0, 1]");
    if (fragments == 0 || seq_len % fragments != 0)
      throw ValueError("T=" + std::to_string(seq_len) + " must be divisible by ttr.fragments=" +
                       std::to_string(fragments));
    if (seq_len % 2 != 0) throw ValueError("T must be divisible by 2 for the strategies");
    if (gru_hidden >= 0 && std::size_t(gru_hidden) != channels)
      throw ValueError("model.gru_hidden=" + std::to_string(gru_hidden) +
                       " must equal C=" + std::to_string(channels) +
                       "; every recurrent output is added to or gates C-channel features");
    loss_weights.validate();
    if (lr <= 0.0) throw ValueError("opt.lr must be positive");
    if (batch_size == 0) throw ValueError("train.batch must be >= 1");
    if (patience == 0) throw ValueError("opt.patience must be >= 1");
    if (lr_factor <= 1.0) throw ValueError("opt.lr_factor must be > 1");
    model_config().validate();
    synthetic_config().validate();
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValueError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

inline double parse_num(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ValueError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  if (pos != v.size())
    throw ValueError("config key '" + key + "': trailing characters in '" + v + "'");
  return out;
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  double d = parse_num(key, v);
  if (d < 0 || d != std::floor(d))
    throw ValueError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
  return std::size_t(d);
}

}  // namespace config_detail

inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace config_detail;
  static const std::map<std::string, std::function<void(RunConfig&, const std::string&,
                                                        const std::string&)>>
      setters = {
          {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seed = std::uint64_t(parse_size(k, v));
           }},
          {"T", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.seq_len = parse_size(k, v);
           }},
          {"C", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.channels = parse_size(k, v);
           }},
          {"ttr.fragments", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.fragments = parse_size(k, v);
           }},
          {"ttr.share_weights", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ttr_share_weights = parse_bool(k, v);
           }},
          {"strategy.N", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.strategy_iters = parse_size(k, v);
           }},
          {"strategy.literal", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.strategy_literal = parse_bool(k, v);
           }},
          {"ste.mask.mode", [](RunConfig& c, const std::string&, const std::string& v) {
             c.mask_mode = v;
           }},
          {"ste.mask.q", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.mask_q = parse_num(k, v);
           }},
          {"model.gru_hidden", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.gru_hidden = long(parse_size(k, v));
           }},
          {"reg.hidden", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.reg_hidden = parse_size(k, v);
           }},
          {"reg.iters", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.reg_iters = parse_size(k, v);
           }},
          {"body.joints", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.joints = parse_size(k, v);
           }},
          {"body.vertices", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.vertices = parse_size(k, v);
           }},
          {"body.asset_seed", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.asset_seed = std::uint64_t(parse_size(k, v));
           }},
          {"loss.w_3d", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.loss_weights.w_3d = parse_num(k, v);
           }},
          {"loss.w_2d", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.loss_weights.w_2d = parse_num(k, v);
           }},
          {"loss.w_shape", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.loss_weights.w_shape = parse_num(k, v);
           }},
          {"loss.w_pose", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.loss_weights.w_pose = parse_num(k, v);
           }},
          {"loss.supervise_all_frames",
           [](RunConfig& c, const std::string& k, const std::string& v) {
             c.supervise_all_frames = parse_bool(k, v);
           }},
          {"opt.lr", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.lr = parse_num(k, v);
           }},
          {"opt.beta1", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.beta1 = parse_num(k, v);
           }},
          {"opt.beta2", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.beta2 = parse_num(k, v);
           }},
          {"opt.eps", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.adam_eps = parse_num(k, v);
           }},
          {"opt.patience", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.patience = parse_size(k, v);
           }},
          {"opt.lr_factor", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.lr_factor = parse_num(k, v);
           }},
          {"opt.stop_below_lr", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.stop_below_lr = parse_num(k, v);
           }},
          {"train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.epochs = parse_size(k, v);
           }},
          {"train.batch", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.batch_size = parse_size(k, v);
           }},
          {"train.steps_per_epoch", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.steps_per_epoch = parse_size(k, v);
           }},
          {"train.threads", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.threads = parse_size(k, v);
           }},
          {"data.sequences", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.data_sequences = parse_size(k, v);
           }},
          {"data.frames", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.data_frames = parse_size(k, v);
           }},
          {"data.stride", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.data_stride = parse_size(k, v);
           }},
          {"data.noise_sigma", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.noise_sigma = parse_num(k, v);
           }},
          {"data.dropout_prob", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.dropout_prob = parse_num(k, v);
           }},
          {"data.dropout_span", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.dropout_span = parse_size(k, v);
           }},
          {"data.feature_seed", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.feature_seed = std::uint64_t(parse_size(k, v));
           }},
          {"data.path", [](RunConfig& c, const std::string&, const std::string& v) {
             c.data_path = v;
           }},
          {"data.val_path", [](RunConfig& c, const std::string&, const std::string& v) {
             c.val_data_path = v;
           }},
          {"eval.gt_oracle", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.eval_gt_oracle = parse_bool(k, v);
           }},
      };
  auto it = setters.find(key);
  if (it == setters.end()) throw ValueError("unknown config key '" + key + "'");
  it->second(c, key, value);
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValueError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = config_detail::trim(line.substr(0, eq));
    std::string value = config_detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValueError("config line " + std::to_string(line_no) + ": empty key or value");
    apply_config_entry(c, key, value);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace strnet
