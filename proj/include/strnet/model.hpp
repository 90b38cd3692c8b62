#pragma once

#include <string>
#include <vector>

#include "strnet/body_model.hpp"
#include "strnet/integration.hpp"
#include "strnet/param_store.hpp"
#include "strnet/ste.hpp"
#include "strnet/ttr.hpp"

namespace strnet {

// Which network pieces are live. Ablations are lesions at fixed fusion
// arity: removing TTR routes the raw features past it, removing an STE
// branch or a strategy output feeds the corresponding fusion slot a zero
// tensor, so the silenced module contributes nothing while the integration
// structure stays identical.
struct AblationFlags {
  bool use_ttr = true;
  bool use_ste_time = true;
  bool use_ste_freq = true;
  bool use_self = true;
  bool use_cross = true;

  static const std::vector<std::string>& variant_names() {
    static const std::vector<std::string> names{
        "full", "no_ttr", "no_ste", "no_ste_time", "no_ste_freq", "no_self", "no_cross"};
    return names;
  }

  static AblationFlags for_variant(const std::string& name) {
    AblationFlags f;
    if (name == "full") return f;
    if (name == "no_ttr") {
      f.use_ttr = false;
    } else if (name == "no_ste") {
      f.use_ste_time = f.use_ste_freq = false;
    } else if (name == "no_ste_time") {
      f.use_ste_time = false;
    } else if (name == "no_ste_freq") {
      f.use_ste_freq = false;
    } else if (name == "no_self") {
      f.use_self = false;
    } else if (name == "no_cross") {
      f.use_cross = false;
    } else {
      throw ValueError("unknown ablation variant '" + name + "'");
    }
    return f;
  }
};

struct ModelConfig {
  std::size_t seq_len = 16;   // T
  std::size_t channels = 64;  // C
  std::size_t fragments = 4;
  bool ttr_share_weights = false;
  std::size_t strategy_iters = 3;  // N
  bool strategy_literal = false;
  fft::SpectralMask mask;  // spectral mask of the STE frequency branch
  std::size_t joints = 6;
  std::size_t vertices = 30;
  std::size_t reg_hidden = 64;
  std::size_t reg_iters = 3;
  AblationFlags ablation;

  bool needs_strategies() const { return ablation.use_self || ablation.use_cross; }

  void validate() const {
    if (seq_len == 0 || channels == 0) throw ValueError("model config: T and C must be > 0");
    if (fragments == 0 || seq_len % fragments != 0)
      throw ValueError("model config: T=" + std::to_string(seq_len) +
                       " must be divisible by the fragment count " + std::to_string(fragments));
    if (seq_len % 2 != 0)
      throw ValueError("model config: T must be even for the integration strategies");
    if (seq_len < 2) throw ValueError("model config: T must be >= 2");
    if (strategy_iters == 0) throw ValueError("model config: strategy.N must be >= 1");
    if (reg_iters == 0) throw ValueError("model config: regressor iterations must be >= 1");
    if (joints < 2) throw ValueError("model config: at least 2 joints required");
  }
};

// The full network: parameter store plus a pure forward pass. Bindings carry
// tracked leaves for one graph, so concurrent forwards over distinct
// bindings never share tape state.
class StrModel {
 public:
  struct Prediction {
    Tensor theta;  // [J x 3]
    Tensor beta;   // [10]
    Tensor cam;    // [3]
    Tensor mesh;   // [Nv x 3]
    Tensor j3d;    // [J x 3]
    Tensor j2d;    // [J x 2]
  };

  struct Binding {
    std::vector<Tensor> leaves;  // aligned with the store
    TtrParams ttr;
    SteParams ste;
    IntegrationNetParams net_str;
    StrategyParams strat;
    IntegrationNetParams net_final;
    RegressorParams reg;
  };

  StrModel(ModelConfig cfg, ToyBodyModel body, std::uint64_t init_seed)
      : cfg_(cfg), body_(std::move(body)) {
    cfg_.validate();
    if (body_.n_joints != cfg_.joints || body_.n_vertices != cfg_.vertices)
      throw ValueError("body asset does not match the model config");
    Rng rng(init_seed ^ 0x517cc1b727220a95ULL);
    register_params(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const ToyBodyModel& body() const { return body_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  Binding bind(bool tracked) const {
    Binding b;
    b.leaves.reserve(store_.size());
    for (std::size_t i = 0; i < store_.size(); ++i)
      b.leaves.push_back(tracked ? store_.bind(i) : store_.view(i));
    auto p = [&](const std::string& name) -> const Tensor& {
      return b.leaves[store_.index(name)];
    };
    const std::size_t c = cfg_.channels;
    const AblationFlags& fl = cfg_.ablation;

    if (fl.use_ttr) {
      b.ttr.fragment_count = cfg_.fragments;
      b.ttr.channels = c;
      b.ttr.share_weights = cfg_.ttr_share_weights;
      if (cfg_.ttr_share_weights) {
        b.ttr.grus.push_back(gru_from(p, "ttr.gru_shared", c, c));
      } else {
        for (std::size_t i = 2; i <= cfg_.fragments; ++i)
          b.ttr.grus.push_back(gru_from(p, "ttr.gru" + std::to_string(i), c, c));
      }
    }
    if (fl.use_ste_time || fl.use_ste_freq) {
      b.ste.channels = c;
      if (fl.use_ste_time) {
        b.ste.conv_kernels = p("ste.conv.kernels");
        b.ste.conv_bias = p("ste.conv.bias");
        b.ste.gru_time = gru_from(p, "ste.gru_time", c, c);
      }
      if (fl.use_ste_freq) b.ste.gru_freq = gru_from(p, "ste.gru_freq", c, c);
    }
    b.net_str = net_from(p, "int.net_str", 3, c);
    if (cfg_.needs_strategies()) {
      b.strat.channels = c;
      b.strat.iterations = cfg_.strategy_iters;
      b.strat.literal = cfg_.strategy_literal;
      b.strat.gru_c1 = gru_from(p, "int.gru_c1", c, c);
      b.strat.gru_c2 = gru_from(p, "int.gru_c2", c, c);
      if (fl.use_self) {
        const std::size_t self_k = cfg_.strategy_literal ? 1 : 2;
        b.strat.net_self_c1 = net_from(p, "int.net_self_c1", self_k, c);
        b.strat.net_self_c2 = net_from(p, "int.net_self_c2", self_k, c);
        b.strat.net_sf = net_from(p, "int.net_sf", 2, c);
      }
      if (fl.use_cross) b.strat.net_cf = net_from(p, "int.net_cf", 2, c);
    }
    b.net_final = net_from(p, "int.net_final", 3, c);

    b.reg.feature_dim = c;
    b.reg.joints = cfg_.joints;
    b.reg.hidden = cfg_.reg_hidden;
    b.reg.iterations = cfg_.reg_iters;
    b.reg.w1 = p("reg.w1");
    b.reg.b1 = p("reg.b1");
    b.reg.w2 = p("reg.w2");
    b.reg.b2 = p("reg.b2");
    b.reg.w3 = p("reg.w3");
    b.reg.b3 = p("reg.b3");
    return b;
  }

  Prediction forward(const Binding& b, const Tensor& features) const {
    if (features.rank() != 2 || features.dim(0) != cfg_.seq_len ||
        features.dim(1) != cfg_.channels)
      throw ShapeError("model forward: features shaped " + shape_str(features.shape()) +
                       ", config wants [" + std::to_string(cfg_.seq_len) + "x" +
                       std::to_string(cfg_.channels) + "]");
    const AblationFlags& fl = cfg_.ablation;

    const Tensor silence = Tensor::zeros({cfg_.seq_len, cfg_.channels});
    Tensor f_ttr = fl.use_ttr ? ttr_forward(features, b.ttr) : features;
    Tensor stef1 = fl.use_ste_time ? time_domain_enhance(features, b.ste) : silence;
    Tensor stef2 = fl.use_ste_freq ? freq_domain_enhance(features, b.ste, cfg_.mask) : silence;
    Tensor f_str = fuse_str(f_ttr, stef1, stef2, b.net_str);

    Tensor self_fused = silence, cross_fused = silence;
    if (cfg_.needs_strategies()) {
      const std::size_t t_len = cfg_.seq_len;
      Tensor raw1 = slice0(features, 0, t_len / 2);
      Tensor raw2 = slice0(features, t_len / 2, t_len);
      Tensor half1 = gru_forward(raw1, b.strat.gru_c1);
      Tensor half2 = gru_forward(raw2, b.strat.gru_c2);
      if (fl.use_self) {
        Tensor r1 = integ_detail::refine_half(raw1, half1, b.strat.net_self_c1,
                                              b.strat.iterations, b.strat.literal);
        Tensor r2 = integ_detail::refine_half(raw2, half2, b.strat.net_self_c2,
                                              b.strat.iterations, b.strat.literal);
        self_fused = tile0(integrate({r1, r2}, b.strat.net_sf), 2);
      }
      if (fl.use_cross) cross_fused = tile0(integrate({half1, half2}, b.strat.net_cf), 2);
    }
    Tensor z = fuse_final(self_fused, f_str, cross_fused, b.net_final);

    Tensor z_pooled = global_avg_pool_time(z);
    BodyParamsT params = regress_params(z_pooled, BodyParams::rest(cfg_.joints), b.reg);

    Prediction out;
    out.theta = params.theta;
    out.beta = params.beta;
    out.cam = params.cam;
    out.mesh = body_forward(body_, params.theta, params.beta);
    out.j3d = joints_from_mesh(body_, out.mesh);
    out.j2d = project_weak_perspective(out.j3d, params.cam);
    return out;
  }

 private:
  static GruParams gru_from(const std::function<const Tensor&(const std::string&)>& p,
                            const std::string& prefix, std::size_t in, std::size_t hid) {
    GruParams g;
    g.input_size = in;
    g.hidden_size = hid;
    g.w_z = p(prefix + ".w_z");
    g.u_z = p(prefix + ".u_z");
    g.b_z = p(prefix + ".b_z");
    g.w_r = p(prefix + ".w_r");
    g.u_r = p(prefix + ".u_r");
    g.b_r = p(prefix + ".b_r");
    g.w_n = p(prefix + ".w_n");
    g.u_n = p(prefix + ".u_n");
    g.b_n = p(prefix + ".b_n");
    return g;
  }

  static IntegrationNetParams net_from(
      const std::function<const Tensor&(const std::string&)>& p, const std::string& prefix,
      std::size_t k, std::size_t channels) {
    IntegrationNetParams n;
    n.feature_count = k;
    n.channels = channels;
    n.hidden = 2 * channels;
    n.w1 = p(prefix + ".w1");
    n.b1 = p(prefix + ".b1");
    n.w2 = p(prefix + ".w2");
    n.b2 = p(prefix + ".b2");
    n.w3 = p(prefix + ".w3");
    n.b3 = p(prefix + ".b3");
    return n;
  }

  void register_gru(const std::string& prefix, Rng& rng) {
    const std::size_t c = cfg_.channels;
    GruParams g = GruParams::init(c, c, rng);
    store_.add(prefix + ".w_z", g.w_z);
    store_.add(prefix + ".u_z", g.u_z);
    store_.add(prefix + ".b_z", g.b_z);
    store_.add(prefix + ".w_r", g.w_r);
    store_.add(prefix + ".u_r", g.u_r);
    store_.add(prefix + ".b_r", g.b_r);
    store_.add(prefix + ".w_n", g.w_n);
    store_.add(prefix + ".u_n", g.u_n);
    store_.add(prefix + ".b_n", g.b_n);
  }

  void register_net(const std::string& prefix, std::size_t k, Rng& rng) {
    IntegrationNetParams n = IntegrationNetParams::init(k, cfg_.channels, rng);
    store_.add(prefix + ".w1", n.w1);
    store_.add(prefix + ".b1", n.b1);
    store_.add(prefix + ".w2", n.w2);
    store_.add(prefix + ".b2", n.b2);
    store_.add(prefix + ".w3", n.w3);
    store_.add(prefix + ".b3", n.b3);
  }

  void register_params(Rng& rng) {
    const std::size_t c = cfg_.channels;
    const AblationFlags& fl = cfg_.ablation;
    if (fl.use_ttr) {
      if (cfg_.ttr_share_weights) {
        register_gru("ttr.gru_shared", rng);
      } else {
        for (std::size_t i = 2; i <= cfg_.fragments; ++i)
          register_gru("ttr.gru" + std::to_string(i), rng);
      }
    }
    if (fl.use_ste_time) {
      store_.add("ste.conv.kernels", uniform_init({c, c, 3}, c * 3, rng));
      store_.add("ste.conv.bias", Tensor::zeros({c}));
      register_gru("ste.gru_time", rng);
    }
    if (fl.use_ste_freq) register_gru("ste.gru_freq", rng);
    register_net("int.net_str", 3, rng);
    if (cfg_.needs_strategies()) {
      register_gru("int.gru_c1", rng);
      register_gru("int.gru_c2", rng);
      if (fl.use_self) {
        const std::size_t self_k = cfg_.strategy_literal ? 1 : 2;
        register_net("int.net_self_c1", self_k, rng);
        register_net("int.net_self_c2", self_k, rng);
        register_net("int.net_sf", 2, rng);
      }
      if (fl.use_cross) register_net("int.net_cf", 2, rng);
    }
    register_net("int.net_final", 3, rng);

    RegressorParams r =
        RegressorParams::init(c, cfg_.joints, cfg_.reg_hidden, cfg_.reg_iters, rng);
    store_.add("reg.w1", r.w1);
    store_.add("reg.b1", r.b1);
    store_.add("reg.w2", r.w2);
    store_.add("reg.b2", r.b2);
    store_.add("reg.w3", r.w3);
    store_.add("reg.b3", r.b3);
  }

  ModelConfig cfg_;
  ToyBodyModel body_;
  ParamStore store_;
};

}  // namespace strnet
