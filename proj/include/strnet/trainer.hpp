#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

#include "strnet/adam.hpp"
#include "strnet/dataset.hpp"
#include "strnet/loss.hpp"
#include "strnet/metrics.hpp"
#include "strnet/model.hpp"

namespace strnet {

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  // 0: one full shuffled pass per epoch; otherwise each epoch draws this
  // many batches sampled with replacement
  std::size_t steps_per_epoch = 0;
  double lr = 5e-5;
  AdamConfig adam;
  std::size_t patience = 5;
  double lr_factor = 10.0;
  bool use_plateau_schedule = true;
  double stop_below_lr = 0.0;  // early-stop once the schedule drops under this
  LossWeights loss_weights;
  bool supervise_all_frames = false;
  std::uint64_t shuffle_seed = 0;
  std::size_t threads = 0;  // 0: STR_THREADS env, else hardware concurrency
};

struct TrainState {
  std::size_t epoch = 0;
  PlateauSchedule sched;
  AdamState adam;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0, l3d = 0.0, l2d = 0.0, lshape = 0.0, lpose = 0.0;
  double lr = 0.0;
  MetricsReport val;
};

// STR_THREADS caps batch parallelism; an explicit option is capped as well.
inline std::size_t resolve_threads(std::size_t requested) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STR_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) cap = std::min(cap, std::size_t(v));
  }
  if (requested >= 1) return std::min(requested, cap);
  return cap;
}

namespace trainer_detail {

// Runs fn(i) for i in [0, n) across up to `threads` workers; exceptions are
// re-thrown on the caller thread.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n == 0 ? 1 : n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline LossTerms window_loss(const StrModel& model, const StrModel::Binding& binding,
                             const FeatureWindow& w, const LossWeights& lw,
                             bool supervise_all_frames) {
  StrModel::Prediction pred = model.forward(binding, w.features);
  const std::size_t frames = supervise_all_frames ? model.config().seq_len : 1;
  return loss_lg(pred.j3d, pred.j2d, pred.theta, pred.beta, w.gt_joints3d, w.gt_joints2d,
                 w.gt_theta, w.gt_beta, lw, frames);
}

}  // namespace trainer_detail

// One Adam step over a batch of windows: per-window graphs run in parallel,
// per-window gradients are reduced in window order so the result does not
// depend on the thread count, then the mean gradient is applied.
struct StepStats {
  double loss = 0.0, l3d = 0.0, l2d = 0.0, lshape = 0.0, lpose = 0.0;
};

inline StepStats train_step(StrModel& model, const std::vector<const FeatureWindow*>& batch,
                            TrainState& state, double lr, const TrainOptions& opts) {
  if (batch.empty()) throw ValueError("train_step on an empty batch");
  const std::size_t n = batch.size(), np = model.store().size();

  std::vector<std::vector<std::vector<double>>> grads(n);
  std::vector<LossTerms> terms(n);
  trainer_detail::parallel_for(n, resolve_threads(opts.threads), [&](std::size_t i) {
    StrModel::Binding binding = model.bind(/*tracked=*/true);
    terms[i] = trainer_detail::window_loss(model, binding, *batch[i], opts.loss_weights,
                                           opts.supervise_all_frames);
    backward(terms[i].total);
    grads[i].resize(np);
    for (std::size_t j = 0; j < np; ++j) grads[i][j] = binding.leaves[j].grad();
  });

  // ordered reduction, then mean
  std::vector<std::vector<double>> mean(np);
  for (std::size_t j = 0; j < np; ++j) mean[j].assign(model.store().values(j).size(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < np; ++j)
      for (std::size_t k = 0; k < mean[j].size(); ++k) mean[j][k] += grads[i][j][k];
  for (auto& g : mean)
    for (auto& v : g) v /= double(n);

  auto ptrs = model.store().value_ptrs();
  adam_step(ptrs, mean, state.adam, lr, opts.adam);

  StepStats s;
  for (const auto& t : terms) {
    s.loss += t.total.value() / double(n);
    s.l3d += t.l3d / double(n);
    s.l2d += t.l2d / double(n);
    s.lshape += t.lshape / double(n);
    s.lpose += t.lpose / double(n);
  }
  return s;
}

// Per-frame joint tracks grouped by sequence, ordered by frame index; used
// for the acceleration metric and the plot command.
struct SequenceTrack {
  int seq_id = 0;
  std::vector<int> frames;
  std::vector<Tensor> pred_joints;
  std::vector<Tensor> gt_joints;
};

inline std::vector<SequenceTrack> collect_tracks(const StrModel& model, const Dataset& ds,
                                                 bool gt_oracle = false,
                                                 std::size_t threads = 0) {
  StrModel::Binding binding = model.bind(/*tracked=*/false);
  std::vector<std::size_t> order(ds.windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ds.windows[a].seq_id != ds.windows[b].seq_id)
      return ds.windows[a].seq_id < ds.windows[b].seq_id;
    return ds.windows[a].frame_index < ds.windows[b].frame_index;
  });

  std::vector<Tensor> preds(ds.windows.size());
  if (!gt_oracle)
    trainer_detail::parallel_for(ds.windows.size(), resolve_threads(threads),
                                 [&](std::size_t i) {
                                   preds[i] = model.forward(binding, ds.windows[i].features).j3d;
                                 });

  std::vector<SequenceTrack> tracks;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const FeatureWindow& w = ds.windows[order[oi]];
    if (tracks.empty() || tracks.back().seq_id != w.seq_id) {
      tracks.push_back({});
      tracks.back().seq_id = w.seq_id;
    }
    tracks.back().frames.push_back(w.frame_index);
    tracks.back().pred_joints.push_back(gt_oracle ? w.gt_joints3d : preds[order[oi]]);
    tracks.back().gt_joints.push_back(w.gt_joints3d);
  }
  return tracks;
}

// Mean metrics over a dataset. MPJPE/PA-MPJPE/MPVPE average over windows;
// the acceleration error averages over uniformly spaced runs of length >= 3
// within each sequence.
inline MetricsReport evaluate(const StrModel& model, const Dataset& ds, bool gt_oracle = false,
                              std::size_t threads = 0) {
  if (ds.windows.empty()) throw ValueError("evaluation over an empty dataset");
  const std::size_t n = ds.windows.size();
  StrModel::Binding binding = model.bind(/*tracked=*/false);
  ToyBodyModel body = ds.asset();

  std::vector<double> vj(n), vp(n), vv(n);
  trainer_detail::parallel_for(n, resolve_threads(threads), [&](std::size_t i) {
    const FeatureWindow& w = ds.windows[i];
    Tensor pred_j3d, pred_mesh;
    if (gt_oracle) {
      pred_j3d = w.gt_joints3d;
      pred_mesh = body_forward(body, w.gt_theta, w.gt_beta);
    } else {
      StrModel::Prediction pred = model.forward(binding, w.features);
      pred_j3d = pred.j3d;
      pred_mesh = pred.mesh;
    }
    Tensor gt_mesh = body_forward(body, w.gt_theta, w.gt_beta);
    vj[i] = mpjpe(pred_j3d, w.gt_joints3d);
    vp[i] = pa_mpjpe(pred_j3d, w.gt_joints3d);
    vv[i] = mpvpe(pred_mesh, gt_mesh);
  });

  MetricsReport r;
  r.sample_count = n;
  for (std::size_t i = 0; i < n; ++i) {
    r.mpjpe += vj[i] / double(n);
    r.pa_mpjpe += vp[i] / double(n);
    r.mpvpe += vv[i] / double(n);
  }

  // acceleration over uniformly spaced per-sequence runs
  auto tracks = collect_tracks(model, ds, gt_oracle, threads);
  double acc = 0.0;
  std::size_t acc_terms = 0;
  for (const auto& tr : tracks) {
    std::size_t run_begin = 0;
    auto flush = [&](std::size_t begin, std::size_t end) {
      if (end - begin < 3) return;
      std::vector<Tensor> p(tr.pred_joints.begin() + begin, tr.pred_joints.begin() + end);
      std::vector<Tensor> g(tr.gt_joints.begin() + begin, tr.gt_joints.begin() + end);
      std::size_t terms = end - begin - 2;
      acc += accel_error(p, g) * double(terms);
      acc_terms += terms;
    };
    for (std::size_t i = run_begin + 1; i < tr.frames.size(); ++i) {
      int step = tr.frames[run_begin + 1] - tr.frames[run_begin];
      if (tr.frames[i] - tr.frames[i - 1] != step) {
        flush(run_begin, i);
        run_begin = i;
      }
    }
    flush(run_begin, tr.frames.size());
  }
  if (acc_terms > 0) r.accel_err = acc / double(acc_terms);
  return r;
}

struct TrainResult {
  std::vector<EpochLog> epochs;
  TrainState state;
};

// Epoch loop: deterministic shuffling, mini-batch Adam, per-epoch validation
// metrics, and the reduce-on-plateau schedule driven by PA-MPJPE.
inline TrainResult train(StrModel& model, const Dataset& train_ds, const Dataset* val_ds,
                         const TrainOptions& opts, TrainState resume = {}) {
  if (train_ds.windows.empty() && opts.epochs > 0)
    throw ValueError("training on an empty dataset");
  if (train_ds.seq_len != model.config().seq_len || train_ds.channels != model.config().channels)
    throw ValueError("dataset windows are [" + std::to_string(train_ds.seq_len) + "x" +
                     std::to_string(train_ds.channels) + "], model config wants [" +
                     std::to_string(model.config().seq_len) + "x" +
                     std::to_string(model.config().channels) + "]");

  TrainResult result;
  result.state = std::move(resume);
  if (result.state.sched.lr <= 0.0 || result.state.epoch == 0) result.state.sched.lr = opts.lr;
  result.state.sched.patience = opts.patience;
  result.state.sched.factor = opts.lr_factor;

  const std::size_t batch = std::max<std::size_t>(1, opts.batch_size);
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    const std::size_t epoch_no = result.state.epoch + 1;
    double lr = result.state.sched.lr;

    Rng shuffle(opts.shuffle_seed ^ (0xa076bca97ULL + epoch_no));

    EpochLog log;
    log.epoch = epoch_no;
    log.lr = lr;
    std::size_t steps = 0;
    auto run_batch = [&](const std::vector<const FeatureWindow*>& bw) {
      StepStats s = train_step(model, bw, result.state, lr, opts);
      log.loss += s.loss;
      log.l3d += s.l3d;
      log.l2d += s.l2d;
      log.lshape += s.lshape;
      log.lpose += s.lpose;
      ++steps;
    };
    if (opts.steps_per_epoch == 0) {
      std::vector<std::size_t> order(train_ds.windows.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[std::size_t(shuffle.below(i))]);
      for (std::size_t b = 0; b < order.size(); b += batch) {
        std::vector<const FeatureWindow*> bw;
        for (std::size_t i = b; i < std::min(order.size(), b + batch); ++i)
          bw.push_back(&train_ds.windows[order[i]]);
        run_batch(bw);
      }
    } else {
      for (std::size_t s = 0; s < opts.steps_per_epoch; ++s) {
        std::vector<const FeatureWindow*> bw;
        for (std::size_t i = 0; i < batch; ++i)
          bw.push_back(&train_ds.windows[shuffle.below(train_ds.windows.size())]);
        run_batch(bw);
      }
    }
    if (steps > 0) {
      log.loss /= double(steps);
      log.l3d /= double(steps);
      log.l2d /= double(steps);
      log.lshape /= double(steps);
      log.lpose /= double(steps);
    }

    log.val = evaluate(model, val_ds ? *val_ds : train_ds, false, opts.threads);
    if (opts.use_plateau_schedule) result.state.sched.observe(log.val.pa_mpjpe);

    result.state.epoch = epoch_no;
    result.epochs.push_back(log);
    if (opts.stop_below_lr > 0.0 && result.state.sched.lr < opts.stop_below_lr) break;
  }
  return result;
}

inline std::string train_log_csv(const std::vector<EpochLog>& logs) {
  std::string out = "epoch,loss,loss_3d,loss_2d,loss_shape,loss_pose,lr,"
                    "val_mpjpe,val_pa_mpjpe,val_mpvpe,val_accel\n";
  char buf[512];
  for (const auto& l : logs) {
    std::snprintf(buf, sizeof(buf),
                  "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", l.epoch,
                  l.loss, l.l3d, l.l2d, l.lshape, l.lpose, l.lr, l.val.mpjpe, l.val.pa_mpjpe,
                  l.val.mpvpe, l.val.accel_err);
    out += buf;
  }
  return out;
}

// --- checkpointing -------------------------------------------------------------

inline void save_checkpoint(const std::string& path, const StrModel& model,
                            const TrainState& state) {
  ArrayContainer c;
  const ModelConfig& cfg = model.config();
  c.add_scalar("meta/T", double(cfg.seq_len));
  c.add_scalar("meta/C", double(cfg.channels));
  c.add_scalar("meta/J", double(cfg.joints));
  c.add_scalar("meta/Nv", double(cfg.vertices));
  c.add_scalar("meta/epoch", double(state.epoch));
  c.add_scalar("meta/lr", state.sched.lr);
  c.add_scalar("meta/best", state.sched.best);
  c.add_scalar("meta/stall", double(state.sched.stall));
  c.add_scalar("meta/adam_step", double(state.adam.step));
  model.store().write_to(c, "param/");
  if (!state.adam.m.empty()) {
    const auto& entries = model.store().entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      c.add("adam/m/" + entries[i].name, entries[i].shape, state.adam.m[i]);
      c.add("adam/v/" + entries[i].name, entries[i].shape, state.adam.v[i]);
    }
  }
  c.save(path);
}

inline TrainState load_checkpoint(const std::string& path, StrModel& model) {
  ArrayContainer c = ArrayContainer::load(path);
  const ModelConfig& cfg = model.config();
  auto expect = [&](const char* key, double want) {
    double got = c.get_scalar(key);
    if (got != want)
      throw ValueError("checkpoint " + std::string(key) + "=" + std::to_string(got) +
                       " does not match the model config value " + std::to_string(want));
  };
  expect("meta/T", double(cfg.seq_len));
  expect("meta/C", double(cfg.channels));
  expect("meta/J", double(cfg.joints));
  expect("meta/Nv", double(cfg.vertices));

  model.store().read_from(c, "param/");
  TrainState st;
  st.epoch = std::size_t(c.get_scalar("meta/epoch"));
  st.sched.lr = c.get_scalar("meta/lr");
  st.sched.best = c.get_scalar("meta/best");
  st.sched.stall = std::size_t(c.get_scalar("meta/stall"));
  st.adam.step = std::size_t(c.get_scalar("meta/adam_step"));
  if (st.adam.step > 0) {
    const auto& entries = model.store().entries();
    st.adam.m.resize(entries.size());
    st.adam.v.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      st.adam.m[i] = c.get("adam/m/" + entries[i].name).data;
      st.adam.v[i] = c.get("adam/v/" + entries[i].name).data;
    }
  }
  return st;
}

// --- ablation ------------------------------------------------------------------

struct AblationRow {
  std::string variant;
  double pa_mpjpe = 0.0;
  double accel_err = 0.0;
};

// Trains each variant from scratch with a shared seed and identical schedule,
// then scores it on the held-out set.
inline std::vector<AblationRow> run_ablation(const ModelConfig& base, const Dataset& train_ds,
                                             const Dataset& heldout, const TrainOptions& opts,
                                             std::uint64_t seed,
                                             const std::vector<std::string>& variants) {
  std::vector<AblationRow> rows;
  for (const auto& name : variants) {
    ModelConfig cfg = base;
    cfg.ablation = AblationFlags::for_variant(name);
    StrModel model(cfg, train_ds.asset(), seed);
    TrainOptions o = opts;
    o.shuffle_seed = seed;
    train(model, train_ds, &heldout, o);
    MetricsReport m = evaluate(model, heldout, false, opts.threads);
    rows.push_back({name, m.pa_mpjpe, m.accel_err});
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,pa_mpjpe,accel_err\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", r.variant.c_str(), r.pa_mpjpe,
                  r.accel_err);
    out += buf;
  }
  return out;
}

}  // namespace strnet
