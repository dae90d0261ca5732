#include "ppl/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppl/checkpoint.hpp"
#include "ppl/visualize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ppl {

void TrainConfig::validate() const {
  model.validate();
  if (learning_rate <= 0) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (batch_size <= 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
}

std::pair<int, int> sample_pair(const VideoClip& clip, RngStream& rng) {
  const int frames = static_cast<int>(clip.frames.size());
  if (frames < 2) throw std::invalid_argument("sample_pair: video needs >= 2 frames");
  const int i = static_cast<int>(rng.next_below(static_cast<uint64_t>(frames)));
  int ref = static_cast<int>(rng.next_below(static_cast<uint64_t>(frames - 1)));
  if (ref >= i) ++ref;
  return {i, ref};
}

Trainer::Trainer(PPLModel& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {
  cfg_.validate();
}

void Trainer::assemble_batch(const Dataset& dataset, RngStream& rng, Tensor& frames,
                             Tensor& refs, std::vector<std::pair<int, int>>* picked) {
  std::vector<int> usable;
  for (size_t ci = 0; ci < dataset.clips.size(); ++ci) {
    if (dataset.clips[ci].frames.size() >= 2) {
      usable.push_back(static_cast<int>(ci));
    } else if (!warned_short_clips_) {
      std::cerr << "[train] warning: clip " << ci << " has < 2 frames, skipped\n";
      warned_short_clips_ = true;
    }
  }
  if (usable.empty()) throw std::runtime_error("assemble_batch: no clip has >= 2 frames");
  const int res = cfg_.model.resolution;
  const int64_t chw = 3LL * res * res;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const int ci = usable[rng.next_below(usable.size())];
    const auto& clip = dataset.clips[static_cast<size_t>(ci)];
    const auto [fi, ri] = sample_pair(clip, rng);
    if (picked) picked->push_back({ci, fi});
    const Tensor f = image_to_frame(clip.frames[static_cast<size_t>(fi)]);
    const Tensor r = image_to_frame(clip.frames[static_cast<size_t>(ri)]);
    if (f.dim(1) != res || f.dim(2) != res)
      throw std::runtime_error("assemble_batch: dataset resolution mismatch");
    std::copy(f.v.begin(), f.v.end(), frames.v.begin() + b * chw);
    std::copy(r.v.begin(), r.v.end(), refs.v.begin() + b * chw);
  }
}

LossBreakdown Trainer::step(const Tensor& frames, const Tensor& refs) {
  Graph g;
  model_.params().attach(g);
  ForwardVars fv = model_.forward_with_detachments(g, frames, refs, cfg_.loss_weights);
  if (!std::isfinite(fv.losses.total))
    throw std::runtime_error("Trainer::step: non-finite loss");
  g.backward(fv.total);
  ++step_count_;
  model_.params().adam_step(g, static_cast<Real>(cfg_.learning_rate),
                            static_cast<Real>(cfg_.adam_beta1),
                            static_cast<Real>(cfg_.adam_beta2),
                            static_cast<Real>(cfg_.adam_eps), step_count_);
  model_.memory().ema_update(g.val(fv.tokens), fv.retrieval_indices);
  return fv.losses;
}

namespace {

void write_prior_snapshot(const PPLModel& model, PPLModel& mutable_model,
                          const std::string& out_dir, int epoch) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "prior_epoch_%03d", epoch);
  const KeypointSet prior = mutable_model.distill_prior();
  const TensorT<double> effw = model.connectivity();
  write_png((fs::path(out_dir) / (std::string(buf) + ".png")).string(),
            render_prior_image(prior, effw, 256));
  json j;
  json pts = json::array();
  for (const auto& p : prior.points) pts.push_back({p.x, p.y});
  j["keypoints"] = pts;
  j["effective_w"] = effw.v;
  std::ofstream out(fs::path(out_dir) / (std::string(buf) + ".json"));
  out << j.dump(0) << "\n";
}

void dump_divergence(const PPLModel& model, const std::string& out_dir, int64_t step,
                     int epoch, const LossBreakdown& losses,
                     const std::vector<std::pair<int, int>>& picked) {
  json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["losses"] = {{"l_ir", losses.l_ir},
                 {"l_b", losses.l_b},
                 {"l_l", losses.l_l},
                 {"l_kr", losses.l_kr},
                 {"total", losses.total}};
  json batch = json::array();
  for (auto [ci, fi] : picked) batch.push_back({{"clip", ci}, {"frame", fi}});
  j["batch"] = batch;
  json norms;
  for (const auto& p : model.params().all()) {
    double ss = 0.0;
    for (Real v : p->value.v) ss += static_cast<double>(v) * v;
    norms[p->name] = std::sqrt(ss);
  }
  j["param_l2_norms"] = norms;
  std::ofstream out(fs::path(out_dir) / "diverged_dump.json");
  out << j.dump(2) << "\n";
}

}  // namespace

TrainSummary Trainer::train(const Dataset& dataset, const std::string& out_dir,
                            const std::string& resume_from,
                            const std::string& config_echo_json) {
  fs::create_directories(out_dir);
  int start_epoch = 0;
  if (!resume_from.empty()) {
    const CheckpointMeta meta = load_checkpoint(resume_from, model_);
    step_count_ = meta.step;
    start_epoch = meta.epoch;
  }

  int64_t total_frames = 0;
  for (const auto& c : dataset.clips) total_frames += static_cast<int64_t>(c.frames.size());
  const int steps_per_epoch =
      cfg_.steps_per_epoch > 0
          ? cfg_.steps_per_epoch
          : static_cast<int>((total_frames + cfg_.batch_size - 1) / cfg_.batch_size);

  RngStream sample_rng = named_stream(cfg_.seed, "sampling");
  RngStream reseed_rng = named_stream(cfg_.seed, "reseed");

  std::ofstream loss_log;
  const fs::path log_path = fs::path(out_dir) / "loss_log.csv";
  const bool fresh_log = !fs::exists(log_path) || resume_from.empty();
  loss_log.open(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  if (fresh_log) loss_log << "step,epoch,l_ir,l_b,l_l,l_kr,total\n";

  TrainSummary summary;
  auto save_epoch = [&](int epoch) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "epoch_%03d.ckpt", epoch);
    const std::string path = (fs::path(out_dir) / buf).string();
    CheckpointMeta meta;
    meta.step = step_count_;
    meta.epoch = epoch;
    meta.config_echo = config_echo_json;
    save_checkpoint(path, model_, meta);
    summary.checkpoints.push_back(path);
    write_prior_snapshot(model_, model_, out_dir, epoch);
  };

  if (start_epoch == 0) save_epoch(0);

  const int res = cfg_.model.resolution;
  Tensor frames({cfg_.batch_size, 3, res, res});
  Tensor refs({cfg_.batch_size, 3, res, res});
  bool first = true;
  for (int epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
    model_.memory().reset_usage();
    Tensor last_tokens;
    for (int s = 0; s < steps_per_epoch; ++s) {
      std::vector<std::pair<int, int>> picked;
      assemble_batch(dataset, sample_rng, frames, refs, &picked);

      Graph g;
      model_.params().attach(g);
      ForwardVars fv = model_.forward_with_detachments(g, frames, refs, cfg_.loss_weights);
      if (!std::isfinite(fv.losses.total)) {
        dump_divergence(model_, out_dir, step_count_, epoch, fv.losses, picked);
        throw std::runtime_error(
            "train: non-finite loss at step " + std::to_string(step_count_) +
            "; diagnostics in " + (fs::path(out_dir) / "diverged_dump.json").string());
      }
      g.backward(fv.total);
      ++step_count_;
      model_.params().adam_step(g, static_cast<Real>(cfg_.learning_rate),
                                static_cast<Real>(cfg_.adam_beta1),
                                static_cast<Real>(cfg_.adam_beta2),
                                static_cast<Real>(cfg_.adam_eps), step_count_);
      model_.memory().ema_update(g.val(fv.tokens), fv.retrieval_indices);
      last_tokens = g.val(fv.tokens);

      loss_log << step_count_ << "," << epoch << "," << fv.losses.l_ir << ","
               << fv.losses.l_b << "," << fv.losses.l_l << "," << fv.losses.l_kr << ","
               << fv.losses.total << "\n";
      if (first) {
        summary.first_losses = fv.losses;
        first = false;
      }
      summary.last_losses = fv.losses;
      ++summary.steps;
    }
    loss_log.flush();
    if (cfg_.model.reseed_dead_tokens && last_tokens.numel() > 0) {
      const int n = model_.memory().reseed_unused(last_tokens, reseed_rng);
      if (n > 0) std::cerr << "[train] reseeded " << n << " unused tokens\n";
    }
    save_epoch(epoch + 1);
    summary.epochs_run = epoch - start_epoch + 1;
  }
  return summary;
}

}  // namespace ppl
