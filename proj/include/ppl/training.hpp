#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ppl/model.hpp"
#include "ppl/synthdata.hpp"

namespace ppl {

struct TrainConfig {
  ModelConfig model;
  LossWeights loss_weights;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 64;
  int epochs = 50;
  uint64_t seed = 0;
  int steps_per_epoch = 0;  // 0: ceil(total frames / batch_size)

  void validate() const;
};

// Uniform over ordered pairs of distinct frame indices.
std::pair<int, int> sample_pair(const VideoClip& clip, RngStream& rng);

struct TrainSummary {
  int64_t steps = 0;
  int epochs_run = 0;
  LossBreakdown first_losses;
  LossBreakdown last_losses;
  std::vector<std::string> checkpoints;
};

// Runs the optimization loop: Adam on all parameter groups (raw link
// weights carry their configured learning-rate scale), EMA memory updates
// each step, a checkpoint plus prior snapshot per epoch, and an append-only
// loss log. Aborts with a diagnostic dump if any loss turns non-finite.
class Trainer {
 public:
  Trainer(PPLModel& model, const TrainConfig& cfg);

  // resume_from: optional checkpoint path; restores parameters, memory,
  // optimizer state, and the step counter.
  TrainSummary train(const Dataset& dataset, const std::string& out_dir,
                     const std::string& resume_from = "",
                     const std::string& config_echo_json = "{}");

  // One optimization step on an explicit batch; exposed for overfit tests
  // and audits. Returns the loss breakdown of the forward pass.
  LossBreakdown step(const Tensor& frames, const Tensor& refs);

  int64_t steps_taken() const { return step_count_; }

 private:
  void assemble_batch(const Dataset& dataset, RngStream& rng, Tensor& frames,
                      Tensor& refs, std::vector<std::pair<int, int>>* picked);

  PPLModel& model_;
  TrainConfig cfg_;
  int64_t step_count_ = 0;
  bool warned_short_clips_ = false;
};

}  // namespace ppl
