#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppl/model.hpp"
#include "ppl/synthdata.hpp"
#include "ppl/training.hpp"

namespace ppl {

// Every knob of every module. Loaded from a hierarchical JSON document;
// unknown keys are errors; the effective (defaulted) config is echoed into
// every output directory so a run is reconstructible from its outputs.
struct RunConfig {
  uint64_t seed = 0;

  struct Data {
    std::string skeleton = "humanoid";
    int clips = 20;
    int frames_per_clip = 100;
    int resolution = 128;
    double motion_step = 0.12;
    int train_clips = 16;  // leading clips; the rest are the test split
  } data;

  struct Model {
    int n_keypoints = 16;
    int memory_banks = 34;
    int tokens_per_bank = 16;
    int token_dim = 512;
    int mixer_depth = 4;
    int mixer_expansion = 4;
    std::vector<int> enc_widths = {32, 64, 128, 256};
    std::vector<int> dec_widths = {32, 64, 128, 256};
    int prior_embed_dim = 256;
    int head_hidden = 512;
    double sigma_sq = 5e-4;
    int heat_res = 0;
    double memory_decay = 0.99;
    double memory_init_std = 0.02;
    double link_lr_scale = 512.0;
    bool reseed_dead_tokens = false;
  } model;

  struct Train {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 50;
    int steps_per_epoch = 0;
    double loss_ir = 1.0;
    double loss_b = 1.0;
    double loss_l = 1.0;
    double loss_kr = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
  } train;

  struct Inference {
    int iterations = 4;
    int mask_grid = 32;
    double fill_value = 0.0;
    std::vector<double> random_ratios = {0.1, 0.2, 0.3, 0.4};
    std::vector<int> center_sizes = {4, 8, 12};
  } inference;

  struct Sweep {
    std::vector<int> keypoints = {4, 8, 16, 32};
    std::vector<int> token_dims = {64, 128, 256, 512};
    std::vector<int> token_counts = {4, 8, 16};
    int epochs = 1;
    int clips = 4;
  } sweep;

  // Derived views.
  ModelConfig model_config() const;
  TrainConfig train_config() const;
  ClipConfig clip_config() const;
};

// Defaults overlaid with the JSON document at `path` ("" = pure defaults).
// Throws std::invalid_argument naming any unknown key.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);

std::string run_config_to_json_text(const RunConfig& cfg, int indent = 2);

// Hash of the effective config (provenance tag for sweep rows).
uint64_t run_config_hash(const RunConfig& cfg);

// Markdown table of every key, its type, default, and description.
std::string config_reference_markdown();

}  // namespace ppl
