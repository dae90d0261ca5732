#include "ppl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace ppl {

namespace {

// One schema walk serves the parser, the echo writer, and the reference
// page, so they cannot drift apart.
template <class V>
void visit_fields(RunConfig& c, V&& v) {
  v.field("seed", c.seed, "root seed; every random stream derives from it by name");

  v.field("data.skeleton", c.data.skeleton, "puppet skeleton: humanoid (16 joints) or quadruped (10)");
  v.field("data.clips", c.data.clips, "number of clips to generate");
  v.field("data.frames_per_clip", c.data.frames_per_clip, "frames per clip (>= 2)");
  v.field("data.resolution", c.data.resolution, "square frame resolution in pixels");
  v.field("data.motion_step", c.data.motion_step, "joint-angle random-walk step (radians)");
  v.field("data.train_clips", c.data.train_clips, "leading clips used for training; the rest are the test split");

  v.field("model.n_keypoints", c.model.n_keypoints, "keypoint count N of the pose prior");
  v.field("model.memory_banks", c.model.memory_banks, "memory banks m");
  v.field("model.tokens_per_bank", c.model.tokens_per_bank, "tokens per bank k");
  v.field("model.token_dim", c.model.token_dim, "token dimension d");
  v.field("model.mixer_depth", c.model.mixer_depth, "mixer blocks per coder");
  v.field("model.mixer_expansion", c.model.mixer_expansion, "mixer MLP expansion factor");
  v.field("model.enc_widths", c.model.enc_widths, "feature extractor channel widths (4 stages)");
  v.field("model.dec_widths", c.model.dec_widths, "reconstruction decoder channel widths");
  v.field("model.prior_embed_dim", c.model.prior_embed_dim, "prior embedding width");
  v.field("model.head_hidden", c.model.head_hidden, "affine head hidden width");
  v.field("model.sigma_sq", c.model.sigma_sq, "link heatmap thickness sigma^2 (normalized units^2)");
  v.field("model.heat_res", c.model.heat_res, "link heatmap resolution (0 = frame resolution)");
  v.field("model.memory_decay", c.model.memory_decay, "EMA decay for memory updates");
  v.field("model.memory_init_std", c.model.memory_init_std, "token init standard deviation");
  v.field("model.link_lr_scale", c.model.link_lr_scale, "learning-rate multiplier for raw link weights");
  v.field("model.reseed_dead_tokens", c.model.reseed_dead_tokens, "re-seed tokens unused for a full epoch");

  v.field("train.learning_rate", c.train.learning_rate, "Adam learning rate");
  v.field("train.batch_size", c.train.batch_size, "frame pairs per step");
  v.field("train.epochs", c.train.epochs, "training epochs");
  v.field("train.steps_per_epoch", c.train.steps_per_epoch, "steps per epoch (0 = frames/batch)");
  v.field("train.loss_ir", c.train.loss_ir, "image reconstruction loss weight");
  v.field("train.loss_b", c.train.loss_b, "boundary loss weight");
  v.field("train.loss_l", c.train.loss_l, "link regularization loss weight");
  v.field("train.loss_kr", c.train.loss_kr, "keypoint reconstruction loss weight");
  v.field("train.adam_beta1", c.train.adam_beta1, "Adam beta1");
  v.field("train.adam_beta2", c.train.adam_beta2, "Adam beta2");
  v.field("train.adam_eps", c.train.adam_eps, "Adam epsilon");

  v.field("inference.iterations", c.inference.iterations, "iterative-inference rounds");
  v.field("inference.mask_grid", c.inference.mask_grid, "occlusion patch grid (grid x grid)");
  v.field("inference.fill_value", c.inference.fill_value, "masked-pixel fill in [-1, 1]");
  v.field("inference.random_ratios", c.inference.random_ratios, "RandomMasking ratios to sweep");
  v.field("inference.center_sizes", c.inference.center_sizes, "CenterMasking sizes (patches) to sweep");

  v.field("sweep.keypoints", c.sweep.keypoints, "keypoint counts for the ablation grid");
  v.field("sweep.token_dims", c.sweep.token_dims, "token dimensions for the ablation grid");
  v.field("sweep.token_counts", c.sweep.token_counts, "tokens-per-bank values for the ablation grid");
  v.field("sweep.epochs", c.sweep.epochs, "epochs per sweep point");
  v.field("sweep.clips", c.sweep.clips, "training clips per sweep point");
}

json* descend(json& j, const std::string& dotted, bool create) {
  json* cur = &j;
  size_t start = 0;
  while (true) {
    const size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
    if (dot == std::string::npos) {
      if (!create && !cur->contains(key)) return nullptr;
      return &(*cur)[key];
    }
    if (!create && !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

struct ToJson {
  json out = json::object();
  template <class T>
  void field(const char* path, T& value, const char*) {
    *descend(out, path, true) = value;
  }
};

struct FromJson {
  const json& in;
  std::set<std::string> known;

  template <class T>
  void field(const char* path, T& value, const char*) {
    known.insert(path);
    json tmp = in;
    json* node = descend(tmp, path, false);
    if (!node) return;
    try {
      value = node->get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(std::string("config: bad value type for key '") + path + "'");
    }
  }
};

struct DocGen {
  std::ostringstream out;
  template <class T>
  void field(const char* path, T& value, const char* desc) {
    json def = value;
    out << "| `" << path << "` | " << type_name<T>() << " | `" << def.dump() << "` | " << desc
        << " |\n";
  }
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, uint64_t> || std::is_same_v<T, int>) return "integer";
    else if constexpr (std::is_same_v<T, double>) return "number";
    else if constexpr (std::is_same_v<T, bool>) return "boolean";
    else if constexpr (std::is_same_v<T, std::string>) return "string";
    else if constexpr (std::is_same_v<T, std::vector<int>>) return "integer list";
    else if constexpr (std::is_same_v<T, std::vector<double>>) return "number list";
    else return "value";
  }
};

void collect_leaf_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string next = prefix.empty() ? it.key() : prefix + "." + it.key();
      collect_leaf_paths(it.value(), next, out);
    }
  } else {
    out.push_back(prefix);
  }
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: document must be a JSON object");

  RunConfig cfg;
  FromJson visitor{j, {}};
  visit_fields(cfg, visitor);

  std::vector<std::string> leaves;
  collect_leaf_paths(j, "", leaves);
  for (const auto& path : leaves)
    if (!visitor.known.count(path))
      throw std::invalid_argument("config: unknown key '" + path + "'");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return run_config_from_json_text(ss.str());
}

std::string run_config_to_json_text(const RunConfig& cfg, int indent) {
  RunConfig copy = cfg;
  ToJson visitor;
  visit_fields(copy, visitor);
  return visitor.out.dump(indent);
}

uint64_t run_config_hash(const RunConfig& cfg) {
  const std::string text = run_config_to_json_text(cfg, -1);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_reference_markdown() {
  RunConfig defaults;
  DocGen gen;
  gen.out << "# Configuration reference\n\n"
          << "All keys are optional; omitted keys take the defaults below. Unknown keys are errors.\n\n"
          << "| Key | Type | Default | Description |\n|---|---|---|---|\n";
  visit_fields(defaults, gen);
  return gen.out.str();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.resolution = data.resolution;
  mc.n_keypoints = model.n_keypoints;
  mc.memory_banks = model.memory_banks;
  mc.tokens_per_bank = model.tokens_per_bank;
  mc.token_dim = model.token_dim;
  mc.mixer_depth = model.mixer_depth;
  mc.mixer_expansion = model.mixer_expansion;
  mc.enc_widths = model.enc_widths;
  mc.dec_widths = model.dec_widths;
  mc.prior_embed_dim = model.prior_embed_dim;
  mc.head_hidden = model.head_hidden;
  mc.sigma_sq = model.sigma_sq;
  mc.heat_res = model.heat_res;
  mc.memory_decay = static_cast<Real>(model.memory_decay);
  mc.memory_init_std = static_cast<Real>(model.memory_init_std);
  mc.link_lr_scale = static_cast<Real>(model.link_lr_scale);
  mc.reseed_dead_tokens = model.reseed_dead_tokens;
  return mc;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.model = model_config();
  tc.loss_weights.ir = static_cast<Real>(train.loss_ir);
  tc.loss_weights.b = static_cast<Real>(train.loss_b);
  tc.loss_weights.l = static_cast<Real>(train.loss_l);
  tc.loss_weights.kr = static_cast<Real>(train.loss_kr);
  tc.learning_rate = train.learning_rate;
  tc.adam_beta1 = train.adam_beta1;
  tc.adam_beta2 = train.adam_beta2;
  tc.adam_eps = train.adam_eps;
  tc.batch_size = train.batch_size;
  tc.epochs = train.epochs;
  tc.steps_per_epoch = train.steps_per_epoch;
  tc.seed = seed;
  return tc;
}

ClipConfig RunConfig::clip_config() const {
  ClipConfig cc;
  cc.length = data.frames_per_clip;
  cc.resolution = data.resolution;
  cc.motion_step = data.motion_step;
  return cc;
}

}  // namespace ppl
