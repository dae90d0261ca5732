#include "ppl/inference.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppl/imageio.hpp"
#include "ppl/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ppl {

void OcclusionSpec::validate(int resolution) const {
  if (grid <= 0 || resolution % grid != 0)
    throw std::invalid_argument("OcclusionSpec: grid must divide the image resolution");
  if (kind == MaskKind::RandomMasking && (mask_ratio < 0.0 || mask_ratio > 1.0))
    throw std::invalid_argument("OcclusionSpec: mask_ratio must be in [0, 1]");
  if (kind == MaskKind::CenterMasking && (mask_size < 0 || mask_size > grid))
    throw std::invalid_argument("OcclusionSpec: mask_size must be in [0, grid]");
}

std::string OcclusionSpec::label() const {
  switch (kind) {
    case MaskKind::None:
      return "none";
    case MaskKind::RandomMasking: {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "random_%.2f", mask_ratio);
      return buf;
    }
    case MaskKind::CenterMasking: {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "center_%d", mask_size);
      return buf;
    }
  }
  return "unknown";
}

std::vector<int> masked_patches(const OcclusionSpec& spec) {
  const int total = spec.grid * spec.grid;
  if (spec.kind == MaskKind::None) return {};
  if (spec.kind == MaskKind::RandomMasking) {
    const int take = static_cast<int>(std::lround(spec.mask_ratio * total));
    RngStream rng = named_stream(spec.seed, "masking");
    auto picks = rng.sample_without_replacement(total, take);
    return picks;
  }
  // CenterMasking: centered block.
  std::vector<int> picks;
  const int start = (spec.grid - spec.mask_size) / 2;
  for (int r = start; r < start + spec.mask_size; ++r)
    for (int c = start; c < start + spec.mask_size; ++c)
      picks.push_back(r * spec.grid + c);
  return picks;
}

Tensor apply_mask(const Tensor& frame, const OcclusionSpec& spec) {
  if (frame.ndim() != 3 || frame.dim(0) != 3)
    throw std::invalid_argument("apply_mask: frame must be (3,H,W)");
  const int H = frame.dim(1), W = frame.dim(2);
  if (H != W) throw std::invalid_argument("apply_mask: expects square frames");
  spec.validate(H);
  Tensor out = frame;
  const int patch = H / spec.grid;
  const int64_t hw = static_cast<int64_t>(H) * W;
  for (int idx : masked_patches(spec)) {
    const int pr = idx / spec.grid, pc = idx % spec.grid;
    for (int c = 0; c < 3; ++c)
      for (int y = pr * patch; y < (pr + 1) * patch; ++y)
        for (int x = pc * patch; x < (pc + 1) * patch; ++x)
          out.v[c * hw + static_cast<int64_t>(y) * W + x] = spec.fill_value;
  }
  return out;
}

std::vector<InferenceTrace> iterative_infer_batch(PPLModel& model, const Tensor& frames,
                                                  int iterations, bool keep_frames) {
  if (iterations < 1)
    throw std::invalid_argument("iterative_infer: iterations must be >= 1");
  if (frames.ndim() != 4 || frames.dim(1) != 3)
    throw std::invalid_argument("iterative_infer: frames must be (B,3,H,W)");
  const int B = frames.dim(0);
  const int H = frames.dim(2), W = frames.dim(3);
  const int64_t chw = 3LL * H * W;

  std::vector<InferenceTrace> traces(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    traces[static_cast<size_t>(b)].input =
        Tensor({3, H, W}, std::vector<Real>(frames.v.begin() + b * chw,
                                            frames.v.begin() + (b + 1) * chw));
  }

  Tensor current = frames;  // iteration input; the original stays the reference
  for (int iter = 0; iter < iterations; ++iter) {
    const Tensor t_prime = model.estimate_keypoints(current);
    const Tensor t_recon = model.refine_keypoints(t_prime);
    const Tensor heat = model.render_heatmap(t_recon);
    const Tensor recon = model.decode_frames(frames, heat);
    for (int b = 0; b < B; ++b) {
      auto& tr = traces[static_cast<size_t>(b)];
      tr.estimates.push_back(KeypointSet::from_tensor(t_prime, b));
      tr.refined.push_back(KeypointSet::from_tensor(t_recon, b));
      if (keep_frames)
        tr.reconstructions.push_back(
            Tensor({3, H, W}, std::vector<Real>(recon.v.begin() + b * chw,
                                                recon.v.begin() + (b + 1) * chw)));
    }
    current = recon;
  }
  const Tensor t_final = model.estimate_keypoints(current);
  for (int b = 0; b < B; ++b)
    traces[static_cast<size_t>(b)].estimates.push_back(KeypointSet::from_tensor(t_final, b));
  return traces;
}

InferenceTrace iterative_infer(PPLModel& model, const Tensor& frame, int iterations) {
  if (frame.ndim() != 3)
    throw std::invalid_argument("iterative_infer: frame must be (3,H,W)");
  Tensor batch({1, frame.dim(0), frame.dim(1), frame.dim(2)}, frame.v);
  auto traces = iterative_infer_batch(model, batch, iterations, true);
  return std::move(traces[0]);
}

void export_trace(const InferenceTrace& trace, const std::string& dir) {
  fs::create_directories(dir);
  write_png((fs::path(dir) / "input.png").string(), frame_to_image(trace.input));
  for (size_t i = 0; i < trace.reconstructions.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "iter_%zu.png", i);
    write_png((fs::path(dir) / buf).string(), frame_to_image(trace.reconstructions[i]));
  }
  json j;
  json est = json::object();
  for (size_t i = 0; i < trace.estimates.size(); ++i) {
    json pts = json::array();
    for (const auto& p : trace.estimates[i].points) pts.push_back({p.x, p.y});
    est[std::to_string(i)] = std::move(pts);
  }
  j["estimates"] = std::move(est);
  json ref = json::object();
  for (size_t i = 0; i < trace.refined.size(); ++i) {
    json pts = json::array();
    for (const auto& p : trace.refined[i].points) pts.push_back({p.x, p.y});
    ref[std::to_string(i)] = std::move(pts);
  }
  j["refined"] = std::move(ref);
  std::ofstream out(fs::path(dir) / "keypoints.json");
  out << j.dump(0) << "\n";
}

}  // namespace ppl
