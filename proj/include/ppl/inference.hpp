#pragma once

#include <string>
#include <vector>

#include "ppl/model.hpp"

namespace ppl {

enum class MaskKind { None, RandomMasking, CenterMasking };

// Occlusion protocols on a patch grid (32 x 32 by default). Random masking
// removes exactly round(ratio * grid^2) distinct patches chosen by seed;
// center masking removes a centered size x size patch block. The masked
// pixel set never depends on image content.
struct OcclusionSpec {
  MaskKind kind = MaskKind::None;
  int grid = 32;
  double mask_ratio = 0.0;  // RandomMasking, in [0, 1]
  int mask_size = 0;        // CenterMasking, in patches
  Real fill_value = Real(0);
  uint64_t seed = 0;

  void validate(int resolution) const;
  std::string label() const;
};

// frame: (3, H, W). Unmasked pixels are bit-identical to the input.
Tensor apply_mask(const Tensor& frame, const OcclusionSpec& spec);

// Patch indices (row-major on the grid) the spec masks; content-independent.
std::vector<int> masked_patches(const OcclusionSpec& spec);

// Records of one iterative-inference run. For R iterations there are R+1
// keypoint estimates (iteration 0 = estimate on the input frame) and R
// reconstructed frames; the original frame stays the decoder reference
// throughout.
struct InferenceTrace {
  Tensor input;                         // (3,H,W) possibly occluded frame
  std::vector<KeypointSet> estimates;   // R+1 raw estimates T'
  std::vector<KeypointSet> refined;     // R memory round-trips T'_recon
  std::vector<Tensor> reconstructions;  // R frames (3,H,W)
};

InferenceTrace iterative_infer(PPLModel& model, const Tensor& frame, int iterations);

// Batched variant; drops reconstructed frames when keep_frames is false
// (bulk evaluation over a test split).
std::vector<InferenceTrace> iterative_infer_batch(PPLModel& model, const Tensor& frames,
                                                  int iterations, bool keep_frames);

// Directory layout: iter_#.png reconstructions, input.png, keypoints.json
// (iteration -> list of N [x, y] pairs).
void export_trace(const InferenceTrace& trace, const std::string& dir);

}  // namespace ppl
