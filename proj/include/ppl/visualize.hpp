#pragma once

#include <string>
#include <vector>

#include "ppl/geometry.hpp"
#include "ppl/imageio.hpp"

namespace ppl {

// Keypoints as discs plus pairwise links whose intensity follows the
// effective connectivity weight. Weights below min_weight are skipped.
ImageU8 render_prior_image(const KeypointSet& prior, const TensorT<double>& effective_w,
                           int resolution, double min_weight = 0.05);

// Same drawing over an existing frame.
ImageU8 render_pose_overlay(const ImageU8& frame, const KeypointSet& keypoints,
                            const TensorT<double>& effective_w, double min_weight = 0.05);

// Minimal line chart (one polyline per series, shared x grid). Written for
// eyeballing sweeps; the paired data tables are the machine-readable output.
ImageU8 render_line_chart(const std::vector<std::vector<double>>& series_y,
                          const std::vector<double>& xs, int width = 640, int height = 420);

}  // namespace ppl
