#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ppl/geometry.hpp"
#include "ppl/imageio.hpp"
#include "ppl/rng.hpp"

namespace ppl {

struct SkeletonJoint {
  std::string name;
  int parent = -1;          // -1 for the root
  Point2 offset;            // rest offset from parent, normalized units
  double angle_min = 0.0;   // joint angle limits, radians
  double angle_max = 0.0;
  double thickness = 0.04;  // drawn limb thickness, normalized units
};

// Articulated 2D puppet: a tree of joints rooted at the pelvis.
struct Skeleton {
  std::string name;
  std::vector<SkeletonJoint> joints;

  int size() const { return static_cast<int>(joints.size()); }
  // (parent, child) pairs for every non-root joint.
  std::vector<std::pair<int, int>> edges() const;
  void validate() const;

  // World positions from per-joint angles (radians): each joint rotates its
  // subtree around its own origin; the root angle is the global orientation.
  KeypointSet forward_kinematics(const std::vector<double>& angles,
                                 const Point2& root_pos, double scale) const;

  static Skeleton humanoid();   // 16 joints
  static Skeleton quadruped();  // 10 joints
  static Skeleton by_name(const std::string& name);
};

struct VideoClip {
  std::vector<ImageU8> frames;
  std::vector<KeypointSet> gt_keypoints;  // exact joint positions per frame
  uint64_t background_id = 0;
  double limb_scale = 1.0;
  double global_scale = 1.0;
  ImageU8 background;  // shared by all frames
};

struct ClipConfig {
  int length = 100;
  int resolution = 128;
  double motion_step = 0.12;  // angle random-walk step, radians
};

// Deterministic per seed: smooth bounded joint-angle walk, forward
// kinematics, anti-aliased capsule rendering over a procedural static
// background.
VideoClip generate_clip(const Skeleton& skeleton, uint64_t seed, const ClipConfig& cfg);

struct Dataset {
  Skeleton skeleton;
  int resolution = 0;
  std::vector<VideoClip> clips;
  std::vector<uint64_t> clip_seeds;
};

// Layout: root/clip_####/frame_#####.png + keypoints.json + root/manifest.json.
void write_dataset(const Dataset& ds, const std::string& root_path);
Dataset read_dataset(const std::string& root_path);

// Convenience: n clips with seeds derived from one root seed.
Dataset generate_dataset(const Skeleton& skeleton, uint64_t root_seed, int n_clips,
                         const ClipConfig& cfg);

}  // namespace ppl
