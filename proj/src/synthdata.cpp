#include "ppl/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ppl/draw.hpp"
#include "ppl/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ppl {

std::vector<std::pair<int, int>> Skeleton::edges() const {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < size(); ++i)
    if (joints[static_cast<size_t>(i)].parent >= 0)
      e.emplace_back(joints[static_cast<size_t>(i)].parent, i);
  return e;
}

void Skeleton::validate() const {
  if (joints.empty()) throw std::invalid_argument("Skeleton: empty");
  if (joints[0].parent != -1) throw std::invalid_argument("Skeleton: joint 0 must be root");
  for (int i = 1; i < size(); ++i) {
    const auto& j = joints[static_cast<size_t>(i)];
    if (j.parent < 0 || j.parent >= i)
      throw std::invalid_argument("Skeleton: parents must precede children");
    if (j.offset.x == 0.0 && j.offset.y == 0.0)
      throw std::invalid_argument("Skeleton: non-root joint with zero offset");
  }
}

KeypointSet Skeleton::forward_kinematics(const std::vector<double>& angles,
                                         const Point2& root_pos, double scale) const {
  if (angles.size() != static_cast<size_t>(size()))
    throw std::invalid_argument("forward_kinematics: angle count mismatch");
  KeypointSet out(size());
  std::vector<double> world_angle(static_cast<size_t>(size()), 0.0);
  out[0] = root_pos;
  world_angle[0] = angles[0];
  for (int i = 1; i < size(); ++i) {
    const auto& j = joints[static_cast<size_t>(i)];
    const double wa = world_angle[static_cast<size_t>(j.parent)] + angles[static_cast<size_t>(i)];
    world_angle[static_cast<size_t>(i)] = wa;
    const double ca = std::cos(wa), sa = std::sin(wa);
    out[i].x = out[j.parent].x + scale * (ca * j.offset.x - sa * j.offset.y);
    out[i].y = out[j.parent].y + scale * (sa * j.offset.x + ca * j.offset.y);
  }
  return out;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

SkeletonJoint joint(std::string name, int parent, double ox, double oy,
                    double amin_deg, double amax_deg, double thickness) {
  SkeletonJoint j;
  j.name = std::move(name);
  j.parent = parent;
  j.offset = {ox, oy};
  j.angle_min = amin_deg * kPi / 180.0;
  j.angle_max = amax_deg * kPi / 180.0;
  j.thickness = thickness;
  return j;
}

}  // namespace

Skeleton Skeleton::humanoid() {
  // y grows downward (image convention); the rest pose is an upright figure.
  Skeleton s;
  s.name = "humanoid";
  auto& j = s.joints;
  j.push_back(joint("pelvis", -1, 0, 0, -15, 15, 0.05));        // 0
  j.push_back(joint("torso", 0, 0.0, -0.28, -20, 20, 0.055));   // 1
  j.push_back(joint("neck", 1, 0.0, -0.14, -15, 15, 0.04));     // 2
  j.push_back(joint("head", 2, 0.0, -0.12, -20, 20, 0.045));    // 3
  j.push_back(joint("l_shoulder", 1, 0.11, 0.02, -40, 40, 0.035));   // 4
  j.push_back(joint("l_elbow", 4, 0.16, 0.02, -70, 50, 0.03));       // 5
  j.push_back(joint("l_wrist", 5, 0.15, 0.02, -60, 60, 0.025));      // 6
  j.push_back(joint("r_shoulder", 1, -0.11, 0.02, -40, 40, 0.035));  // 7
  j.push_back(joint("r_elbow", 7, -0.16, 0.02, -50, 70, 0.03));      // 8
  j.push_back(joint("r_wrist", 8, -0.15, 0.02, -60, 60, 0.025));     // 9
  j.push_back(joint("l_hip", 0, 0.08, 0.04, -30, 30, 0.04));         // 10
  j.push_back(joint("l_knee", 10, 0.02, 0.2, -20, 70, 0.035));       // 11
  j.push_back(joint("l_ankle", 11, 0.0, 0.19, -50, 20, 0.03));       // 12
  j.push_back(joint("r_hip", 0, -0.08, 0.04, -30, 30, 0.04));        // 13
  j.push_back(joint("r_knee", 13, -0.02, 0.2, -70, 20, 0.035));      // 14
  j.push_back(joint("r_ankle", 14, 0.0, 0.19, -20, 50, 0.03));       // 15
  s.validate();
  return s;
}

Skeleton Skeleton::quadruped() {
  Skeleton s;
  s.name = "quadruped";
  auto& j = s.joints;
  j.push_back(joint("pelvis", -1, 0, 0, -10, 10, 0.055));          // 0
  j.push_back(joint("chest", 0, 0.34, -0.03, -15, 15, 0.06));      // 1
  j.push_back(joint("head", 1, 0.18, -0.12, -40, 40, 0.05));       // 2
  j.push_back(joint("tail", 0, -0.18, -0.08, -40, 40, 0.025));     // 3
  j.push_back(joint("f_knee_l", 1, 0.03, 0.16, -45, 45, 0.03));    // 4
  j.push_back(joint("f_paw_l", 4, 0.0, 0.15, -45, 20, 0.025));     // 5
  j.push_back(joint("f_knee_r", 1, -0.03, 0.16, -45, 45, 0.03));   // 6
  j.push_back(joint("f_paw_r", 6, 0.0, 0.15, -45, 20, 0.025));     // 7
  j.push_back(joint("b_paw_l", 0, 0.03, 0.3, -40, 40, 0.03));      // 8
  j.push_back(joint("b_paw_r", 0, -0.03, 0.3, -40, 40, 0.03));     // 9
  s.validate();
  return s;
}

Skeleton Skeleton::by_name(const std::string& name) {
  if (name == "humanoid") return humanoid();
  if (name == "quadruped") return quadruped();
  throw std::invalid_argument("Skeleton::by_name: unknown skeleton '" + name + "'");
}

namespace {

// Two-octave value noise, bilinear interpolation; muted palette so the
// puppet stays high-contrast.
ImageU8 make_background(int resolution, RngStream& rng) {
  auto grid_noise = [&](int grid) {
    std::vector<double> g(static_cast<size_t>(grid) * grid * 3);
    for (auto& v : g) v = rng.next_uniform();
    return g;
  };
  const int g1 = 6, g2 = 14;
  const auto n1 = grid_noise(g1);
  const auto n2 = grid_noise(g2);
  auto sample = [](const std::vector<double>& g, int grid, double fx, double fy, int c) {
    const double x = fx * (grid - 1), y = fy * (grid - 1);
    const int x0 = std::min(static_cast<int>(x), grid - 2);
    const int y0 = std::min(static_cast<int>(y), grid - 2);
    const double ax = x - x0, ay = y - y0;
    auto at = [&](int yy, int xx) { return g[(static_cast<size_t>(yy) * grid + xx) * 3 + c]; };
    return (1 - ax) * (1 - ay) * at(y0, x0) + ax * (1 - ay) * at(y0, x0 + 1) +
           (1 - ax) * ay * at(y0 + 1, x0) + ax * ay * at(y0 + 1, x0 + 1);
  };
  ImageU8 bg(resolution, resolution);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      const double fy = static_cast<double>(r) / (resolution - 1);
      const double fx = static_cast<double>(c) / (resolution - 1);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = 0.7 * sample(n1, g1, fx, fy, ch) + 0.3 * sample(n2, g2, fx, fy, ch);
        const double shade = 0.06 + 0.22 * v;
        bg.px(r, c)[ch] = static_cast<uint8_t>(std::lround(shade * 255.0));
      }
    }
  }
  return bg;
}

// Bright limb palette, cycled per edge.
const draw::Rgb kPalette[] = {
    {0.95, 0.75, 0.20}, {0.30, 0.85, 0.90}, {0.90, 0.35, 0.45}, {0.45, 0.90, 0.40},
    {0.85, 0.55, 0.90}, {0.95, 0.60, 0.25}, {0.40, 0.60, 0.95}, {0.90, 0.85, 0.40},
};

}  // namespace

VideoClip generate_clip(const Skeleton& skeleton, uint64_t seed, const ClipConfig& cfg) {
  if (cfg.length < 2) throw std::invalid_argument("generate_clip: length must be >= 2");
  skeleton.validate();
  RngStream bg_rng = named_stream(seed, "background");
  RngStream actor_rng = named_stream(seed, "actor");
  RngStream motion_rng = named_stream(seed, "motion");

  VideoClip clip;
  clip.background_id = seed;
  clip.background = make_background(cfg.resolution, bg_rng);
  clip.limb_scale = 0.9 + 0.2 * actor_rng.next_uniform();
  clip.global_scale = (0.9 + 0.2 * actor_rng.next_uniform()) * clip.limb_scale;

  const int J = skeleton.size();
  std::vector<double> angles(static_cast<size_t>(J), 0.0);
  std::vector<double> velocity(static_cast<size_t>(J), 0.0);
  // Start at a random pose inside the limits.
  for (int i = 0; i < J; ++i) {
    const auto& jt = skeleton.joints[static_cast<size_t>(i)];
    angles[static_cast<size_t>(i)] =
        jt.angle_min + (jt.angle_max - jt.angle_min) * motion_rng.next_uniform();
  }
  // Global placement is an actor parameter: constant within the clip, only
  // the joint angles animate.
  Point2 root{-0.25 + 0.5 * actor_rng.next_uniform(),
              -0.02 + 0.22 * actor_rng.next_uniform()};

  const auto edges = skeleton.edges();
  for (int f = 0; f < cfg.length; ++f) {
    KeypointSet gt = skeleton.forward_kinematics(angles, root, clip.global_scale);
    // Keep every joint comfortably inside the frame: pull the root back by
    // any overshoot past |0.9|.
    double shift_x = 0.0, shift_y = 0.0;
    for (const auto& p : gt.points) {
      if (p.x > 0.9) shift_x = std::min(shift_x, 0.9 - p.x);
      if (p.x < -0.9) shift_x = std::max(shift_x, -0.9 - p.x);
      if (p.y > 0.9) shift_y = std::min(shift_y, 0.9 - p.y);
      if (p.y < -0.9) shift_y = std::max(shift_y, -0.9 - p.y);
    }
    if (shift_x != 0.0 || shift_y != 0.0) {
      root.x += shift_x;
      root.y += shift_y;
      gt = skeleton.forward_kinematics(angles, root, clip.global_scale);
    }

    ImageU8 frame = clip.background;
    for (size_t e = 0; e < edges.size(); ++e) {
      const auto [pi, ci] = edges[e];
      const auto& jt = skeleton.joints[static_cast<size_t>(ci)];
      draw::capsule(frame, gt[pi], gt[ci], jt.thickness * clip.limb_scale,
                   kPalette[e % std::size(kPalette)]);
    }
    // Head marker: disc at the last chain joint named "head" if present.
    for (int i = 0; i < J; ++i) {
      if (skeleton.joints[static_cast<size_t>(i)].name == "head")
        draw::disc(frame, gt[i], 0.07 * clip.global_scale, {0.95, 0.85, 0.55});
    }
    clip.frames.push_back(std::move(frame));
    clip.gt_keypoints.push_back(std::move(gt));

    // Smooth bounded random walk for the next frame.
    for (int i = 0; i < J; ++i) {
      const auto& jt = skeleton.joints[static_cast<size_t>(i)];
      velocity[static_cast<size_t>(i)] = 0.75 * velocity[static_cast<size_t>(i)] +
                                         cfg.motion_step * motion_rng.next_gaussian();
      double a = angles[static_cast<size_t>(i)] + velocity[static_cast<size_t>(i)];
      if (a < jt.angle_min || a > jt.angle_max) {
        a = std::clamp(a, jt.angle_min, jt.angle_max);
        velocity[static_cast<size_t>(i)] = 0.0;
      }
      angles[static_cast<size_t>(i)] = a;
    }
  }
  return clip;
}

Dataset generate_dataset(const Skeleton& skeleton, uint64_t root_seed, int n_clips,
                         const ClipConfig& cfg) {
  Dataset ds;
  ds.skeleton = skeleton;
  ds.resolution = cfg.resolution;
  RngStream seeder = named_stream(root_seed, "data");
  for (int i = 0; i < n_clips; ++i) {
    const uint64_t s = seeder.next_u64();
    ds.clip_seeds.push_back(s);
    ds.clips.push_back(generate_clip(skeleton, s, cfg));
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& root_path) {
  fs::create_directories(root_path);
  json manifest;
  manifest["format_version"] = 1;
  manifest["resolution"] = ds.resolution;
  manifest["skeleton"]["name"] = ds.skeleton.name;
  json names = json::array(), parents = json::array(), edges = json::array();
  for (const auto& j : ds.skeleton.joints) {
    names.push_back(j.name);
    parents.push_back(j.parent);
  }
  for (const auto& [p, c] : ds.skeleton.edges()) edges.push_back({p, c});
  manifest["skeleton"]["joint_names"] = names;
  manifest["skeleton"]["parents"] = parents;
  manifest["skeleton"]["edges"] = edges;
  manifest["clips"] = ds.clips.size();
  manifest["seeds"] = ds.clip_seeds;
  json frames_per_clip = json::array();
  for (const auto& c : ds.clips) frames_per_clip.push_back(c.frames.size());
  manifest["frames_per_clip"] = frames_per_clip;

  char buf[32];
  for (size_t ci = 0; ci < ds.clips.size(); ++ci) {
    std::snprintf(buf, sizeof(buf), "clip_%04zu", ci);
    const fs::path clip_dir = fs::path(root_path) / buf;
    fs::create_directories(clip_dir);
    const auto& clip = ds.clips[ci];
    for (size_t fi = 0; fi < clip.frames.size(); ++fi) {
      std::snprintf(buf, sizeof(buf), "frame_%05zu.png", fi);
      write_png((clip_dir / buf).string(), clip.frames[fi]);
    }
    json ann;
    ann["background_id"] = clip.background_id;
    ann["limb_scale"] = clip.limb_scale;
    ann["global_scale"] = clip.global_scale;
    json kp_frames = json::array();
    for (const auto& ks : clip.gt_keypoints) {
      json pts = json::array();
      for (const auto& p : ks.points) pts.push_back({p.x, p.y});
      kp_frames.push_back(std::move(pts));
    }
    ann["keypoints"] = std::move(kp_frames);
    std::ofstream out(clip_dir / "keypoints.json");
    out << ann.dump(0) << "\n";
  }
  std::ofstream mout(fs::path(root_path) / "manifest.json");
  mout << manifest.dump(2) << "\n";
}

Dataset read_dataset(const std::string& root_path) {
  const fs::path root(root_path);
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream min(manifest_path);
  if (!min) throw std::runtime_error("read_dataset: missing manifest " + manifest_path.string());
  json manifest = json::parse(min);

  Dataset ds;
  ds.resolution = manifest.at("resolution").get<int>();
  ds.skeleton = Skeleton::by_name(manifest.at("skeleton").at("name").get<std::string>());
  ds.clip_seeds = manifest.at("seeds").get<std::vector<uint64_t>>();
  const size_t n_clips = manifest.at("clips").get<size_t>();

  char buf[32];
  for (size_t ci = 0; ci < n_clips; ++ci) {
    std::snprintf(buf, sizeof(buf), "clip_%04zu", ci);
    const fs::path clip_dir = root / buf;
    const fs::path ann_path = clip_dir / "keypoints.json";
    std::ifstream ain(ann_path);
    if (!ain)
      throw std::runtime_error("read_dataset: missing annotation file for " +
                               std::string(buf) + " (" + ann_path.string() + ")");
    json ann = json::parse(ain);
    VideoClip clip;
    clip.background_id = ann.at("background_id").get<uint64_t>();
    clip.limb_scale = ann.at("limb_scale").get<double>();
    clip.global_scale = ann.at("global_scale").get<double>();
    const auto& kp_frames = ann.at("keypoints");
    for (size_t fi = 0; fi < kp_frames.size(); ++fi) {
      std::snprintf(buf, sizeof(buf), "frame_%05zu.png", fi);
      const fs::path fpath = clip_dir / buf;
      if (!fs::exists(fpath))
        throw std::runtime_error("read_dataset: missing frame file " + fpath.string());
      clip.frames.push_back(read_png(fpath.string()));
      KeypointSet ks;
      for (const auto& p : kp_frames[fi])
        ks.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      clip.gt_keypoints.push_back(std::move(ks));
    }
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

}  // namespace ppl
