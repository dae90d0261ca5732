#include "ppl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace ppl {

namespace {

constexpr char kMagic[8] = {'P', 'P', 'L', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

struct EntryRef {
  std::string name;
  const Tensor* tensor;
};

std::vector<EntryRef> collect_entries(const PPLModel& model) {
  std::vector<EntryRef> entries;
  for (const auto& p : model.params().all()) {
    entries.push_back({p->name, &p->value});
    entries.push_back({"adam_m/" + p->name, &p->adam_m});
    entries.push_back({"adam_v/" + p->name, &p->adam_v});
  }
  const auto& mem = model.memory();
  entries.push_back({"memory/banks", &mem.banks});
  entries.push_back({"memory/ema_counts", &mem.ema_counts});
  entries.push_back({"memory/ema_sums", &mem.ema_sums});
  return entries;
}

}  // namespace

void save_checkpoint(const std::string& path, const PPLModel& model,
                     const CheckpointMeta& meta) {
  const auto entries = collect_entries(model);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["step"] = meta.step;
  manifest["epoch"] = meta.epoch;
  manifest["config_echo"] = json::parse(meta.config_echo);
  json jentries = json::array();
  int64_t offset = 0;
  for (const auto& e : entries) {
    json je;
    je["name"] = e.name;
    je["shape"] = e.tensor->shape;
    je["offset"] = offset;
    je["count"] = e.tensor->numel();
    jentries.push_back(std::move(je));
    offset += e.tensor->numel();
  }
  manifest["entries"] = std::move(jentries);

  const std::string header = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& e : entries)
    out.write(reinterpret_cast<const char*>(e.tensor->data()),
              static_cast<std::streamsize>(e.tensor->numel() * sizeof(Real)));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

namespace {

json read_manifest(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
  json manifest = json::parse(header);
  if (manifest.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version in " + path);
  return manifest;
}

}  // namespace

CheckpointMeta load_checkpoint(const std::string& path, PPLModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json manifest = read_manifest(in, path);

  // Index mutable tensors by name.
  std::vector<std::pair<std::string, Tensor*>> slots;
  for (const auto& p : model.params().all()) {
    slots.emplace_back(p->name, &p->value);
    slots.emplace_back("adam_m/" + p->name, &p->adam_m);
    slots.emplace_back("adam_v/" + p->name, &p->adam_v);
  }
  auto& mem = model.memory();
  slots.emplace_back("memory/banks", &mem.banks);
  slots.emplace_back("memory/ema_counts", &mem.ema_counts);
  slots.emplace_back("memory/ema_sums", &mem.ema_sums);

  const std::streampos payload_start = in.tellg();
  size_t loaded = 0;
  for (const auto& je : manifest.at("entries")) {
    const std::string name = je.at("name").get<std::string>();
    Tensor* dst = nullptr;
    for (auto& [n, t] : slots)
      if (n == name) {
        dst = t;
        break;
      }
    if (!dst)
      throw std::runtime_error("load_checkpoint: unknown entry '" + name + "' in " + path);
    const auto shape = je.at("shape").get<std::vector<int>>();
    if (shape != dst->shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + name +
                               "' (model/config mismatch)");
    const int64_t offset = je.at("offset").get<int64_t>();
    in.seekg(payload_start + static_cast<std::streamoff>(offset * static_cast<int64_t>(sizeof(Real))));
    in.read(reinterpret_cast<char*>(dst->data()),
            static_cast<std::streamsize>(dst->numel() * sizeof(Real)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload in " + path);
    ++loaded;
  }
  if (loaded != slots.size())
    throw std::runtime_error("load_checkpoint: missing entries in " + path);

  CheckpointMeta meta;
  meta.step = manifest.at("step").get<int64_t>();
  meta.epoch = manifest.at("epoch").get<int>();
  meta.config_echo = manifest.at("config_echo").dump();
  return meta;
}

std::string read_checkpoint_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_checkpoint_config: cannot open " + path);
  json manifest = read_manifest(in, path);
  return manifest.at("config_echo").dump();
}

}  // namespace ppl
