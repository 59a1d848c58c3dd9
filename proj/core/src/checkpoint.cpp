#include "sviptr/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "sviptr/runconfig.hpp"

namespace sviptr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Entry {
  std::string name, kind;
  Var<float> var;
};

std::vector<Entry> sorted_entries(const ParamStore<float>& store) {
  std::map<std::string, Entry> merged;
  for (const auto& [name, p] : store.params) merged[name] = {name, "param", p};
  for (const auto& [name, b] : store.buffers) merged[name] = {name, "buffer", b};
  std::vector<Entry> out;
  out.reserve(merged.size());
  for (auto& [name, e] : merged) out.push_back(std::move(e));
  return out;
}

uint32_t crc32_of(const std::vector<char>& blob) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(blob.data()), static_cast<uInt>(blob.size())));
}

std::string data_file_for(const std::string& manifest_path) {
  fs::path p(manifest_path);
  p.replace_extension(".bin");
  return p.filename().string();
}

}  // namespace

void save_checkpoint(const std::string& manifest_path, const CheckpointMeta& meta,
                     const ParamStore<float>& store) {
  const auto entries = sorted_entries(store);
  std::vector<char> blob;
  json tensors = json::array();
  for (const auto& e : entries) {
    const int64_t bytes = e.var->value.numel() * static_cast<int64_t>(sizeof(float));
    json t;
    t["name"] = e.name;
    t["kind"] = e.kind;
    t["dtype"] = "f32";
    t["shape"] = e.var->value.shape();
    t["offset"] = blob.size();
    t["bytes"] = bytes;
    tensors.push_back(std::move(t));
    const char* src = reinterpret_cast<const char*>(e.var->value.data());
    blob.insert(blob.end(), src, src + bytes);
  }

  json manifest;
  manifest["format"] = "sviptr-checkpoint";
  manifest["version"] = 1;
  manifest["config"] =
      json::parse(model_config_to_json(meta.cfg, meta.seed, meta.input_height, meta.input_width));
  manifest["data_file"] = data_file_for(manifest_path);
  manifest["crc32"] = crc32_of(blob);
  manifest["tensors"] = std::move(tensors);

  const fs::path dir = fs::path(manifest_path).parent_path();
  const fs::path bin_path = dir / data_file_for(manifest_path);
  {
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + bin_path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + bin_path.string());
  }
  {
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + manifest_path);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("checkpoint: write failed for " + manifest_path);
  }
}

namespace {

json load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + manifest_path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint: " + manifest_path + ": " + e.what());
  }
  if (manifest.value("format", "") != "sviptr-checkpoint")
    throw std::runtime_error("checkpoint: " + manifest_path + " is not a checkpoint manifest");
  if (manifest.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported version in " + manifest_path);
  return manifest;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::string& manifest_path) {
  const json manifest = load_manifest(manifest_path);
  CheckpointMeta meta;
  model_config_from_json(manifest.at("config").dump(), &meta.cfg, &meta.seed, &meta.input_height,
                         &meta.input_width);
  return meta;
}

void load_checkpoint_into(const std::string& manifest_path, ParamStore<float>& store) {
  const json manifest = load_manifest(manifest_path);
  const fs::path bin_path =
      fs::path(manifest_path).parent_path() / manifest.at("data_file").get<std::string>();
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + bin_path.string());
  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const uint32_t crc = crc32_of(blob);
  if (crc != manifest.at("crc32").get<uint32_t>())
    throw std::runtime_error("checkpoint: CRC mismatch for " + bin_path.string() +
                             " (file corrupt or truncated)");

  const auto entries = sorted_entries(store);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != entries.size())
    throw std::runtime_error("checkpoint: tensor count mismatch (manifest " +
                             std::to_string(tensors.size()) + ", model " +
                             std::to_string(entries.size()) + ")");
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& t = tensors[i];
    const auto& e = entries[i];
    if (t.at("name").get<std::string>() != e.name)
      throw std::runtime_error("checkpoint: tensor name mismatch at index " + std::to_string(i) +
                               ": manifest '" + t.at("name").get<std::string>() + "' vs model '" +
                               e.name + "'");
    const Shape shape = t.at("shape").get<Shape>();
    if (shape != e.var->value.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + e.name + ": manifest " +
                               shape_str(shape) + " vs model " +
                               shape_str(e.var->value.shape()));
    if (t.at("dtype").get<std::string>() != "f32")
      throw std::runtime_error("checkpoint: unsupported dtype for " + e.name);
    const size_t offset = t.at("offset").get<size_t>();
    const size_t bytes = t.at("bytes").get<size_t>();
    if (offset + bytes > blob.size())
      throw std::runtime_error("checkpoint: entry " + e.name + " extends past end of blob");
    if (bytes != static_cast<size_t>(e.var->value.numel()) * sizeof(float))
      throw std::runtime_error("checkpoint: byte length mismatch for " + e.name);
    std::memcpy(e.var->value.data(), blob.data() + offset, bytes);
  }
}

Model<float> load_checkpoint_model(const std::string& manifest_path) {
  const CheckpointMeta meta = read_checkpoint_meta(manifest_path);
  Model<float> model =
      Model<float>::build(meta.cfg, meta.seed, meta.input_height, meta.input_width);
  load_checkpoint_into(manifest_path, model.store);
  return model;
}

}  // namespace sviptr
