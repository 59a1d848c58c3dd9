#include "sviptr/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace sviptr {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read_if(const json& obj, const char* key, T* out) {
  if (obj.contains(key)) *out = obj.at(key).get<T>();
}

std::array<int64_t, 4> read_arr4(const json& obj, const char* key) {
  const auto& a = obj.at(key);
  if (!a.is_array() || a.size() != 4)
    throw std::runtime_error(std::string("config: '") + key + "' must be an array of 4 integers");
  std::array<int64_t, 4> out{};
  for (size_t i = 0; i < 4; ++i) out[i] = a[i].get<int64_t>();
  return out;
}

}  // namespace

PeKind parse_pe_kind(const std::string& s) {
  if (s == "none") return PeKind::None;
  if (s == "ape") return PeKind::APE;
  if (s == "cpe") return PeKind::CPE;
  if (s == "lepe") return PeKind::LePE;
  throw std::runtime_error("config: unknown pe_kind '" + s +
                           "' (expected none, ape, cpe or lepe)");
}

RunConfig default_run_config() {
  RunConfig rc;
  rc.variant = "sviptr-v1-t";
  rc.model = registry_variant(rc.variant);
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("config: top level must be an object");
  reject_unknown_keys(doc,
                      {"variant", "channels", "depths", "heads", "permutation", "pe_kind",
                       "alphabet_path", "seed", "input_height", "input_width", "optimizer",
                       "train"},
                      path);

  RunConfig rc;
  if (doc.contains("variant")) {
    rc.variant = doc.at("variant").get<std::string>();
    rc.model = registry_variant(rc.variant);
  } else {
    rc.model = VariantConfig{};
  }
  if (doc.contains("channels")) rc.model.channels = read_arr4(doc, "channels");
  if (doc.contains("depths")) rc.model.depths = read_arr4(doc, "depths");
  if (doc.contains("heads")) rc.model.heads = read_arr4(doc, "heads");
  if (doc.contains("permutation"))
    rc.model.perm = parse_permutation(doc.at("permutation").get<std::string>());
  if (doc.contains("pe_kind")) rc.model.pe = parse_pe_kind(doc.at("pe_kind").get<std::string>());
  read_if(doc, "alphabet_path", &rc.alphabet_path);
  read_if(doc, "seed", &rc.seed);
  read_if(doc, "input_height", &rc.input_height);
  read_if(doc, "input_width", &rc.input_width);

  if (doc.contains("optimizer")) {
    const auto& o = doc.at("optimizer");
    reject_unknown_keys(o, {"lr", "beta1", "beta2", "eps", "weight_decay", "clip_norm"},
                        "optimizer");
    read_if(o, "lr", &rc.optim.lr);
    read_if(o, "beta1", &rc.optim.beta1);
    read_if(o, "beta2", &rc.optim.beta2);
    read_if(o, "eps", &rc.optim.eps);
    read_if(o, "weight_decay", &rc.optim.weight_decay);
    read_if(o, "clip_norm", &rc.optim.clip_norm);
  }
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    reject_unknown_keys(t,
                        {"epochs", "batch_size", "warmup_epochs", "train_samples", "eval_samples",
                         "max_label_len", "stop_accuracy", "data_seed", "metrics_path",
                         "checkpoint_path"},
                        "train");
    read_if(t, "epochs", &rc.train.epochs);
    read_if(t, "batch_size", &rc.train.batch_size);
    read_if(t, "warmup_epochs", &rc.train.warmup_epochs);
    read_if(t, "train_samples", &rc.train.train_samples);
    read_if(t, "eval_samples", &rc.train.eval_samples);
    read_if(t, "max_label_len", &rc.train.max_label_len);
    read_if(t, "stop_accuracy", &rc.train.stop_accuracy);
    read_if(t, "data_seed", &rc.train.data_seed);
    read_if(t, "metrics_path", &rc.train.metrics_path);
    read_if(t, "checkpoint_path", &rc.train.checkpoint_path);
  }
  rc.train.height = rc.input_height;
  rc.train.width = rc.input_width;

  if (const char* env = std::getenv("VIPTR_SEED")) {
    try {
      rc.seed = std::stoull(env);
    } catch (...) {
      throw std::runtime_error(std::string("config: VIPTR_SEED is not an integer: ") + env);
    }
  }
  return rc;
}

Alphabet resolve_alphabet(RunConfig& rc) {
  Alphabet a = rc.alphabet_path.empty() ? Alphabet::default_alphabet()
                                        : Alphabet::from_file(rc.alphabet_path);
  rc.model.num_classes = a.num_classes();
  rc.model.validate();
  return a;
}

std::string model_config_to_json(const VariantConfig& cfg, uint64_t seed, int64_t input_height,
                                 int64_t input_width) {
  json j;
  if (!cfg.name.empty()) j["variant"] = cfg.name;
  j["channels"] = cfg.channels;
  j["depths"] = cfg.depths;
  j["heads"] = cfg.heads;
  j["permutation"] = format_permutation(cfg.perm);
  j["pe_kind"] = pe_kind_name(cfg.pe);
  j["stripes"] = cfg.stripes;
  j["sr"] = cfg.sr;
  j["num_classes"] = cfg.num_classes;
  j["seed"] = seed;
  j["input_height"] = input_height;
  j["input_width"] = input_width;
  return j.dump(2);
}

void model_config_from_json(const std::string& text, VariantConfig* cfg, uint64_t* seed,
                            int64_t* input_height, int64_t* input_width) {
  json j = json::parse(text);
  VariantConfig c;
  if (j.contains("variant")) c.name = j.at("variant").get<std::string>();
  const auto ch = j.at("channels");
  const auto de = j.at("depths");
  const auto he = j.at("heads");
  for (size_t i = 0; i < 4; ++i) {
    c.channels[i] = ch[i].get<int64_t>();
    c.depths[i] = de[i].get<int64_t>();
    c.heads[i] = he[i].get<int64_t>();
  }
  c.perm = parse_permutation(j.at("permutation").get<std::string>());
  c.pe = parse_pe_kind(j.at("pe_kind").get<std::string>());
  const auto st = j.at("stripes");
  for (size_t i = 0; i < 4; ++i) c.stripes[i] = st[i].get<int>();
  c.sr = j.at("sr").get<int>();
  c.num_classes = j.at("num_classes").get<int64_t>();
  c.validate();
  *cfg = c;
  *seed = j.at("seed").get<uint64_t>();
  *input_height = j.at("input_height").get<int64_t>();
  *input_width = j.at("input_width").get<int64_t>();
}

}  // namespace sviptr
