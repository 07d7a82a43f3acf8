// SPDX-License-Identifier: Apache-2.0
#include "vstlm/cli/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "vstlm/numerics/error.hpp"
#include "vstlm/training/checkpoint.hpp"

namespace vstlm::cli {
namespace {

using train::PipelineConfig;

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': '" + value + "' is not " + want);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || end != value.data() + value.size()) bad_value(key, value, "a valid number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  bad_value(key, value, "a boolean (0, 1, true, false)");
}

std::string to_text(std::uint64_t v) { return std::to_string(v); }
std::string to_text(std::int64_t v) { return std::to_string(v); }
std::string to_text(double v) { return train::format_double(v); }
std::string to_text(bool v) { return v ? "1" : "0"; }
std::string to_text(const std::string& v) { return v; }

template <class T>
T parse_as(const std::string& key, const std::string& value) {
  if constexpr (std::is_same_v<T, bool>) {
    return parse_bool(key, value);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return value;
  } else {
    return parse_number<T>(key, value);
  }
}

// Builds a key bound to a member reached through `access`.
template <class T, class Access>
Key bind(std::string name, Access access) {
  return Key{name,
             [name, access](PipelineConfig& c, const std::string& v) { access(c) = parse_as<T>(name, v); },
             [access](const PipelineConfig& c) { return to_text(access(const_cast<PipelineConfig&>(c))); }};
}

#define VSTLM_KEY(type, key, expr) bind<type>(key, [](PipelineConfig& c) -> type& { return c.expr; })

void add_train_keys(std::vector<Key>& keys, const std::string& prefix, train::TrainConfig PipelineConfig::*member) {
  auto acc = [member](auto pick) { return [member, pick](PipelineConfig& c) -> auto& { return pick(c.*member); }; };
  keys.push_back(bind<std::int64_t>(prefix + ".iterations", acc([](train::TrainConfig& t) -> auto& { return t.iterations; })));
  keys.push_back(bind<double>(prefix + ".lr", acc([](train::TrainConfig& t) -> auto& { return t.lr; })));
  keys.push_back(bind<double>(prefix + ".lr_min", acc([](train::TrainConfig& t) -> auto& { return t.lr_min; })));
  keys.push_back(bind<std::size_t>(prefix + ".batch_size", acc([](train::TrainConfig& t) -> auto& { return t.batch_size; })));
  keys.push_back(bind<std::size_t>(prefix + ".micro_batch_size",
                                   acc([](train::TrainConfig& t) -> auto& { return t.micro_batch_size; })));
  keys.push_back(bind<double>(prefix + ".beta1", acc([](train::TrainConfig& t) -> auto& { return t.adam.beta1; })));
  keys.push_back(bind<double>(prefix + ".beta2", acc([](train::TrainConfig& t) -> auto& { return t.adam.beta2; })));
  keys.push_back(bind<double>(prefix + ".eps", acc([](train::TrainConfig& t) -> auto& { return t.adam.eps; })));
  keys.push_back(bind<double>(prefix + ".weight_decay", acc([](train::TrainConfig& t) -> auto& { return t.adam.weight_decay; })));
  keys.push_back(bind<std::uint64_t>(prefix + ".seed", acc([](train::TrainConfig& t) -> auto& { return t.seed; })));
  keys.push_back(bind<std::int64_t>(prefix + ".log_every", acc([](train::TrainConfig& t) -> auto& { return t.log_every; })));
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(VSTLM_KEY(std::size_t, "data.classes", data.classes));
    k.push_back(VSTLM_KEY(std::size_t, "data.subjects", data.subjects));
    k.push_back(VSTLM_KEY(std::size_t, "data.views", data.views));
    k.push_back(VSTLM_KEY(std::size_t, "data.setups", data.setups));
    k.push_back(VSTLM_KEY(std::size_t, "data.phases", data.phases));
    k.push_back(VSTLM_KEY(std::size_t, "data.frames_min", data.frames_min));
    k.push_back(VSTLM_KEY(std::size_t, "data.frames_max", data.frames_max));
    k.push_back(VSTLM_KEY(std::size_t, "data.feature_dim", data.feature_dim));
    k.push_back(VSTLM_KEY(double, "data.noise", data.noise));
    k.push_back(VSTLM_KEY(std::size_t, "data.samples_per_class", data.samples_per_class));
    k.push_back(VSTLM_KEY(std::size_t, "data.segment_frames", data.segment_frames));
    k.push_back(VSTLM_KEY(double, "data.subject_scale", data.subject_scale));
    k.push_back(VSTLM_KEY(double, "data.view_scale", data.view_scale));
    k.push_back(VSTLM_KEY(std::uint64_t, "data.seed", data.seed));
    k.push_back(Key{"split.protocol",
                    [](PipelineConfig& c, const std::string& v) {
                      try {
                        c.split = data::parse_split_kind(v);
                      } catch (const Error&) {
                        bad_value("split.protocol", v, "one of x-sub, x-view, x-set");
                      }
                    },
                    [](const PipelineConfig& c) { return data::split_kind_name(c.split); }});
    k.push_back(VSTLM_KEY(std::size_t, "vst.embed_dim", vst.embed_dim));
    k.push_back(VSTLM_KEY(std::size_t, "vst.layers", vst.layers));
    k.push_back(VSTLM_KEY(std::size_t, "vst.heads", vst.heads));
    k.push_back(VSTLM_KEY(std::size_t, "vst.ffn_mult", vst.ffn_mult));
    k.push_back(VSTLM_KEY(std::size_t, "vst.max_positions", vst.max_positions));
    k.push_back(VSTLM_KEY(std::size_t, "vst.tokens_per_video", vst.tokens_per_video));
    k.push_back(VSTLM_KEY(std::size_t, "vst.codebook_size", vst.codebook_size));
    k.push_back(VSTLM_KEY(double, "vst.commitment", vst.commitment));
    k.push_back(VSTLM_KEY(double, "vst.smoothness", vst.smoothness));
    k.push_back(VSTLM_KEY(double, "vst.ema_decay", vst.ema_decay));
    k.push_back(VSTLM_KEY(std::int64_t, "vst.dead_code_steps", vst.dead_code_steps));
    k.push_back(VSTLM_KEY(bool, "vst.quantize", vst.quantize));
    add_train_keys(k, "vst_train", &PipelineConfig::vst_train);
    k.push_back(VSTLM_KEY(std::size_t, "lm.layers", lm.layers));
    k.push_back(VSTLM_KEY(std::size_t, "lm.heads", lm.heads));
    k.push_back(VSTLM_KEY(std::size_t, "lm.context", lm.context));
    k.push_back(VSTLM_KEY(std::size_t, "lm.ffn_mult", lm.ffn_mult));
    k.push_back(VSTLM_KEY(double, "lm.init_std", lm.init_std));
    k.push_back(VSTLM_KEY(std::size_t, "corpus.sentences", corpus.sentences));
    k.push_back(VSTLM_KEY(double, "corpus.template_fraction", corpus.template_fraction));
    k.push_back(VSTLM_KEY(double, "corpus.instruction_fraction", corpus.instruction_fraction));
    k.push_back(VSTLM_KEY(std::size_t, "corpus.salad_min", corpus.salad_min));
    k.push_back(VSTLM_KEY(std::size_t, "corpus.salad_max", corpus.salad_max));
    k.push_back(VSTLM_KEY(std::uint64_t, "corpus.seed", corpus.seed));
    k.push_back(VSTLM_KEY(std::size_t, "pretrain.steps", pretrain.steps));
    k.push_back(VSTLM_KEY(std::size_t, "pretrain.batch", pretrain.batch));
    k.push_back(VSTLM_KEY(double, "pretrain.lr", pretrain.lr));
    k.push_back(VSTLM_KEY(double, "pretrain.lr_min", pretrain.lr_min));
    k.push_back(VSTLM_KEY(std::uint64_t, "pretrain.seed", pretrain.seed));
    k.push_back(VSTLM_KEY(std::size_t, "pretrain.log_every", pretrain.log_every));
    k.push_back(VSTLM_KEY(std::size_t, "lora.rank", lora.rank));
    k.push_back(VSTLM_KEY(double, "lora.alpha", lora.alpha));
    k.push_back(VSTLM_KEY(double, "lora.dropout", lora.dropout));
    k.push_back(VSTLM_KEY(double, "lora.init_std", lora.init_std));
    k.push_back(Key{"lora.targets",
                    [](PipelineConfig& c, const std::string& v) {
                      c.lora.targets.clear();
                      std::stringstream in(v);
                      for (std::string item; std::getline(in, item, ',');) {
                        if (!item.empty()) c.lora.targets.push_back(item);
                      }
                    },
                    [](const PipelineConfig& c) {
                      std::string out;
                      for (const auto& t : c.lora.targets) out += (out.empty() ? "" : ",") + t;
                      return out;
                    }});
    add_train_keys(k, "lora_train", &PipelineConfig::lora_train);
    k.push_back(VSTLM_KEY(std::string, "instruction", instruction));
    return k;
  }();
  return keys;
}

#undef VSTLM_KEY

const Key* find_key(const std::string& name) {
  for (const auto& k : registry()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void set_all_seeds(PipelineConfig& c, std::uint64_t seed) {
  c.data.seed = seed;
  c.vst_train.seed = seed;
  c.corpus.seed = seed;
  c.pretrain.seed = seed;
  c.lora_train.seed = seed;
}

}  // namespace

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot read config file " + path.string());
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    try {
      set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    (void)parse_number<std::uint64_t>(key, value);
  } else {
    const Key* k = find_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "'");
    PipelineConfig probe;
    k->set(probe, value);  // validates the value now rather than at resolve time
  }
  values_[key] = value;
}

train::PipelineConfig RunConfig::resolve() const {
  PipelineConfig c;
  if (auto it = values_.find("seed"); it != values_.end()) {
    set_all_seeds(c, parse_number<std::uint64_t>("seed", it->second));
  } else if (const char* env = std::getenv("VSTLM_SEED"); env && *env) {
    set_all_seeds(c, parse_number<std::uint64_t>("VSTLM_SEED", env));
  }
  for (const auto& k : registry()) {
    if (auto it = values_.find(k.name); it != values_.end()) k.set(c, it->second);
  }
  c.resolve();
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

std::vector<std::pair<std::string, std::string>> config_entries(const train::PipelineConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : registry()) out.emplace_back(k.name, k.get(config));
  return out;
}

std::string format_config(const train::PipelineConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace vstlm::cli
