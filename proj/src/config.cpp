#include "hcner/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace hcner {

void ModelConfig::validate() const {
  intnet.validate();
  if (word_dim <= 0) throw ConfigError("word_dim must be positive");
  if (hidden_main <= 0 || hidden_main % 2) throw ConfigError("hidden_main must be positive and even");
  if (sentence != SentenceMode::Off && (hidden_sent <= 0 || hidden_sent % 2))
    throw ConfigError("hidden_sent must be positive and even");
  if (attn_kernel < 1 || attn_kernel % 2 == 0) throw ConfigError("attn_kernel must be odd");
  if (label_samples < 1) throw ConfigError("label_samples must be at least 1");
  check_lambda(lambda);
  if (max_memory < 0) throw ConfigError("max_memory must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

std::string_view to_string(LrSchedule s) { return s == LrSchedule::Multiplicative ? "multiplicative" : "inverse"; }

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "multiplicative") return LrSchedule::Multiplicative;
  if (name == "inverse") return LrSchedule::Inverse;
  throw ConfigError("unknown lr schedule '" + std::string(name) + "' (multiplicative|inverse)");
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(lr_decay >= 0.0 && lr_decay < 1.0)) throw ConfigError("lr_decay must be in [0, 1)");
  if (min_freq < 1) throw ConfigError("min_freq must be at least 1");
}

double learning_rate(const TrainConfig& c, int epoch) {
  if (c.schedule == LrSchedule::Multiplicative) return c.lr0 * std::pow(1.0 - c.lr_decay, epoch);
  return c.lr0 / (1.0 + c.lr_decay * epoch);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ConfigError("bad value '" + std::string(text) + "' for " + std::string(key));
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ConfigError("bad boolean '" + std::string(text) + "' for " + std::string(key));
}

std::string format_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> parse_ints(std::string_view key, std::string_view text) {
  std::vector<int> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<int>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view, std::string_view)> set;
};

#define INT_FIELD(name, member)                                                               \
  Field {                                                                                     \
    name, [](const TrainConfig& c) { return std::to_string(c.member); },                      \
        [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = parse_number<int>(k, v); } \
  }
#define DOUBLE_FIELD(name, member)                                                            \
  Field {                                                                                     \
    name, [](const TrainConfig& c) { return format_double(c.member); },                       \
        [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = parse_number<double>(k, v); } \
  }
#define BOOL_FIELD(name, member)                                                              \
  Field {                                                                                     \
    name, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); },      \
        [](TrainConfig& c, std::string_view k, std::string_view v) { c.member = parse_bool(k, v); } \
  }
#define STRING_FIELD(name, member)                                                            \
  Field {                                                                                     \
    name, [](const TrainConfig& c) { return c.member; },                                      \
        [](TrainConfig& c, std::string_view, std::string_view v) { c.member = std::string(v); } \
  }
#define ENUM_FIELD(name, member, parser)                                                      \
  Field {                                                                                     \
    name, [](const TrainConfig& c) { return std::string(to_string(c.member)); },              \
        [](TrainConfig& c, std::string_view, std::string_view v) { c.member = parser(v); }    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      INT_FIELD("word_dim", model.word_dim),
      INT_FIELD("char_dim", model.intnet.char_dim),
      INT_FIELD("init_filters", model.intnet.init_filters),
      INT_FIELD("block_filters", model.intnet.block_filters),
      Field{"kernel_sizes", [](const TrainConfig& c) { return format_ints(c.model.intnet.kernel_sizes); },
            [](TrainConfig& c, std::string_view k, std::string_view v) {
              c.model.intnet.kernel_sizes = parse_ints(k, v);
            }},
      INT_FIELD("layers", model.intnet.layers),
      INT_FIELD("hidden_main", model.hidden_main),
      INT_FIELD("hidden_sent", model.hidden_sent),
      ENUM_FIELD("sentence", model.sentence, parse_sentence_mode),
      INT_FIELD("attn_kernel", model.attn_kernel),
      ENUM_FIELD("label_input", model.label_input, parse_label_input),
      BOOL_FIELD("aux_label_loss", model.aux_label_loss),
      INT_FIELD("label_samples", model.label_samples),
      BOOL_FIELD("document", model.document),
      ENUM_FIELD("compat", model.compat, parse_compatibility),
      DOUBLE_FIELD("lambda", model.lambda),
      INT_FIELD("max_memory", model.max_memory),
      BOOL_FIELD("exclude_self", model.exclude_self),
      DOUBLE_FIELD("dropout", model.dropout),
      BOOL_FIELD("lowercase", model.norm.lowercase),
      BOOL_FIELD("zero_digits", model.norm.zero_digits),
      ENUM_FIELD("scheme", model.scheme, parse_scheme),
      INT_FIELD("epochs", epochs),
      INT_FIELD("batch_size", batch_size),
      DOUBLE_FIELD("lr0", lr0),
      DOUBLE_FIELD("lr_decay", lr_decay),
      ENUM_FIELD("lr_schedule", schedule, parse_lr_schedule),
      DOUBLE_FIELD("clip_norm", clip_norm),
      Field{"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
            [](TrainConfig& c, std::string_view k, std::string_view v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      INT_FIELD("min_freq", min_freq),
      STRING_FIELD("train", train_path),
      STRING_FIELD("dev", dev_path),
      STRING_FIELD("test", test_path),
      STRING_FIELD("embeddings", embeddings_path),
  };
  return table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void apply_setting(TrainConfig& config, std::string_view key, std::string_view value) {
  for (const auto& f : fields())
    if (key == f.key) {
      try {
        f.set(config, key, value);
      } catch (const DataError& e) {
        // Enum parsers shared with the data layer report DataError.
        throw ConfigError(e.what());
      }
      return;
    }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string to_kv(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(config) + "\n";
  return out;
}

TrainConfig parse_kv(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    apply_setting(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

TrainConfig parse_kv(std::string_view text, TrainConfig base) {
  std::istringstream in{std::string(text)};
  return parse_kv(in, std::move(base));
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_kv(in, std::move(base));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

}  // namespace hcner
