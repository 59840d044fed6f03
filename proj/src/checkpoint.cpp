#include "hcner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace hcner {

namespace {

constexpr char kMagic[8] = {'H', 'C', 'N', 'E', 'R', 'C', 'K', 'P'};

class Writer {
 public:
  template <class T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void strings(const std::vector<std::string>& v) {
    pod(static_cast<std::uint64_t>(v.size()));
    for (const auto& s : v) str(s);
  }
  void bytes(const std::vector<std::uint8_t>& v) {
    pod(static_cast<std::uint64_t>(v.size()));
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size());
  }
  void matrix(const Matrix<float>& m) {
    pod(static_cast<std::uint32_t>(m.rows()));
    pod(static_cast<std::uint32_t>(m.cols()));
    buf_.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(float));
  }
  std::string& data() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<std::string> strings() {
    const auto n = pod<std::uint64_t>();
    std::vector<std::string> out;
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(str());
    return out;
  }
  std::vector<std::uint8_t> bytes() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  Matrix<float> matrix() {
    const auto rows = pod<std::uint32_t>();
    const auto cols = pod<std::uint32_t>();
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    need(n * sizeof(float));
    Matrix<float> m(rows, cols);
    std::memcpy(m.data(), data_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return m;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError(CheckpointError::Code::Corrupt, "checkpoint: truncated data");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

Vocab vocab_from(const std::vector<std::string>& words) {
  Vocab v;
  if (words.size() < 2 || words[0] != v.word(Vocab::kPad) || words[1] != v.word(Vocab::kUnk))
    throw CheckpointError(CheckpointError::Code::Corrupt, "checkpoint: vocabulary lacks special entries");
  for (std::size_t i = 2; i < words.size(); ++i) v.add(words[i]);
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& config,
                           std::vector<std::vector<std::string>> context, std::map<std::string, std::string> meta) {
  Checkpoint c;
  c.config = config;
  c.config.model = model.config();
  c.vocabs = model.vocabs();
  for (const auto& p : model.params()) c.params.add(p.name, p.value);
  c.memory = model.memory();
  c.context = std::move(context);
  c.meta = std::move(meta);
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, std::string>> sections;

  {
    Writer w;
    w.pod(static_cast<std::uint64_t>(ckpt.meta.size()));
    for (const auto& [k, v] : ckpt.meta) {
      w.str(k);
      w.str(v);
    }
    sections.emplace_back("meta", std::move(w.data()));
  }
  sections.emplace_back("config", to_kv(ckpt.config));
  {
    Writer w;
    const auto& v = ckpt.vocabs;
    w.strings(v.words.words());
    w.strings(v.chars.words());
    w.strings(v.memory_words.words());
    w.strings(v.tags.types());
    w.str(std::string(to_string(v.tags.scheme())));
    w.strings(v.label_names);
    w.bytes(v.in_train);
    w.bytes(v.pretrained);
    sections.emplace_back("vocabs", std::move(w.data()));
  }
  {
    Writer w;
    w.pod(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
      w.str(p.name);
      w.matrix(p.value);
    }
    sections.emplace_back("params", std::move(w.data()));
  }
  {
    Writer w;
    const auto& m = ckpt.memory;
    w.pod(static_cast<std::uint64_t>(m.slot_count()));
    for (int id : m.slot_words()) w.pod(static_cast<std::int32_t>(id));
    w.bytes(m.initialized_flags());
    w.matrix(m.keys());
    w.matrix(m.values());
    sections.emplace_back("memory", std::move(w.data()));
  }
  {
    Writer w;
    w.pod(static_cast<std::uint64_t>(ckpt.context.size()));
    for (const auto& s : ckpt.context) w.strings(s);
    sections.emplace_back("context", std::move(w.data()));
  }

  Writer out;
  out.data().append(kMagic, sizeof kMagic);
  out.pod(kCheckpointVersion);
  out.pod(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    out.str(name);
    out.pod(static_cast<std::uint64_t>(payload.size()));
    out.pod(crc(payload));
    out.data() += payload;
  }
  return std::move(out.data());
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  using Code = CheckpointError::Code;
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(Code::BadMagic, "not a checkpoint file (bad magic)");
  Reader r(std::string_view(bytes).substr(sizeof kMagic));
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(Code::Version, "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                             std::to_string(kCheckpointVersion) + ")");
  const auto count = r.pod<std::uint32_t>();
  std::map<std::string, std::string> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto size = r.pod<std::uint64_t>();
    const auto expected = r.pod<std::uint32_t>();
    std::string payload(r.raw(static_cast<std::size_t>(size)));
    if (crc(payload) != expected) throw CheckpointError(Code::Corrupt, "checkpoint section '" + name + "' fails its checksum");
    sections[name] = std::move(payload);
  }
  if (!r.done()) throw CheckpointError(Code::Corrupt, "checkpoint: trailing bytes");
  for (const char* required : {"meta", "config", "vocabs", "params", "memory", "context"})
    if (!sections.count(required))
      throw CheckpointError(Code::Corrupt, std::string("checkpoint: missing section '") + required + "'");

  Checkpoint c;
  {
    Reader m(sections["meta"]);
    const auto n = m.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string k = m.str();
      c.meta[k] = m.str();
    }
  }
  try {
    c.config = parse_kv(sections["config"]);
  } catch (const ConfigError& e) {
    throw CheckpointError(Code::Corrupt, std::string("checkpoint config: ") + e.what());
  }
  {
    Reader v(sections["vocabs"]);
    c.vocabs.words = vocab_from(v.strings());
    c.vocabs.chars = vocab_from(v.strings());
    c.vocabs.memory_words = vocab_from(v.strings());
    auto types = v.strings();
    const TagScheme scheme = parse_scheme(v.str());
    c.vocabs.tags = TagSet(std::move(types), scheme);
    c.vocabs.label_names = v.strings();
    c.vocabs.in_train = v.bytes();
    c.vocabs.pretrained = v.bytes();
  }
  {
    Reader p(sections["params"]);
    const auto n = p.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string name = p.str();
      c.params.add(std::move(name), p.matrix());
    }
  }
  {
    Reader m(sections["memory"]);
    const auto slots = m.pod<std::uint64_t>();
    std::vector<int> words;
    for (std::uint64_t i = 0; i < slots; ++i) words.push_back(m.pod<std::int32_t>());
    auto flags = m.bytes();
    auto keys = m.matrix();
    auto values = m.matrix();
    c.memory = MemoryStore<float>(std::move(words), keys.cols(), values.cols());
    c.memory.restore(std::move(keys), std::move(values), std::move(flags));
  }
  {
    Reader x(sections["context"]);
    const auto n = x.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) c.context.push_back(x.strings());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::Code::Io, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Code::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Code::Io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

Model<float> restore_model(const Checkpoint& ckpt) {
  Rng scratch(0);
  Model<float> model(ckpt.config.model, ckpt.vocabs, scratch);
  auto& params = model.params();
  if (params.size() != ckpt.params.size())
    throw CheckpointError(CheckpointError::Code::Corrupt, "checkpoint parameter set does not match its config");
  for (const auto& p : ckpt.params) {
    const auto id = params.find(p.name);
    if (!id || params.value(*id).rows() != p.value.rows() || params.value(*id).cols() != p.value.cols())
      throw CheckpointError(CheckpointError::Code::Corrupt, "checkpoint parameter '" + p.name + "' does not fit");
    params.value(*id) = p.value;
  }
  model.memory() = ckpt.memory;
  return model;
}

}  // namespace hcner
