#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hcner/config.hpp"
#include "hcner/model.hpp"

namespace hcner {

// Container layout (all integers little-endian):
//   magic "HCNERCKP" | u32 version | u32 section count
//   per section: u32 name length | name | u64 payload size | u32 CRC-32 of payload | payload
// Sections, in order: meta, config, vocabs, params, memory, context.
// Float arrays are row-major little-endian float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  enum class Code { Io, BadMagic, Version, Corrupt };
  CheckpointError(Code code, const std::string& what) : DataError(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

struct Checkpoint {
  TrainConfig config;
  ModelVocabs vocabs;
  ParamRegistry<float> params;
  MemoryStore<float> memory;
  // Surface forms of the training sentences in slot order, for memory inspection.
  std::vector<std::vector<std::string>> context;
  std::map<std::string, std::string> meta;
};

Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& config,
                           std::vector<std::vector<std::string>> context = {},
                           std::map<std::string, std::string> meta = {});

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the model with the stored parameters and memory.
Model<float> restore_model(const Checkpoint& ckpt);

}  // namespace hcner
