#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dvrnn/corpus.hpp"
#include "dvrnn/model.hpp"

namespace dvrnn {

// Model file layout (little-endian):
//   "DVRNNLM1"                      8 bytes, the last byte is the format version
//   M, D, V, C                      uint32 each
//   parameter blocks                float64, ParamSet::blocks() order
//   vocabulary length               uint64
//   vocabulary file text            UTF-8

struct ModelBundle {
  ModelParams params;
  Vocabulary vocab;
};

std::string serialize_model(const ModelParams& params, const Vocabulary& vocab);
ModelBundle deserialize_model(std::string_view bytes);

void save_model(const std::filesystem::path& path, const ModelParams& params,
                const Vocabulary& vocab);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace dvrnn
