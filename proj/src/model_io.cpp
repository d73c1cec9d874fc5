#include "dvrnn/model_io.hpp"

#include <bit>
#include <cstring>

#include "dvrnn/error.hpp"

namespace dvrnn {

namespace {

constexpr std::string_view kMagic = "DVRNNLM";
constexpr char kVersion = '1';
constexpr std::size_t kHeaderBytes = 8 + 4 * 4;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

// True when a vocabulary blob length at `offset` would end exactly at EOF.
bool blob_fits_at(std::string_view bytes, std::size_t offset) {
  if (offset + 8 > bytes.size()) return false;
  const auto len = get_le<std::uint64_t>(bytes, offset);
  return len == bytes.size() - offset - 8;
}

}  // namespace

std::string serialize_model(const ModelParams& params, const Vocabulary& vocab) {
  check_compatible(params, vocab);
  const auto& d = params.dims;
  std::string out;
  out.reserve(kHeaderBytes + 8 * params.parameter_count() + 64);
  out.append(kMagic);
  out.push_back(kVersion);
  put_le<std::uint32_t>(out, d.hidden);
  put_le<std::uint32_t>(out, d.doc);
  put_le<std::uint32_t>(out, d.vocab);
  put_le<std::uint32_t>(out, d.classes);
  for (const auto& block : params.blocks()) {
    for (double x : block.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
  const auto text = vocab.to_text();
  put_le<std::uint64_t>(out, text.size());
  out.append(text);
  return out;
}

ModelBundle deserialize_model(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 1 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::bad_magic, "bad magic: not a model file");
  }
  if (bytes[kMagic.size()] != kVersion) {
    throw Error(ErrorCode::unsupported_version,
                std::string("unsupported model format version '") + bytes[kMagic.size()] + "'");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::truncated, "truncated model header");

  Dims dims;
  dims.hidden = get_le<std::uint32_t>(bytes, 8);
  dims.doc = get_le<std::uint32_t>(bytes, 12);
  dims.vocab = get_le<std::uint32_t>(bytes, 16);
  dims.classes = get_le<std::uint32_t>(bytes, 20);

  const std::size_t payload = 8 * parameter_count(dims);
  const std::size_t blob_at = kHeaderBytes + payload;
  if (!blob_fits_at(bytes, blob_at)) {
    // An intact file laid out for other dimensions means the header is wrong;
    // otherwise bytes are missing.
    for (std::size_t off = kHeaderBytes; off + 8 <= bytes.size(); off += 8) {
      if (blob_fits_at(bytes, off)) {
        throw Error(ErrorCode::dimension_mismatch,
                    "dimension mismatch: header dims imply " + std::to_string(payload) +
                        " parameter bytes, file holds " + std::to_string(off - kHeaderBytes));
      }
    }
    throw Error(ErrorCode::truncated, "truncated model file");
  }

  ModelBundle bundle{ModelParams(ParamSet::zeros(dims)), Vocabulary()};
  std::size_t offset = kHeaderBytes;
  for (auto& block : bundle.params.blocks()) {
    for (double& x : block.values) {
      x = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
      offset += 8;
    }
  }
  bundle.vocab = Vocabulary::from_text(bytes.substr(blob_at + 8));
  if (bundle.vocab.size() != dims.vocab || bundle.vocab.num_classes() != dims.classes) {
    throw Error(ErrorCode::dimension_mismatch,
                "dimension mismatch: embedded vocabulary disagrees with header V/C");
  }
  return bundle;
}

void save_model(const std::filesystem::path& path, const ModelParams& params,
                const Vocabulary& vocab) {
  write_file(path, serialize_model(params, vocab));
}

ModelBundle load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

}  // namespace dvrnn
