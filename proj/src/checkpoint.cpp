#include "skt/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace skt::model {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  const auto& c = params.config;
  put<std::int32_t>(out, c.d);
  put<std::int32_t>(out, c.n_kcs);
  put<std::int32_t>(out, c.n_questions);
  put<std::int32_t>(out, c.n_blocks);
  put<std::int32_t>(out, c.n_heads);
  put<double>(out, c.dropout);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(c.variant));
  put<std::uint64_t>(out, c.seed);

  const auto named = params.named();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t->rank()));
    for (int i = 0; i < t->rank(); ++i) put<std::int32_t>(out, t->dim(i));
    out.write(reinterpret_cast<const char*>(t->ptr()),
              static_cast<std::streamsize>(sizeof(double) * t->numel()));
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  if (get<std::uint32_t>(in, "version") != kVersion) {
    throw DataError("checkpoint: unsupported version in " + path);
  }
  ModelConfig c;
  c.d = get<std::int32_t>(in, "d");
  c.n_kcs = get<std::int32_t>(in, "n_kcs");
  c.n_questions = get<std::int32_t>(in, "n_questions");
  c.n_blocks = get<std::int32_t>(in, "n_blocks");
  c.n_heads = get<std::int32_t>(in, "n_heads");
  c.dropout = get<double>(in, "dropout");
  const auto variant_tag = get<std::uint8_t>(in, "variant");
  if (variant_tag > 2) throw DataError("checkpoint: bad variant tag");
  c.variant = static_cast<Variant>(variant_tag);
  c.seed = get<std::uint64_t>(in, "seed");
  c.validate();

  ModelParams params = init_params(c);
  auto named = params.named();
  const auto count = get<std::uint32_t>(in, "array count");
  if (count != named.size()) {
    throw DataError("checkpoint: expected " + std::to_string(named.size()) +
                    " arrays, found " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint16_t>(in, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("checkpoint: truncated name");
    if (name != named[i].first) {
      throw DataError("checkpoint: array '" + name + "' does not match expected '" +
                      named[i].first + "'");
    }
    Tensor* t = named[i].second;
    const int rank = get<std::uint8_t>(in, "rank");
    if (rank != t->rank()) {
      throw DataError("checkpoint: rank mismatch for " + name);
    }
    for (int r = 0; r < rank; ++r) {
      const int dim = get<std::int32_t>(in, "dim");
      if (dim != t->dim(r)) {
        throw DataError("checkpoint: shape mismatch for " + name);
      }
    }
    in.read(reinterpret_cast<char*>(t->ptr()),
            static_cast<std::streamsize>(sizeof(double) * t->numel()));
    if (!in) throw DataError("checkpoint: truncated data for " + name);
    check_finite(t->ptr(), t->numel(), "checkpoint load");
  }
  return params;
}

}  // namespace skt::model
