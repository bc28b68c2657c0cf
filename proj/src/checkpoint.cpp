// Copyright 2026 The fairkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairkd/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"

#include "fairkd/digest.hpp"
#include "fairkd/io.hpp"

namespace fairkd {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'F', 'A', 'I', 'R', 'K', 'D', 'C', 'K'};
constexpr size_t kDigestBytes = 32;

template <typename T>
void append_pod(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

void append_tensor(std::string& out, const Matrix& m) {
  out.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<size_t>(m.size()));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void read(void* dst, size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::kIoError, "checkpoint truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T pod() {
    T value;
    read(&value, sizeof(T));
    return value;
  }

  Matrix tensor(Index rows, Index cols) {
    if (rows < 0 || cols < 0 ||
        static_cast<size_t>(rows) * static_cast<size_t>(cols) > (bytes_.size() - pos_) / sizeof(double)) {
      throw Error(ErrorCode::kIoError, "checkpoint truncated");
    }
    Matrix m(rows, cols);
    read(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
    return m;
  }

  std::string string(size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::kIoError, "checkpoint truncated");
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  size_t position() const { return pos_; }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

std::string raw_digest(std::string_view bytes) {
  const std::string hex = sha256_hex(bytes);
  std::string raw(kDigestBytes, '\0');
  for (size_t i = 0; i < kDigestBytes; ++i) raw[i] = static_cast<char>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return raw;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  return encoder == other.encoder && prototypes.rows() == other.prototypes.rows() &&
         prototypes.cols() == other.prototypes.cols() && prototypes == other.prototypes &&
         norm_stats == other.norm_stats && rng_state == other.rng_state && config_digest == other.config_digest &&
         role == other.role && metadata_json == other.metadata_json;
}

Checkpoint make_checkpoint(const TrainedModel& model, std::string config_digest, std::string role) {
  Checkpoint ckpt;
  ckpt.encoder = model.encoder;
  ckpt.prototypes = model.prototypes;
  ckpt.norm_stats = model.norm_stats;
  ckpt.rng_state = model.rng_state;
  ckpt.config_digest = std::move(config_digest);
  ckpt.role = std::move(role);
  return ckpt;
}

void checkpoint_save(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const EncoderSpec& spec = checkpoint.encoder.spec();
  nlohmann::json header;
  header["tool"] = kToolVersion;
  header["encoder"] = {{"input_dim", spec.input_dim},
                       {"hidden_widths", spec.hidden_widths},
                       {"embedding_dim", spec.embedding_dim},
                       {"activation", ActivationName(spec.activation)},
                       {"init_seed", spec.init_seed}};
  header["prototypes"] = {{"rows", checkpoint.prototypes.rows()}, {"cols", checkpoint.prototypes.cols()}};
  // Doubles as bit patterns keep the round trip exact.
  header["norm_stats"] = {{"initialized", checkpoint.norm_stats.initialized},
                          {"mean_bits", std::bit_cast<std::uint64_t>(checkpoint.norm_stats.mean_norm)},
                          {"std_bits", std::bit_cast<std::uint64_t>(checkpoint.norm_stats.std_norm)}};
  header["rng_state"] = checkpoint.rng_state;
  header["config_digest"] = checkpoint.config_digest;
  header["role"] = checkpoint.role;
  header["metadata"] = nlohmann::json::parse(checkpoint.metadata_json);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  append_pod(out, kCheckpointFormatVersion);
  append_pod(out, static_cast<std::uint64_t>(header_text.size()));
  out += header_text;
  for (const DenseLayer& layer : checkpoint.encoder.layers()) {
    append_tensor(out, layer.weight);
    append_tensor(out, layer.bias);
  }
  append_tensor(out, checkpoint.prototypes);
  out += raw_digest(out);
  write_file_atomic(path, out);
}

Checkpoint checkpoint_load(const std::filesystem::path& path, std::optional<Index> expected_embedding_dim) {
  const std::string bytes = read_file(path);
  Reader reader(bytes);
  char magic[sizeof(kMagic)];
  if (bytes.size() < sizeof(kMagic)) throw Error(ErrorCode::kIoError, "checkpoint truncated: " + path.string());
  reader.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kFormatVersionMismatch, path.string() + " is not a fairkd checkpoint");
  }
  const auto version = reader.pod<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::kFormatVersionMismatch, "checkpoint version " + std::to_string(version) +
                                                       ", expected " + std::to_string(kCheckpointFormatVersion));
  }
  const auto header_len = reader.pod<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reader.string(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatVersionMismatch, std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    EncoderSpec spec;
    const auto& enc = header.at("encoder");
    spec.input_dim = enc.at("input_dim").get<Index>();
    spec.hidden_widths = enc.at("hidden_widths").get<std::vector<Index>>();
    spec.embedding_dim = enc.at("embedding_dim").get<Index>();
    spec.activation = ParseActivation(enc.at("activation").get<std::string>());
    spec.init_seed = enc.at("init_seed").get<std::uint64_t>();
    if (expected_embedding_dim && *expected_embedding_dim != spec.embedding_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "checkpoint embedding dimension " +
                                                     std::to_string(spec.embedding_dim) + ", expected " +
                                                     std::to_string(*expected_embedding_dim));
    }
    std::vector<DenseLayer> layers;
    Index in = spec.input_dim;
    for (size_t l = 0; l <= spec.hidden_widths.size(); ++l) {
      const Index out = l < spec.hidden_widths.size() ? spec.hidden_widths[l] : spec.embedding_dim;
      DenseLayer layer;
      layer.weight = reader.tensor(out, in);
      layer.bias = reader.tensor(out, 1);
      layers.push_back(std::move(layer));
      in = out;
    }
    const Index rows = header.at("prototypes").at("rows").get<Index>();
    const Index cols = header.at("prototypes").at("cols").get<Index>();
    Matrix prototypes = reader.tensor(rows, cols);
    const size_t payload_end = reader.position();
    const std::string stored = reader.string(kDigestBytes);
    if (reader.position() != bytes.size()) throw Error(ErrorCode::kIoError, "trailing bytes in checkpoint");
    if (stored != raw_digest(std::string_view(bytes).substr(0, payload_end))) {
      throw Error(ErrorCode::kFormatVersionMismatch, "checkpoint digest mismatch: " + path.string());
    }
    ckpt.encoder = Encoder(spec, std::move(layers));
    ckpt.prototypes = std::move(prototypes);
    const auto& stats = header.at("norm_stats");
    ckpt.norm_stats.initialized = stats.at("initialized").get<bool>();
    ckpt.norm_stats.mean_norm = std::bit_cast<double>(stats.at("mean_bits").get<std::uint64_t>());
    ckpt.norm_stats.std_norm = std::bit_cast<double>(stats.at("std_bits").get<std::uint64_t>());
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.config_digest = header.at("config_digest").get<std::string>();
    ckpt.role = header.at("role").get<std::string>();
    ckpt.metadata_json = header.at("metadata").dump();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatVersionMismatch, std::string("malformed checkpoint header: ") + e.what());
  }
  return ckpt;
}

}  // namespace fairkd
