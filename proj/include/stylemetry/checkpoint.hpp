// Copyright 2026 The Stylemetry Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STYLEMETRY_CHECKPOINT_HPP
#define STYLEMETRY_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "stylemetry/arnet.hpp"
#include "stylemetry/error.hpp"
#include "stylemetry/text.hpp"

namespace stylemetry {

// Layout:
//   ARNETCKPT1
//   key=value ... (config, keys sorted)
//   0:driver,1:driver,...
//   <name> <d0,d1> <offset> <nbytes>     one line per tensor, fixed order
//   \0
//   little-endian float32 blobs in header order
inline constexpr std::string_view kCheckpointMagic = "ARNETCKPT1";

namespace detail {

struct NamedTensor {
  std::string name;
  nn::Tensor *tensor;
};

inline std::vector<NamedTensor> checkpoint_tensors(ArnetModel &m) {
  std::vector<NamedTensor> out;
  for (auto *p : m.params()) out.push_back({p->name, &p->value});
  out.push_back({"input.shift", &m.input_shift});
  out.push_back({"input.scale", &m.input_scale});
  return out;
}

inline std::string dims_field(const std::vector<std::size_t> &shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

}  // namespace detail

inline std::string serialize_model(const ArnetModel &model) {
  ArnetModel &m = const_cast<ArnetModel &>(model);
  std::string header;
  header += kCheckpointMagic;
  header += '\n';
  bool first = true;
  for (const auto &[k, v] : model.config.to_map()) {
    if (!first) header += ' ';
    header += k + "=" + v;
    first = false;
  }
  header += '\n';
  for (std::size_t i = 0; i < model.labels.size(); ++i) {
    if (i) header += ',';
    header += std::to_string(i) + ":" + model.labels[i];
  }
  header += '\n';
  std::string blob;
  for (const auto &[name, t] : detail::checkpoint_tensors(m)) {
    const std::size_t nbytes = t->size() * 4;
    header += name + " " + detail::dims_field(t->shape) + " " + std::to_string(blob.size()) + " " +
              std::to_string(nbytes) + "\n";
    for (double v : t->data) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
    }
  }
  header += '\0';
  return header + blob;
}

inline ArnetModel deserialize_model(const std::string &bytes) {
  const auto nul = bytes.find('\0');
  if (nul == std::string::npos) throw ValidationError("checkpoint: missing header terminator");
  std::istringstream head(bytes.substr(0, nul));
  std::string line;
  if (!std::getline(head, line) || line != kCheckpointMagic)
    throw ValidationError("checkpoint: bad magic");

  if (!std::getline(head, line)) throw ValidationError("checkpoint: missing config line");
  ArnetConfig cfg;
  for (auto kv : text::split(line, ' ')) {
    auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ValidationError("checkpoint: bad config entry '" + std::string(kv) + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }

  if (!std::getline(head, line)) throw ValidationError("checkpoint: missing label map");
  std::vector<std::string> labels;
  if (!line.empty()) {
    for (auto entry : text::split(line, ',')) {
      auto colon = entry.find(':');
      auto idx = colon == std::string_view::npos ? std::nullopt : text::parse_int(entry.substr(0, colon));
      if (!idx || *idx != static_cast<std::int64_t>(labels.size()))
        throw ValidationError("checkpoint: bad label map entry '" + std::string(entry) + "'");
      labels.emplace_back(entry.substr(colon + 1));
    }
  }

  ArnetModel model(cfg);
  model.labels = std::move(labels);
  const std::size_t blob_start = nul + 1;
  const std::size_t blob_size = bytes.size() - blob_start;
  std::size_t expected_offset = 0;
  for (const auto &[name, t] : detail::checkpoint_tensors(model)) {
    if (!std::getline(head, line)) throw ValidationError("checkpoint: missing manifest line for " + name);
    auto fields = text::split(line, ' ');
    if (fields.size() != 4 || fields[0] != name)
      throw ValidationError("checkpoint: expected manifest entry for " + name + ", got '" + line + "'");
    if (fields[1] != detail::dims_field(t->shape))
      throw ValidationError("checkpoint: tensor " + name + " has dims " + std::string(fields[1]) +
                            ", config implies " + detail::dims_field(t->shape));
    auto offset = text::parse_int(fields[2]);
    auto nbytes = text::parse_int(fields[3]);
    if (!offset || !nbytes || static_cast<std::size_t>(*offset) != expected_offset ||
        static_cast<std::size_t>(*nbytes) != t->size() * 4)
      throw ValidationError("checkpoint: tensor " + name + " has an inconsistent offset or size");
    if (expected_offset + t->size() * 4 > blob_size)
      throw ValidationError("checkpoint: truncated data for tensor " + name);
    const char *src = bytes.data() + blob_start + expected_offset;
    for (std::size_t i = 0; i < t->size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + b])) << (8 * b);
      t->data[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    expected_offset += t->size() * 4;
  }
  if (std::getline(head, line) && !line.empty())
    throw ValidationError("checkpoint: unexpected manifest entry '" + line + "'");
  if (expected_offset != blob_size) throw ValidationError("checkpoint: trailing bytes after tensor data");
  return model;
}

inline void save_model(const ArnetModel &model, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

inline ArnetModel load_model(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace stylemetry

#endif  // STYLEMETRY_CHECKPOINT_HPP
