#include "citeworth/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "citeworth/error.hpp"

namespace citeworth::artifact {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u(std::string_view in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::BadArtifact, msg); }

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

void Artifact::put(const std::string& name, std::vector<double> data, std::vector<std::size_t> shape) {
  if (shape.empty()) shape = {data.size()};
  if (product(shape) != data.size()) throw Error(ErrorCode::DimensionMismatch, "tensor '" + name + "' shape");
  Tensor t;
  t.shape = std::move(shape);
  t.f64 = std::move(data);
  tensors_[name] = std::move(t);
}

void Artifact::put_int(const std::string& name, std::vector<std::int64_t> data,
                       std::vector<std::size_t> shape) {
  if (shape.empty()) shape = {data.size()};
  if (product(shape) != data.size()) throw Error(ErrorCode::DimensionMismatch, "tensor '" + name + "' shape");
  Tensor t;
  t.shape = std::move(shape);
  t.i64 = std::move(data);
  t.is_int = true;
  tensors_[name] = std::move(t);
}

const Tensor& Artifact::f64(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end() || it->second.is_int) bad("missing f64 tensor '" + name + "'");
  return it->second;
}

const Tensor& Artifact::i64(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end() || !it->second.is_int) bad("missing i64 tensor '" + name + "'");
  return it->second;
}

nlohmann::json Artifact::full_header() const {
  nlohmann::json h = header;
  h["format_version"] = version;
  auto dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    dir.push_back({{"name", name},
                   {"dtype", t.is_int ? "i64" : "f64"},
                   {"shape", t.shape},
                   {"offset", offset},
                   {"count", t.count()}});
    offset += 8 * t.count();
  }
  h["tensors"] = std::move(dir);
  return h;
}

std::string Artifact::to_bytes() const {
  const std::string head = full_header().dump();
  if (head.size() > 0xFFFFFFFFu) bad("header too large");
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, version);
  put_u32(out, static_cast<std::uint32_t>(head.size()));
  out += head;
  for (const auto& [name, t] : tensors_) {
    if (t.is_int) {
      for (auto v : t.i64) put_u64(out, static_cast<std::uint64_t>(v));
    } else {
      for (double v : t.f64) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  return out;
}

Artifact Artifact::from_bytes(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    bad("not a model file (bad magic)");
  }
  Artifact a;
  a.version = static_cast<std::uint32_t>(get_u(bytes, 8, 4));
  if (a.version != kFormatVersion) {
    bad("unsupported format version " + std::to_string(a.version));
  }
  const std::size_t hlen = get_u(bytes, 12, 4);
  if (16 + hlen > bytes.size()) bad("truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("header is not JSON: ") + e.what());
  }
  const std::string_view data = bytes.substr(16 + hlen);
  try {
    for (const auto& entry : h.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto dtype = entry.at("dtype").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (product(shape) != count) bad("tensor '" + name + "' shape/count mismatch");
      if (offset > data.size() || count > (data.size() - offset) / 8) bad("tensor '" + name + "' truncated");
      if (dtype == "f64") {
        std::vector<double> v(count);
        for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<double>(get_u(data, offset + 8 * i, 8));
        a.put(name, std::move(v), shape);
      } else if (dtype == "i64") {
        std::vector<std::int64_t> v(count);
        for (std::size_t i = 0; i < count; ++i) {
          v[i] = static_cast<std::int64_t>(get_u(data, offset + 8 * i, 8));
        }
        a.put_int(name, std::move(v), shape);
      } else {
        bad("tensor '" + name + "' has unknown dtype '" + dtype + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed tensor directory: ") + e.what());
  }
  h.erase("tensors");
  h.erase("format_version");
  a.header = std::move(h);
  return a;
}

void Artifact::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const std::string bytes = to_bytes();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Artifact Artifact::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_bytes(ss.str());
}

}  // namespace citeworth::artifact
