#pragma once

// Versioned binary container for trained models.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "CWMODEL\0"
//   u32          format version
//   u32          header length L
//   L bytes      UTF-8 JSON header; header["tensors"] lists
//                {name, dtype ("f64" | "i64"), shape, offset, count}
//   data         tensor payloads, offsets relative to the start of this block,
//                f64 as IEEE-754 binary64, i64 as two's complement

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace citeworth::artifact {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kMagic[8] = {'C', 'W', 'M', 'O', 'D', 'E', 'L', '\0'};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> f64;
  std::vector<std::int64_t> i64;
  bool is_int = false;

  std::size_t count() const { return is_int ? i64.size() : f64.size(); }
};

class Artifact {
 public:
  nlohmann::json header = nlohmann::json::object();
  std::uint32_t version = kFormatVersion;

  void put(const std::string& name, std::vector<double> data, std::vector<std::size_t> shape = {});
  void put_int(const std::string& name, std::vector<std::int64_t> data,
               std::vector<std::size_t> shape = {});

  bool has(const std::string& name) const { return tensors_.count(name) != 0; }
  /// Throws Error{BadArtifact} when absent or of the other dtype.
  const Tensor& f64(const std::string& name) const;
  const Tensor& i64(const std::string& name) const;
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  std::string to_bytes() const;
  /// Throws Error{BadArtifact} on a wrong magic, unknown version, truncated
  /// data or an inconsistent tensor directory.
  static Artifact from_bytes(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Artifact load(const std::filesystem::path& path);

  /// Header with the tensor directory, as written.
  nlohmann::json full_header() const;

 private:
  std::map<std::string, Tensor> tensors_;
};

}  // namespace citeworth::artifact
