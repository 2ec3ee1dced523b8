#include "citeworth/text_util.hpp"

#include <cstdint>

#include "citeworth/error.hpp"

namespace citeworth {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::EmptyArticle: return "EmptyArticle";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::FeatureSpaceMismatch: return "FeatureSpaceMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::BadArtifact: return "BadArtifact";
  }
  return "Unknown";
}

std::size_t char_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::size_t word_length(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::string_view trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return text.substr(b, e - b);
}

std::string normalize_space(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending = false;
  for (char c : text) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace citeworth
