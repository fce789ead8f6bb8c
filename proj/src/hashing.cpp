#include "storyreel/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

#include "storyreel/errors.hpp"

namespace storyreel {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::Validation: return "ValidationError";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::MockScriptMiss: return "MockScriptMiss";
    case Errc::ContractViolation: return "ContractViolation";
    case Errc::InvalidRequest: return "InvalidRequest";
    case Errc::StageFailed: return "StageFailed";
    case Errc::ParseFailed: return "ParseFailed";
    case Errc::MissingCasting: return "MissingCasting";
    case Errc::StyleTrainingFailed: return "StyleTrainingFailed";
    case Errc::PackagingRefused: return "PackagingRefused";
    case Errc::NotFound: return "NotFound";
    case Errc::StageOrderViolation: return "StageOrderViolation";
    case Errc::DegenerateEmbedding: return "DegenerateEmbedding";
    case Errc::InsufficientFrames: return "InsufficientFrames";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::DegenerateDistribution: return "DegenerateDistribution";
    case Errc::InvalidVerdict: return "InvalidVerdict";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::Config: return "ConfigError";
    case Errc::Io: return "IoError";
    case Errc::Interrupted: return "Interrupted";
  }
  return "Error";
}

namespace {

std::array<unsigned char, 32> digest(const void* data, std::size_t size) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw std::runtime_error("EVP_Digest(sha256) failed");
  }
  return out;
}

std::string to_hex(const std::array<unsigned char, 32>& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (unsigned char c : d) {
    s.push_back(kHex[c >> 4]);
    s.push_back(kHex[c & 0xF]);
  }
  return s;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) { return to_hex(digest(bytes.data(), bytes.size())); }

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  return to_hex(digest(bytes.data(), bytes.size()));
}

std::vector<std::uint8_t> sha256_raw(std::string_view bytes) {
  auto d = digest(bytes.data(), bytes.size());
  return {d.begin(), d.end()};
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                          static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::ParseFailed, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::ParseFailed, "invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string slugify(std::string_view text) {
  std::string out;
  bool pending_dash = false;
  for (char raw : text) {
    auto c = static_cast<unsigned char>(raw);
    bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<unsigned char>(c - 'A' + 'a');
      alnum = true;
    }
    if (alnum) {
      if (pending_dash && !out.empty()) out.push_back('-');
      pending_dash = false;
      out.push_back(static_cast<char>(c));
    } else {
      pending_dash = true;
    }
  }
  return out.empty() ? std::string("style") : out;
}

}  // namespace storyreel
