// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vstlm/data/io.hpp"
#include "vstlm/numerics/error.hpp"

namespace vstlm::data {
namespace {

constexpr std::size_t kMagicLen = sizeof(kFeatureMagic) - 1;
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write_features(const std::filesystem::path& path, const vst::FeatureSequence& f) {
  const nn::Tensor& x = f.features;
  if (x.rank() != 2) throw ShapeError("write_features needs a matrix, got " + nn::shape_string(x.shape()));
  std::string buf(kFeatureMagic, kMagicLen);
  put_u32(buf, static_cast<std::uint32_t>(x.rows()));
  put_u32(buf, static_cast<std::uint32_t>(x.cols()));
  for (double v : x.values()) put_f64(buf, v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write feature file " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError(DataError::Kind::kIo, "write failed: " + path.string());
}

vst::FeatureSequence read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot read feature file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = " in " + path.string();
  if (bytes.size() < kMagicLen) throw DataError(DataError::Kind::kTruncated, "truncated header" + where);
  if (std::memcmp(bytes.data(), kFeatureMagic, kMagicLen) != 0) {
    throw DataError(DataError::Kind::kBadMagic, "bad magic" + where);
  }
  if (bytes.size() < kMagicLen + 8) throw DataError(DataError::Kind::kTruncated, "truncated header" + where);
  const std::uint64_t rows = get_le(p + kMagicLen, 4);
  const std::uint64_t cols = get_le(p + kMagicLen + 4, 4);
  const std::uint64_t count = rows * cols;
  if (rows == 0 || cols == 0 || count >= kMaxValues) {
    throw DataError(DataError::Kind::kExtentOverflow,
                    "extents " + std::to_string(rows) + "x" + std::to_string(cols) + " out of range" + where);
  }
  const std::uint64_t need = kMagicLen + 8 + count * 8;
  if (bytes.size() < need) {
    throw DataError(DataError::Kind::kTruncated, "truncated: " + std::to_string(bytes.size()) + " of " +
                                                     std::to_string(need) + " bytes" + where);
  }
  if (bytes.size() > need) throw DataError(DataError::Kind::kInvalid, "trailing bytes" + where);
  nn::Tensor x({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::bit_cast<double>(get_le(p + kMagicLen + 8 + 8 * i, 8));
  return vst::FeatureSequence{std::move(x), path.stem().string()};
}

}  // namespace vstlm::data
