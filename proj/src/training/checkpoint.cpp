// SPDX-License-Identifier: Apache-2.0
#include "vstlm/training/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vstlm/numerics/error.hpp"

namespace vstlm::train {
namespace {

constexpr char kMagic[] = "VSTLM1";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxValues = std::uint64_t{1} << 32;

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string where) : bytes_(bytes), where_(std::move(where)) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError(DataError::Kind::kTruncated,
                      "checkpoint truncated at byte " + std::to_string(pos_) + " in " + where_);
    }
  }

  const std::string& bytes_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(std::string name, nn::Tensor value) {
  for (auto& [n, t] : tensors) {
    if (n == name) {
      t = std::move(value);
      return;
    }
  }
  tensors.emplace_back(std::move(name), std::move(value));
}

const nn::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const nn::Tensor& Checkpoint::require(const std::string& name) const {
  const nn::Tensor* t = find(name);
  if (!t) throw DataError(DataError::Kind::kInvalid, "checkpoint has no tensor '" + name + "'");
  return *t;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw DataError(DataError::Kind::kInvalid, "checkpoint has no metadata key '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string meta;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint metadata entry '" + k + "' contains a reserved character");
    }
    meta += k + "=" + v + "\n";
  }
  std::string buf(kMagic, kMagicLen);
  put_le(buf, meta.size(), 8);
  buf += meta;
  for (const auto& [name, t] : ckpt.tensors) {
    put_le(buf, name.size(), 4);
    buf += name;
    put_le(buf, t.rank(), 4);
    for (std::size_t e : t.shape()) put_le(buf, e, 4);
    for (double v : t.values()) put_le(buf, std::bit_cast<std::uint64_t>(v), 8);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataError::Kind::kIo, "cannot write checkpoint " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError(DataError::Kind::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError(DataError::Kind::kIo, "cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());
  if (r.take(std::min(kMagicLen, bytes.size())) != std::string(kMagic, kMagicLen)) {
    throw DataError(DataError::Kind::kBadMagic, "not a checkpoint: " + path.string());
  }
  Checkpoint ckpt;
  const std::uint64_t meta_len = r.le(8);
  if (meta_len > bytes.size()) throw DataError(DataError::Kind::kTruncated, "metadata overruns " + path.string());
  const std::string meta = r.take(static_cast<std::size_t>(meta_len));
  std::size_t start = 0;
  while (start < meta.size()) {
    const auto nl = meta.find('\n', start);
    const std::string line = meta.substr(start, nl - start);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(DataError::Kind::kParse, "bad metadata line '" + line + "'");
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  while (!r.done()) {
    const auto name_len = r.le(4);
    std::string name = r.take(static_cast<std::size_t>(name_len));
    const auto rank = r.le(4);
    if (rank > kMaxRank) throw DataError(DataError::Kind::kExtentOverflow, "tensor '" + name + "' has rank " + std::to_string(rank));
    nn::Shape shape;
    std::uint64_t count = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<std::size_t>(r.le(4)));
      count *= shape.back();
      if (count >= kMaxValues) throw DataError(DataError::Kind::kExtentOverflow, "tensor '" + name + "' is too large");
    }
    nn::Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<double>(r.le(8));
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

void store_parameters(Checkpoint& ckpt, std::span<nn::Parameter* const> params) {
  for (const auto* p : params) ckpt.put(p->name, p->value);
}

void restore_parameters(const Checkpoint& ckpt, std::span<nn::Parameter* const> params) {
  for (auto* p : params) {
    const nn::Tensor& t = ckpt.require(p->name);
    if (!t.same_shape(p->value)) {
      throw DataError(DataError::Kind::kInvalid, "checkpoint tensor '" + p->name + "' is " + nn::shape_string(t.shape()) +
                                                     ", model expects " + nn::shape_string(p->value.shape()));
    }
    p->value = t;
  }
}

void store_optimizer(Checkpoint& ckpt, const AdamW& opt) {
  for (std::size_t i = 0; i < opt.parameters().size(); ++i) {
    const std::string& name = opt.parameters()[i]->name;
    ckpt.put("adam.m/" + name, opt.first_moment(i));
    ckpt.put("adam.v/" + name, opt.second_moment(i));
  }
  ckpt.metadata["adam.steps"] = std::to_string(opt.steps());
}

void restore_optimizer(const Checkpoint& ckpt, AdamW& opt) {
  for (std::size_t i = 0; i < opt.parameters().size(); ++i) {
    const std::string& name = opt.parameters()[i]->name;
    opt.first_moment(i) = ckpt.require("adam.m/" + name);
    opt.second_moment(i) = ckpt.require("adam.v/" + name);
  }
  opt.set_steps(std::stoll(ckpt.meta("adam.steps")));
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace vstlm::train
