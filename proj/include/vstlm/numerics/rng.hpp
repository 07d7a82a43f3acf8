// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "vstlm/numerics/tensor.hpp"

namespace vstlm::nn {

/// Generator for one (seed, key...) stream. Streams with different keys are
/// independent, so draws never depend on evaluation order.
std::mt19937_64 keyed_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Stream tags, kept distinct so no two subsystems share draws.
namespace stream {
inline constexpr std::uint64_t kPrototype = 0x5052;
inline constexpr std::uint64_t kSubject = 0x5355;
inline constexpr std::uint64_t kView = 0x5649;
inline constexpr std::uint64_t kSample = 0x534d;
inline constexpr std::uint64_t kCorpus = 0x434f;
inline constexpr std::uint64_t kInit = 0x494e;
inline constexpr std::uint64_t kBatch = 0x4241;
inline constexpr std::uint64_t kDropout = 0x4452;
inline constexpr std::uint64_t kReseed = 0x5245;
}  // namespace stream

Tensor gaussian(Shape shape, double stddev, std::mt19937_64& rng);

}  // namespace vstlm::nn
