// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0

#include "dscls/rng.hpp"

#include <cmath>
#include <numbers>

namespace dscls {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGamma;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL))) {}

std::uint64_t CounterRng::next_u64() {
    ++counter_;
    return splitmix64(key_ + counter_ * kGamma);
}

double CounterRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

} // namespace dscls
