// Copyright (c) 2026, dscls contributors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random number generation. Output i of a stream is a pure
// function of (seed, stream, i), so results are identical on every platform
// and can be reproduced from any position.

#pragma once

#include <cstdint>

namespace dscls {

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform();

    // Standard normal via Box-Muller; consumes two draws per call.
    double normal();

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace dscls
