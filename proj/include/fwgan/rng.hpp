// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgan/tensor.hpp"

namespace fwgan {

/// Stream ids for RngStream::from_seed_and_salt. Each concern gets its own
/// decorrelated stream from the one master seed, so e.g. evaluation cadence
/// cannot perturb the training trajectory.
namespace salt {
inline constexpr std::uint64_t kData = 1;        // synthetic training draws / split shuffle
inline constexpr std::uint64_t kValidData = 2;   // synthetic validation draws
inline constexpr std::uint64_t kInit = 3;        // parameter initialization
inline constexpr std::uint64_t kTrain = 4;       // epoch shuffles + training latents
inline constexpr std::uint64_t kEval = 5;        // evaluation latents + held-out batches
}  // namespace salt

namespace detail {

// splitmix64; decorrelates (seed, salt) pairs before they reach the engine.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// A named, seeded random stream. Every stochastic choice in the library
/// (init, shuffling, latents, synthetic data, evaluation draws) goes through
/// one of these, so a run is a pure function of its seeds.
///
/// Distribution objects are constructed per call and discarded, so the full
/// stream state is the engine alone and save()/restore() round-trips exactly.
class RngStream {
  public:
    RngStream() : engine_(detail::mix64(0)) {}
    explicit RngStream(std::uint64_t seed) : engine_(detail::mix64(seed)) {}

    /// Decorrelated named stream; one master seed plus a stream id.
    static RngStream from_seed_and_salt(std::uint64_t seed, std::uint64_t salt) {
        RngStream s;
        s.engine_.seed(detail::mix64(detail::mix64(seed) ^ detail::mix64(salt + 1)));
        return s;
    }

    double normal() {
        std::normal_distribution<double> d(0.0, 1.0);
        return d(engine_);
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        std::uniform_int_distribution<int> d(0, n - 1);
        return d(engine_);
    }

    Tensor normal_tensor(int rows, int cols) {
        Tensor t(rows, cols);
        std::normal_distribution<double> d(0.0, 1.0);
        for (std::int64_t k = 0; k < t.size(); ++k) t[k] = d(engine_);
        return t;
    }

    Tensor uniform_tensor(int rows, int cols, double lo, double hi) {
        Tensor t(rows, cols);
        std::uniform_real_distribution<double> d(lo, hi);
        for (std::int64_t k = 0; k < t.size(); ++k) t[k] = d(engine_);
        return t;
    }

    void shuffle(std::vector<int>& v) { std::shuffle(v.begin(), v.end(), engine_); }

    /// k indices drawn uniformly with replacement from [0, n).
    std::vector<int> choice_with_replacement(int k, int n) {
        std::uniform_int_distribution<int> d(0, n - 1);
        std::vector<int> idx(static_cast<std::size_t>(k));
        for (auto& i : idx) i = d(engine_);
        return idx;
    }

    /// Engine state as text; exact round-trip with restore().
    std::string save() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void restore(const std::string& state) {
        std::istringstream is(state);
        is >> engine_;
        if (is.fail()) throw std::invalid_argument("RngStream::restore: malformed state");
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace fwgan
