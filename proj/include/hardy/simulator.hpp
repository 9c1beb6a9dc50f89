#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include "hardy/distribution.hpp"
#include "hardy/hardy_model.hpp"

namespace hardy {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits, so the value
// sequence is fixed by the engine alone and not by the standard library.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Stream `partition` of `partitions` for the run seed.
Rng partition_stream(std::uint64_t seed, std::uint32_t partition, std::uint32_t partitions);

struct SimulationConfig {
    HardyDesign design;
    ImperfectionModel imperfections;
    SettingWeights weights = SettingWeights::uniform();
    std::uint64_t n_trials = 0;
    std::uint64_t seed = 0;
    PairMode pair_mode = PairMode::poisson;
    // Trial i belongs to partition i mod partitions. Results depend on the
    // partition count but never on how many threads execute the partitions.
    std::uint32_t partitions = 1;

    // Throws ValidationError.
    void validate() const;
};

// Poisson(mu) draw by inversion of the cumulative distribution.
std::uint64_t sample_pair_count(double mu, Rng& rng);

// Precomputed sampling tables for one configuration.
class TrialEngine {
  public:
    explicit TrialEngine(const SimulationConfig& config);

    TrialRecord sample(Rng& rng) const;

  private:
    std::array<double, kSettingPairs> setting_cdf_{};
    // Cumulative Born probabilities of the pre-detection outcomes
    // (00, 01, 10, 11) per setting pair.
    std::array<std::array<double, 4>, kSettingPairs> born_cdf_{};
    std::array<double, 2> eta_alice_{};
    std::array<double, 2> eta_bob_{};
    double dark_prob_ = 0.0;
    double mean_pairs_ = 0.0;
    PairMode mode_ = PairMode::poisson;
};

TrialRecord simulate_trial(const SimulationConfig& config, Rng& rng);

// Receives consecutive, trial-ordered slices of the record stream.
using RecordSink = std::function<void(std::span<const TrialRecord>)>;

// Runs config.n_trials trials. `threads` = 0 picks the hardware
// concurrency; the result is identical for every thread count.
CountsTable simulate(const SimulationConfig& config, const RecordSink& sink = {},
                     unsigned threads = 0);

// Draws counts of n_trials i.i.d. trials from `dist` (settings drawn with
// dist.weights()). Equivalent in law to tallying simulated records.
CountsTable sample_counts(const JointDistribution& dist, std::uint64_t n_trials, Rng& rng);

}  // namespace hardy
