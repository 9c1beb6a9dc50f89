#include "hardy/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "hardy/errors.hpp"

namespace hardy {
namespace {

constexpr std::uint64_t kChunkTrials = 1u << 16;

template <std::size_t N>
std::size_t draw_index(const std::array<double, N>& cdf, double u) {
    for (std::size_t i = 0; i + 1 < N; ++i) {
        if (u < cdf[i]) return i;
    }
    return N - 1;
}

Outcome station_outcome(bool click0, bool click1) {
    if (click0 == click1) return Outcome::u;
    return click0 ? Outcome::zero : Outcome::one;
}

}  // namespace

Rng partition_stream(std::uint64_t seed, std::uint32_t partition, std::uint32_t partitions) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      partition, partitions};
    return Rng(seq);
}

void SimulationConfig::validate() const {
    if (n_trials < 1) {
        throw ValidationError("n_trials must be at least 1");
    }
    if (partitions < 1) {
        throw ValidationError("partition count must be at least 1");
    }
    imperfections.validate();
}

std::uint64_t sample_pair_count(double mu, Rng& rng) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw DomainError("mean pair number must be finite and non-negative");
    }
    if (mu == 0.0) return 0;
    if (mu > 50.0) {
        std::poisson_distribution<std::uint64_t> dist(mu);
        return dist(rng);
    }
    double u = uniform01(rng);
    double p = std::exp(-mu);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf && k < 1000) {
        ++k;
        p *= mu / static_cast<double>(k);
        cdf += p;
        if (p == 0.0) break;
    }
    return k;
}

TrialEngine::TrialEngine(const SimulationConfig& config) {
    config.imperfections.validate();
    const auto& imp = config.imperfections;
    DensityMatrix rho = werner(config.design.theta, imp.visibility);

    double acc = 0.0;
    for (std::size_t i = 0; i < kSettingPairs; ++i) {
        acc += config.weights.values()[i];
        setting_cdf_[i] = acc;
    }
    for (int x = 1; x <= kSettings; ++x) {
        Observable alice = observable_from_angle(config.design.alice_angle(x));
        for (int y = 1; y <= kSettings; ++y) {
            Observable bob = observable_from_angle(config.design.bob_angle(y));
            auto& cdf = born_cdf_[setting_pair_index(x, y)];
            double c = 0.0;
            for (int k = 0; k < 4; ++k) {
                c += born_joint(rho, alice.projector(k / 2), bob.projector(k % 2));
                cdf[static_cast<std::size_t>(k)] = c;
            }
        }
    }
    eta_alice_ = {imp.eta_a0, imp.eta_a1};
    eta_bob_ = {imp.eta_b0, imp.eta_b1};
    dark_prob_ = imp.dark_prob;
    mean_pairs_ = imp.mean_pairs;
    mode_ = config.pair_mode;
}

TrialRecord TrialEngine::sample(Rng& rng) const {
    std::size_t pair = draw_index(setting_cdf_, uniform01(rng));
    TrialRecord rec;
    rec.x = static_cast<std::uint8_t>(pair / 2 + 1);
    rec.y = static_cast<std::uint8_t>(pair % 2 + 1);

    std::uint64_t pairs = mode_ == PairMode::fixed_one ? 1 : sample_pair_count(mean_pairs_, rng);
    std::array<bool, 2> alice{false, false};
    std::array<bool, 2> bob{false, false};
    const auto& cdf = born_cdf_[pair];
    for (std::uint64_t n = 0; n < pairs; ++n) {
        std::size_t k = draw_index(cdf, uniform01(rng));
        std::size_t pa = k / 2;
        std::size_t pb = k % 2;
        if (uniform01(rng) < eta_alice_[pa]) alice[pa] = true;
        if (uniform01(rng) < eta_bob_[pb]) bob[pb] = true;
    }
    if (dark_prob_ > 0.0) {
        for (auto* side : {&alice, &bob}) {
            for (bool& click : *side) {
                if (uniform01(rng) < dark_prob_) click = true;
            }
        }
    }
    rec.a = station_outcome(alice[0], alice[1]);
    rec.b = station_outcome(bob[0], bob[1]);
    return rec;
}

TrialRecord simulate_trial(const SimulationConfig& config, Rng& rng) {
    return TrialEngine(config).sample(rng);
}

CountsTable simulate(const SimulationConfig& config, const RecordSink& sink, unsigned threads) {
    config.validate();
    const TrialEngine engine(config);
    const std::uint32_t k = config.partitions;
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, k);

    std::vector<Rng> streams;
    streams.reserve(k);
    for (std::uint32_t j = 0; j < k; ++j) streams.push_back(partition_stream(config.seed, j, k));
    std::vector<CountsTable> partials(k);
    std::vector<TrialRecord> buffer(sink ? std::min(kChunkTrials, config.n_trials) : 0);

    // Partition j draws its trials in increasing index order, so chunking
    // the index range does not change any stream.
    auto run_partition = [&](std::uint32_t j, std::uint64_t begin, std::uint64_t end) {
        std::uint64_t first = begin + (j + k - begin % k) % k;
        Rng& rng = streams[j];
        CountsTable& counts = partials[j];
        for (std::uint64_t i = first; i < end; i += k) {
            TrialRecord rec = engine.sample(rng);
            counts.add(rec);
            if (sink) buffer[i - begin] = rec;
        }
    };
    auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
        if (threads <= 1) {
            for (std::uint32_t j = 0; j < k; ++j) run_partition(j, begin, end);
            return;
        }
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::uint32_t j = t; j < k; j += threads) run_partition(j, begin, end);
            });
        }
    };

    if (!sink) {
        run_range(0, config.n_trials);
    } else {
        for (std::uint64_t begin = 0; begin < config.n_trials; begin += kChunkTrials) {
            std::uint64_t end = std::min(config.n_trials, begin + kChunkTrials);
            run_range(begin, end);
            sink(std::span<const TrialRecord>(buffer.data(), end - begin));
        }
    }

    CountsTable total;
    for (const auto& p : partials) total += p;
    return total;
}

CountsTable sample_counts(const JointDistribution& dist, std::uint64_t n_trials, Rng& rng) {
    CountsTable out;
    std::uint64_t remaining = n_trials;
    double mass = 1.0;
    for (std::size_t pair = 0; pair < kSettingPairs; ++pair) {
        double w = dist.weights().values()[pair];
        std::uint64_t n_pair = remaining;
        if (pair + 1 < kSettingPairs && remaining > 0) {
            double q = std::clamp(w / mass, 0.0, 1.0);
            n_pair = std::binomial_distribution<std::uint64_t>(remaining, q)(rng);
        }
        remaining -= n_pair;
        mass -= w;

        std::uint64_t left = n_pair;
        double cell_mass = 1.0;
        for (std::size_t k = 0; k < 9; ++k) {
            std::size_t cell = pair * 9 + k;
            double p = dist[cell];
            std::uint64_t n_cell = left;
            if (k + 1 < 9 && left > 0) {
                double q = cell_mass > 0.0 ? std::clamp(p / cell_mass, 0.0, 1.0) : 0.0;
                n_cell = std::binomial_distribution<std::uint64_t>(left, q)(rng);
            }
            out.add(cell, n_cell);
            left -= n_cell;
            cell_mass -= p;
        }
    }
    return out;
}

}  // namespace hardy
