#include "hardy/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hardy/errors.hpp"

namespace hardy {

char outcome_label(Outcome o) {
    switch (o) {
        case Outcome::zero: return '0';
        case Outcome::one: return '1';
        case Outcome::u: return 'u';
    }
    return '?';
}

SettingWeights::SettingWeights(const std::array<double, kSettingPairs>& w) : w_(w) {
    double sum = 0.0;
    for (double v : w_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ValidationError("setting weights must lie in [0, 1]");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ValidationError("setting weights must sum to 1");
    }
}

SettingWeights SettingWeights::uniform() { return SettingWeights(Raw{}, {0.25, 0.25, 0.25, 0.25}); }

SettingWeights SettingWeights::product(double alice_first, double bob_first) {
    if (!(alice_first > 0.0 && alice_first < 1.0 && bob_first > 0.0 && bob_first < 1.0)) {
        throw ValidationError("setting probabilities must lie in (0, 1)");
    }
    double a2 = 1.0 - alice_first;
    double b2 = 1.0 - bob_first;
    std::array<double, kSettingPairs> w{alice_first * bob_first, alice_first * b2, a2 * bob_first,
                                        a2 * b2};
    double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= sum;
    return SettingWeights(w);
}

JointDistribution::JointDistribution(const Table& conditional, const SettingWeights& weights)
    : p_(conditional), weights_(weights) {
    for (std::size_t pair = 0; pair < kSettingPairs; ++pair) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 9; ++k) {
            double v = p_[pair * 9 + k];
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("conditional probability out of [0, 1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-10) {
            throw ValidationError("conditional distribution of a setting pair does not sum to 1");
        }
    }
}

JointDistribution JointDistribution::uniform(const SettingWeights& weights) {
    Table t;
    t.fill(1.0 / 9.0);
    return JointDistribution(t, weights);
}

double JointDistribution::joint(std::size_t cell) const {
    Cell c = cell_at(cell);
    return weights_(c.x, c.y) * p_[cell];
}

double JointDistribution::alice_marginal(int x, int y, Outcome a) const {
    double s = 0.0;
    for (int b = 0; b < kOutcomes; ++b) s += (*this)(x, y, a, outcome_from_index(b));
    return s;
}

double JointDistribution::bob_marginal(int x, int y, Outcome b) const {
    double s = 0.0;
    for (int a = 0; a < kOutcomes; ++a) s += (*this)(x, y, outcome_from_index(a), b);
    return s;
}

double JointDistribution::signaling_residual() const {
    double worst = 0.0;
    for (int s = 1; s <= kSettings; ++s) {
        for (int o = 0; o < kOutcomes; ++o) {
            Outcome out = outcome_from_index(o);
            worst = std::max(worst, std::abs(alice_marginal(s, 1, out) - alice_marginal(s, 2, out)));
            worst = std::max(worst, std::abs(bob_marginal(1, s, out) - bob_marginal(2, s, out)));
        }
    }
    return worst;
}

CountsTable& CountsTable::operator+=(const CountsTable& other) {
    for (std::size_t i = 0; i < kCells; ++i) n_[i] += other.n_[i];
    return *this;
}

std::uint64_t CountsTable::total() const {
    return std::accumulate(n_.begin(), n_.end(), std::uint64_t{0});
}

std::uint64_t CountsTable::setting_total(int x, int y) const {
    std::size_t base = setting_pair_index(x, y) * 9;
    return std::accumulate(n_.begin() + static_cast<std::ptrdiff_t>(base),
                           n_.begin() + static_cast<std::ptrdiff_t>(base + 9), std::uint64_t{0});
}

bool CountsTable::has_all_setting_pairs() const {
    for (int x = 1; x <= kSettings; ++x) {
        for (int y = 1; y <= kSettings; ++y) {
            if (setting_total(x, y) == 0) return false;
        }
    }
    return true;
}

JointDistribution CountsTable::frequencies(const SettingWeights& weights) const {
    JointDistribution::Table t{};
    for (int x = 1; x <= kSettings; ++x) {
        for (int y = 1; y <= kSettings; ++y) {
            std::uint64_t n_xy = setting_total(x, y);
            if (n_xy == 0) {
                throw InsufficientDataError("setting pair (" + std::to_string(x) + "," +
                                            std::to_string(y) + ") has no trials");
            }
            std::size_t base = setting_pair_index(x, y) * 9;
            for (std::size_t k = 0; k < 9; ++k) {
                t[base + k] = static_cast<double>(n_[base + k]) / static_cast<double>(n_xy);
            }
        }
    }
    return JointDistribution(t, weights);
}

std::string cell_key(std::size_t cell) {
    Cell c = cell_at(cell);
    return std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(index_of(c.a)) +
           "," + std::to_string(index_of(c.b));
}

}  // namespace hardy
