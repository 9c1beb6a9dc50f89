#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace hardy {

// Station outcome; u covers both "no click" and "double click".
enum class Outcome : std::uint8_t { zero = 0, one = 1, u = 2 };

inline constexpr int kSettings = 2;  // settings are labelled 1 and 2
inline constexpr int kOutcomes = 3;
inline constexpr std::size_t kSettingPairs = 4;
inline constexpr std::size_t kCells = 36;

inline constexpr int index_of(Outcome o) { return static_cast<int>(o); }
inline constexpr Outcome outcome_from_index(int i) { return static_cast<Outcome>(i); }
char outcome_label(Outcome o);  // '0', '1' or 'u'

// One (x, y, a, b) cell of a two-setting, three-outcome Bell scenario.
struct Cell {
    int x;
    int y;
    Outcome a;
    Outcome b;
};

inline constexpr std::size_t setting_pair_index(int x, int y) {
    return static_cast<std::size_t>((x - 1) * 2 + (y - 1));
}
inline constexpr std::size_t cell_index(int x, int y, Outcome a, Outcome b) {
    return setting_pair_index(x, y) * 9 + static_cast<std::size_t>(index_of(a) * 3 + index_of(b));
}
inline constexpr Cell cell_at(std::size_t index) {
    auto pair = static_cast<int>(index / 9);
    auto ab = static_cast<int>(index % 9);
    return Cell{pair / 2 + 1, pair % 2 + 1, outcome_from_index(ab / 3), outcome_from_index(ab % 3)};
}

// Joint probability p_xy of the setting pair (x, y).
class SettingWeights {
  public:
    SettingWeights() : SettingWeights(uniform()) {}
    explicit SettingWeights(const std::array<double, kSettingPairs>& w);

    static SettingWeights uniform();
    // Independent choices with p(x = 1) = alice_first, p(y = 1) = bob_first.
    static SettingWeights product(double alice_first, double bob_first);

    double operator()(int x, int y) const { return w_[setting_pair_index(x, y)]; }
    const std::array<double, kSettingPairs>& values() const { return w_; }

  private:
    struct Raw {};
    SettingWeights(Raw, const std::array<double, kSettingPairs>& w) : w_(w) {}
    std::array<double, kSettingPairs> w_;
};

// Conditional distribution p(ab|xy) together with the setting weights.
class JointDistribution {
  public:
    using Table = std::array<double, kCells>;

    JointDistribution() : JointDistribution(uniform()) {}
    // Throws ValidationError unless every setting block is normalized
    // within 1e-10 and every entry lies in [0, 1].
    JointDistribution(const Table& conditional, const SettingWeights& weights);

    static JointDistribution uniform(const SettingWeights& weights = SettingWeights::uniform());

    double operator()(int x, int y, Outcome a, Outcome b) const {
        return p_[cell_index(x, y, a, b)];
    }
    double operator[](std::size_t cell) const { return p_[cell]; }
    const Table& conditional() const { return p_; }
    const SettingWeights& weights() const { return weights_; }

    // p_xy p(ab|xy) for the given cell.
    double joint(std::size_t cell) const;
    // Alice's marginal p(a|x, y) and Bob's marginal p(b|x, y).
    double alice_marginal(int x, int y, Outcome a) const;
    double bob_marginal(int x, int y, Outcome b) const;
    // Largest absolute difference of one-side marginals across the remote setting.
    double signaling_residual() const;

  private:
    Table p_;
    SettingWeights weights_;
};

struct TrialRecord {
    std::uint8_t x = 1;
    std::uint8_t y = 1;
    Outcome a = Outcome::u;
    Outcome b = Outcome::u;
};

// Event counts n(abxy); the total N is always the sum of the cells.
class CountsTable {
  public:
    using Table = std::array<std::uint64_t, kCells>;

    CountsTable() { n_.fill(0); }
    explicit CountsTable(const Table& counts) : n_(counts) {}

    void add(const TrialRecord& r) { ++n_[cell_index(r.x, r.y, r.a, r.b)]; }
    void add(std::size_t cell, std::uint64_t count) { n_[cell] += count; }
    CountsTable& operator+=(const CountsTable& other);

    std::uint64_t operator()(int x, int y, Outcome a, Outcome b) const {
        return n_[cell_index(x, y, a, b)];
    }
    std::uint64_t operator[](std::size_t cell) const { return n_[cell]; }
    const Table& counts() const { return n_; }

    std::uint64_t total() const;
    std::uint64_t setting_total(int x, int y) const;
    bool has_all_setting_pairs() const;

    // Conditional frequencies n(abxy)/n(xy). Throws InsufficientDataError
    // when a setting pair was never observed.
    JointDistribution frequencies(const SettingWeights& weights) const;

    bool operator==(const CountsTable&) const = default;

  private:
    Table n_;
};

std::string cell_key(std::size_t cell);  // "x,y,a,b" with u encoded as 2

}  // namespace hardy
