#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardy/distribution.hpp"
#include "hardy/hardy_model.hpp"

namespace hardy {

// Hardy value from counts; sigma is the quadrature sum of the per-term
// binomial standard errors sqrt(p (1 - p) / n(xy)). Throws
// InsufficientDataError when a setting pair has no trials.
HardyReport hardy_value_from_counts(const CountsTable& counts);

// Standard deviation of the Hardy value over multinomial resamples of each
// setting pair's counts.
double bootstrap_hardy_sigma(const CountsTable& counts, int resamples, std::uint64_t seed);

// sum_{abxy} p_xy f(ab|xy) log2(f(ab|xy) / p(ab|xy)), with f's setting
// weights. Returns +infinity when p vanishes where f does not.
double kl_divergence(const JointDistribution& f, const JointDistribution& p);

struct NoSignalingProjection {
    JointDistribution distribution;
    double divergence_bits = 0.0;
    double primal_residual = 0.0;        // max |marginal mismatch|, normalization
    double stationarity_residual = 0.0;  // max_i |c_i - q_i (A^T nu)_i|
    int newton_steps = 0;
};

// argmin over the no-signaling set of D_KL(f || P_NS). `start` must be
// strictly positive and no-signaling (uniform when omitted). Throws
// ConvergenceError when the KKT residuals stay above 1e-9.
NoSignalingProjection project_no_signaling(const JointDistribution& f,
                                           const std::optional<JointDistribution>& start = {});

// Deterministic local strategy: one outcome per local setting.
struct DeterministicStrategy {
    std::array<Outcome, 2> alice;  // outcome for x = 1, 2
    std::array<Outcome, 2> bob;    // outcome for y = 1, 2
};

inline constexpr std::size_t kStrategies = 81;
const std::array<DeterministicStrategy, kStrategies>& deterministic_strategies();
JointDistribution strategy_distribution(const DeterministicStrategy& s,
                                        const SettingWeights& weights = SettingWeights::uniform());
// Distribution induced by a mixture of deterministic strategies.
JointDistribution local_mixture(const std::array<double, kStrategies>& weights,
                                const SettingWeights& setting_weights = SettingWeights::uniform());

struct LhvProjection {
    std::array<double, kStrategies> weights{};
    JointDistribution distribution;
    double divergence_bits = 0.0;
    // max over strategies of sum_xy p_xy p(ab|xy)/q(ab|xy) at the strategy's
    // outcomes; equals 1 at the exact optimum.
    double max_strategy_score = 0.0;
    int newton_steps = 0;
};

// argmin over the local polytope of D_KL(p || P_LR). `start` holds strictly
// positive strategy weights summing to 1 (uniform when omitted).
LhvProjection project_lhv(const JointDistribution& p,
                          const std::optional<std::array<double, kStrategies>>& start = {});

// Sum of log ratios with compensated summation. The p-value bound is
// min(exp(-sum), 1), reported in log10 so that any magnitude is representable.
class LogPValueAccumulator {
  public:
    void add(double log_ratio, std::uint64_t count = 1);
    double log_sum() const { return sum_ + compensation_; }
    double log10_p_bound() const;

  private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

enum class PredictionWindow {
    cumulative,      // all blocks before the current one
    previous_block,  // only the block immediately before
};

struct PbrOptions {
    std::uint64_t block_size = 24'000'000;
    SettingWeights weights = SettingWeights::uniform();
    PredictionWindow window = PredictionWindow::cumulative;
};

// Per-cell log R for the next block.
struct PbrRatio {
    std::array<double, kCells> log_ratio{};
    bool trivial = true;  // R == 1
};

// R = p*_NS / p*_LR from the prediction data, rescaled so that the largest
// expectation over deterministic strategies is exactly 1. Data lacking a
// setting pair or a failed projection gives the trivial ratio.
PbrRatio pbr_ratio_from_counts(const CountsTable& data, const SettingWeights& weights);

struct PbrResult {
    std::vector<double> block_log_sums;
    double log10_p_bound = 0.0;
    std::size_t blocks = 0;
    std::uint64_t block_size = 0;
    std::uint64_t trials = 0;
    std::size_t trivial_blocks = 0;
};

// Streaming prediction-based-ratio test. Trials are cut into consecutive
// blocks; the first block uses R = 1 and later blocks use the ratio
// predicted from earlier data.
class PbrAnalyzer {
  public:
    explicit PbrAnalyzer(PbrOptions options);

    void add(const TrialRecord& record);
    void add(std::span<const TrialRecord> records);
    // Adds one complete block given by its counts; no partial block may be pending.
    void add_block(const CountsTable& block);
    // Closes a trailing partial block.
    PbrResult finish();

  private:
    void close_block();

    PbrOptions options_;
    PbrRatio ratio_;
    CountsTable current_;
    std::uint64_t in_current_ = 0;
    CountsTable pooled_;
    CountsTable previous_;
    LogPValueAccumulator acc_;
    PbrResult result_;
};

PbrResult pbr_pvalue(std::span<const TrialRecord> records, const PbrOptions& options);

struct ZTest {
    std::string label;  // e.g. "alice a=0 x=1"
    char party = 'A';
    int setting = 1;
    Outcome outcome = Outcome::zero;
    bool applicable = false;
    double z = 0.0;
    double p_value = 1.0;
};

// Two-proportion Z-tests that each outcome 0/1 of one party under a fixed
// local setting occurs with the same frequency for both remote settings.
std::array<ZTest, 8> nosignaling_ztests(const CountsTable& counts);

// Two-sided pooled two-proportion test; p = 1 when both proportions agree.
ZTest two_proportion_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2, std::uint64_t n2);

}  // namespace hardy
