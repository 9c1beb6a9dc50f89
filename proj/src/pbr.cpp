#include "hardy/pbr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hardy/errors.hpp"
#include "hardy/kl_projection.hpp"
#include "hardy/simulator.hpp"

namespace hardy {
namespace {

constexpr double kResidualTolerance = 1e-9;
constexpr double kZeroCell = 1e-12;
constexpr double kMixture = 1e-9;

Eigen::VectorXd joint_weights(const JointDistribution& f) {
    Eigen::VectorXd c(static_cast<Eigen::Index>(kCells));
    for (std::size_t i = 0; i < kCells; ++i) c(static_cast<Eigen::Index>(i)) = f.joint(i);
    return c;
}

JointDistribution::Table to_table(const Eigen::VectorXd& q) {
    JointDistribution::Table t{};
    for (std::size_t pair = 0; pair < kSettingPairs; ++pair) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 9; ++k) {
            double v = std::max(0.0, q(static_cast<Eigen::Index>(pair * 9 + k)));
            t[pair * 9 + k] = v;
            sum += v;
        }
        for (std::size_t k = 0; k < 9; ++k) t[pair * 9 + k] /= sum;
    }
    return t;
}

// Rows: 4 normalizations, then Alice's and Bob's marginal equalities for
// outcomes 0 and 1 (u follows from normalization).
Eigen::MatrixXd no_signaling_constraints() {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(12, static_cast<Eigen::Index>(kCells));
    Eigen::Index row = 0;
    for (std::size_t pair = 0; pair < kSettingPairs; ++pair, ++row) {
        for (std::size_t k = 0; k < 9; ++k) e(row, static_cast<Eigen::Index>(pair * 9 + k)) = 1.0;
    }
    for (int s = 1; s <= kSettings; ++s) {
        for (int o = 0; o < 2; ++o, ++row) {
            Outcome out = outcome_from_index(o);
            for (int other = 0; other < kOutcomes; ++other) {
                Outcome ob = outcome_from_index(other);
                e(row, static_cast<Eigen::Index>(cell_index(s, 1, out, ob))) += 1.0;
                e(row, static_cast<Eigen::Index>(cell_index(s, 2, out, ob))) -= 1.0;
            }
        }
    }
    for (int s = 1; s <= kSettings; ++s) {
        for (int o = 0; o < 2; ++o, ++row) {
            Outcome out = outcome_from_index(o);
            for (int other = 0; other < kOutcomes; ++other) {
                Outcome oa = outcome_from_index(other);
                e(row, static_cast<Eigen::Index>(cell_index(1, s, oa, out))) += 1.0;
                e(row, static_cast<Eigen::Index>(cell_index(2, s, oa, out))) -= 1.0;
            }
        }
    }
    return e;
}

Eigen::VectorXd no_signaling_rhs() {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(12);
    r.head(4).setOnes();
    return r;
}

const Eigen::MatrixXd& strategy_map() {
    static const Eigen::MatrixXd map = [] {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kCells),
                                                  static_cast<Eigen::Index>(kStrategies));
        const auto& strategies = deterministic_strategies();
        for (std::size_t l = 0; l < kStrategies; ++l) {
            for (int x = 1; x <= kSettings; ++x) {
                for (int y = 1; y <= kSettings; ++y) {
                    std::size_t cell = cell_index(x, y, strategies[l].alice[x - 1], strategies[l].bob[y - 1]);
                    m(static_cast<Eigen::Index>(cell), static_cast<Eigen::Index>(l)) = 1.0;
                }
            }
        }
        return m;
    }();
    return map;
}

// Expected ratio sum_xy p_xy R(a_l(x) b_l(y)|xy) for every strategy.
double max_strategy_expectation(const std::array<double, kCells>& ratio, const SettingWeights& w) {
    double best = 0.0;
    for (const auto& s : deterministic_strategies()) {
        double e = 0.0;
        for (int x = 1; x <= kSettings; ++x) {
            for (int y = 1; y <= kSettings; ++y) {
                e += w(x, y) * ratio[cell_index(x, y, s.alice[x - 1], s.bob[y - 1])];
            }
        }
        best = std::max(best, e);
    }
    return best;
}

double hardy_from_frequencies(const CountsTable& counts) {
    return hardy_value(hardy_terms(counts.frequencies(SettingWeights::uniform())));
}

}  // namespace

HardyReport hardy_value_from_counts(const CountsTable& counts) {
    JointDistribution f = counts.frequencies(SettingWeights::uniform());
    HardyTerms t = hardy_terms(f);
    auto var = [&](double p, int x, int y) {
        return p * (1.0 - p) / static_cast<double>(counts.setting_total(x, y));
    };
    double v = var(t.p00_11, 1, 1) + var(t.p0u_12, 1, 2) + var(t.pu0_21, 2, 1) + var(t.eps1, 2, 2) +
               var(t.eps2, 1, 2) + var(t.eps3, 2, 1);
    return HardyReport::from_terms(t, std::sqrt(v));
}

double bootstrap_hardy_sigma(const CountsTable& counts, int resamples, std::uint64_t seed) {
    if (resamples < 2) {
        throw DomainError("bootstrap needs at least two resamples");
    }
    JointDistribution f = counts.frequencies(SettingWeights::uniform());
    Rng rng = partition_stream(seed, 0, 1);
    double mean = 0.0;
    double m2 = 0.0;
    for (int r = 0; r < resamples; ++r) {
        CountsTable sample;
        for (int x = 1; x <= kSettings; ++x) {
            for (int y = 1; y <= kSettings; ++y) {
                // Keep n(xy) fixed and redraw the outcomes.
                std::uint64_t left = counts.setting_total(x, y);
                double mass = 1.0;
                std::size_t base = setting_pair_index(x, y) * 9;
                for (std::size_t k = 0; k < 9; ++k) {
                    double p = f[base + k];
                    std::uint64_t n = left;
                    if (k + 1 < 9 && left > 0) {
                        double q = mass > 0.0 ? std::clamp(p / mass, 0.0, 1.0) : 0.0;
                        n = std::binomial_distribution<std::uint64_t>(left, q)(rng);
                    }
                    sample.add(base + k, n);
                    left -= n;
                    mass -= p;
                }
            }
        }
        double h = hardy_from_frequencies(sample);
        double delta = h - mean;
        mean += delta / (r + 1);
        m2 += delta * (h - mean);
    }
    return std::sqrt(m2 / (resamples - 1));
}

double kl_divergence(const JointDistribution& f, const JointDistribution& p) {
    double d = 0.0;
    for (std::size_t i = 0; i < kCells; ++i) {
        double c = f.joint(i);
        if (c <= 0.0) continue;
        if (p[i] <= 0.0) return std::numeric_limits<double>::infinity();
        d += c * std::log2(f[i] / p[i]);
    }
    return std::max(d, 0.0);
}

NoSignalingProjection project_no_signaling(const JointDistribution& f,
                                           const std::optional<JointDistribution>& start) {
    CrossEntropyProblem problem;
    problem.weights = joint_weights(f);
    problem.map = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(kCells),
                                            static_cast<Eigen::Index>(kCells));
    problem.equality = no_signaling_constraints();
    problem.rhs = no_signaling_rhs();

    JointDistribution init = start.value_or(JointDistribution::uniform(f.weights()));
    Eigen::VectorXd y0(static_cast<Eigen::Index>(kCells));
    for (std::size_t i = 0; i < kCells; ++i) y0(static_cast<Eigen::Index>(i)) = init[i];

    CrossEntropySolution sol = minimize_cross_entropy(problem, y0);
    const Eigen::VectorXd& q = sol.variables;

    // Multipliers from c_i = q_i (E^T nu)_i in the least-squares sense.
    Eigen::MatrixXd scaled = q.asDiagonal() * problem.equality.transpose();
    Eigen::VectorXd nu = scaled.colPivHouseholderQr().solve(problem.weights);
    double stationarity = (problem.weights - scaled * nu).cwiseAbs().maxCoeff();
    double primal = (problem.equality * q - problem.rhs).cwiseAbs().maxCoeff();

    NoSignalingProjection out{JointDistribution(to_table(q), f.weights()), 0.0, primal,
                              stationarity, sol.newton_steps};
    out.primal_residual = std::max(primal, out.distribution.signaling_residual());
    out.divergence_bits = kl_divergence(f, out.distribution);
    if (!(out.primal_residual < kResidualTolerance && out.stationarity_residual < kResidualTolerance)) {
        throw ConvergenceError("no-signaling projection did not converge: primal residual " +
                               std::to_string(out.primal_residual) + ", stationarity residual " +
                               std::to_string(out.stationarity_residual));
    }
    return out;
}

const std::array<DeterministicStrategy, kStrategies>& deterministic_strategies() {
    static const std::array<DeterministicStrategy, kStrategies> all = [] {
        std::array<DeterministicStrategy, kStrategies> s{};
        for (std::size_t l = 0; l < kStrategies; ++l) {
            int code = static_cast<int>(l);
            s[l].bob[1] = outcome_from_index(code % 3);
            s[l].bob[0] = outcome_from_index(code / 3 % 3);
            s[l].alice[1] = outcome_from_index(code / 9 % 3);
            s[l].alice[0] = outcome_from_index(code / 27 % 3);
        }
        return s;
    }();
    return all;
}

JointDistribution strategy_distribution(const DeterministicStrategy& s, const SettingWeights& weights) {
    JointDistribution::Table t{};
    for (int x = 1; x <= kSettings; ++x) {
        for (int y = 1; y <= kSettings; ++y) t[cell_index(x, y, s.alice[x - 1], s.bob[y - 1])] = 1.0;
    }
    return JointDistribution(t, weights);
}

JointDistribution local_mixture(const std::array<double, kStrategies>& weights,
                                const SettingWeights& setting_weights) {
    Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(kStrategies));
    if (w.minCoeff() < 0.0 || std::abs(w.sum() - 1.0) > 1e-12) {
        throw ValidationError("strategy weights must be non-negative and sum to 1");
    }
    return JointDistribution(to_table(strategy_map() * w), setting_weights);
}

LhvProjection project_lhv(const JointDistribution& p,
                          const std::optional<std::array<double, kStrategies>>& start) {
    CrossEntropyProblem problem;
    problem.weights = joint_weights(p);
    problem.map = strategy_map();
    problem.equality = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(kStrategies));
    problem.rhs = Eigen::VectorXd::Ones(1);

    Eigen::VectorXd y0 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(kStrategies),
                                                   1.0 / static_cast<double>(kStrategies));
    if (start) {
        for (std::size_t l = 0; l < kStrategies; ++l) y0(static_cast<Eigen::Index>(l)) = (*start)[l];
    }
    CrossEntropySolution sol = minimize_cross_entropy(problem, y0);
    if (!sol.variables.allFinite()) {
        throw ConvergenceError("local projection produced non-finite weights");
    }

    LhvProjection out;
    double total = sol.variables.sum();
    for (std::size_t l = 0; l < kStrategies; ++l) {
        out.weights[l] = std::max(0.0, sol.variables(static_cast<Eigen::Index>(l))) / total;
    }
    out.distribution = local_mixture(out.weights, p.weights());
    out.divergence_bits = kl_divergence(p, out.distribution);
    out.newton_steps = sol.newton_steps;
    std::array<double, kCells> ratio{};
    for (std::size_t i = 0; i < kCells; ++i) {
        ratio[i] = p[i] > 0.0 ? p[i] / out.distribution[i] : 0.0;
    }
    out.max_strategy_score = max_strategy_expectation(ratio, p.weights());
    if (!std::isfinite(out.divergence_bits)) {
        throw ConvergenceError("local projection left an observed cell with zero probability");
    }
    return out;
}

void LogPValueAccumulator::add(double log_ratio, std::uint64_t count) {
    if (count == 0 || log_ratio == 0.0) return;
    double term = log_ratio * static_cast<double>(count);
    // Neumaier summation.
    double t = sum_ + term;
    if (std::abs(sum_) >= std::abs(term)) {
        compensation_ += (sum_ - t) + term;
    } else {
        compensation_ += (term - t) + sum_;
    }
    sum_ = t;
}

double LogPValueAccumulator::log10_p_bound() const {
    return std::min(-log_sum() / std::numbers::ln10, 0.0);
}

PbrRatio pbr_ratio_from_counts(const CountsTable& data, const SettingWeights& weights) {
    PbrRatio out;
    if (!data.has_all_setting_pairs()) return out;
    try {
        JointDistribution f = data.frequencies(weights);
        NoSignalingProjection ns = project_no_signaling(f);
        LhvProjection lr = project_lhv(ns.distribution);

        std::array<double, kCells> num{};
        std::array<double, kCells> den{};
        bool num_zero = false;
        bool den_zero = false;
        for (std::size_t i = 0; i < kCells; ++i) {
            num[i] = ns.distribution[i];
            den[i] = lr.distribution[i];
            num_zero = num_zero || num[i] < kZeroCell;
            den_zero = den_zero || (den[i] < kZeroCell && num[i] > den[i]);
        }
        if (den_zero) {
            for (std::size_t i = 0; i < kCells; ++i) {
                num[i] = (1.0 - kMixture) * num[i] + kMixture / 9.0;
                den[i] = (1.0 - kMixture) * den[i] + kMixture / 9.0;
            }
        } else if (num_zero) {
            // Mixing toward the local fit gives R' = (1 - eps) R + eps: still
            // bounded on local strategies, and never exactly zero.
            for (std::size_t i = 0; i < kCells; ++i) num[i] = (1.0 - kMixture) * num[i] + kMixture * den[i];
        }
        std::array<double, kCells> ratio{};
        for (std::size_t i = 0; i < kCells; ++i) ratio[i] = num[i] / den[i];
        double scale = max_strategy_expectation(ratio, weights);
        if (!(scale > 0.0) || !std::isfinite(scale)) return out;
        for (std::size_t i = 0; i < kCells; ++i) out.log_ratio[i] = std::log(ratio[i] / scale);
        out.trivial = false;
    } catch (const ConvergenceError&) {
        return PbrRatio{};
    }
    return out;
}

PbrAnalyzer::PbrAnalyzer(PbrOptions options) : options_(std::move(options)) {
    if (options_.block_size < 1) {
        throw DomainError("block size must be at least 1");
    }
    result_.block_size = options_.block_size;
}

void PbrAnalyzer::add(const TrialRecord& record) {
    current_.add(record);
    if (++in_current_ == options_.block_size) close_block();
}

void PbrAnalyzer::add(std::span<const TrialRecord> records) {
    for (const auto& r : records) add(r);
}

void PbrAnalyzer::add_block(const CountsTable& block) {
    if (in_current_ != 0) {
        throw DomainError("cannot add a whole block while a partial block is pending");
    }
    current_ = block;
    in_current_ = block.total();
    close_block();
}

void PbrAnalyzer::close_block() {
    double block_sum = 0.0;
    if (!ratio_.trivial) {
        LogPValueAccumulator local;
        for (std::size_t i = 0; i < kCells; ++i) local.add(ratio_.log_ratio[i], current_[i]);
        block_sum = local.log_sum();
        for (std::size_t i = 0; i < kCells; ++i) acc_.add(ratio_.log_ratio[i], current_[i]);
    } else {
        ++result_.trivial_blocks;
    }
    result_.block_log_sums.push_back(block_sum);
    ++result_.blocks;
    result_.trials += in_current_;

    pooled_ += current_;
    previous_ = current_;
    const CountsTable& basis =
        options_.window == PredictionWindow::cumulative ? pooled_ : previous_;
    ratio_ = pbr_ratio_from_counts(basis, options_.weights);

    current_ = CountsTable{};
    in_current_ = 0;
}

PbrResult PbrAnalyzer::finish() {
    if (in_current_ > 0) close_block();
    result_.log10_p_bound = acc_.log10_p_bound();
    return result_;
}

PbrResult pbr_pvalue(std::span<const TrialRecord> records, const PbrOptions& options) {
    PbrAnalyzer analyzer(options);
    analyzer.add(records);
    return analyzer.finish();
}

ZTest two_proportion_ztest(std::uint64_t k1, std::uint64_t n1, std::uint64_t k2, std::uint64_t n2) {
    ZTest t;
    if (n1 == 0 || n2 == 0) return t;
    t.applicable = true;
    double dn1 = static_cast<double>(n1);
    double dn2 = static_cast<double>(n2);
    double p1 = static_cast<double>(k1) / dn1;
    double p2 = static_cast<double>(k2) / dn2;
    double pooled = static_cast<double>(k1 + k2) / (dn1 + dn2);
    double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / dn1 + 1.0 / dn2));
    if (!(se > 0.0)) {
        t.z = 0.0;
        t.p_value = 1.0;
        return t;
    }
    t.z = (p1 - p2) / se;
    t.p_value = std::erfc(std::abs(t.z) / std::numbers::sqrt2);
    return t;
}

std::array<ZTest, 8> nosignaling_ztests(const CountsTable& counts) {
    std::array<ZTest, 8> out;
    std::size_t k = 0;
    for (int s = 1; s <= kSettings; ++s) {
        for (int o = 0; o < 2; ++o) {
            Outcome outcome = outcome_from_index(o);
            std::uint64_t hits1 = 0;
            std::uint64_t hits2 = 0;
            for (int b = 0; b < kOutcomes; ++b) {
                hits1 += counts(s, 1, outcome, outcome_from_index(b));
                hits2 += counts(s, 2, outcome, outcome_from_index(b));
            }
            ZTest t = two_proportion_ztest(hits1, counts.setting_total(s, 1), hits2,
                                           counts.setting_total(s, 2));
            t.party = 'A';
            t.setting = s;
            t.outcome = outcome;
            t.label = "alice a=" + std::to_string(o) + " x=" + std::to_string(s);
            out[k++] = t;
        }
    }
    for (int s = 1; s <= kSettings; ++s) {
        for (int o = 0; o < 2; ++o) {
            Outcome outcome = outcome_from_index(o);
            std::uint64_t hits1 = 0;
            std::uint64_t hits2 = 0;
            for (int a = 0; a < kOutcomes; ++a) {
                hits1 += counts(1, s, outcome_from_index(a), outcome);
                hits2 += counts(2, s, outcome_from_index(a), outcome);
            }
            ZTest t = two_proportion_ztest(hits1, counts.setting_total(1, s), hits2,
                                           counts.setting_total(2, s));
            t.party = 'B';
            t.setting = s;
            t.outcome = outcome;
            t.label = "bob b=" + std::to_string(o) + " y=" + std::to_string(s);
            out[k++] = t;
        }
    }
    return out;
}

}  // namespace hardy
