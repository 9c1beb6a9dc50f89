#pragma once

#include <array>

#include "hardy/distribution.hpp"
#include "hardy/quantum.hpp"

namespace hardy {

// State parameter and the four analyzer angles, all in radians.
struct HardyDesign {
    double theta = 0.0;
    double theta_a1 = 0.0;
    double theta_a2 = 0.0;
    double theta_b1 = 0.0;
    double theta_b2 = 0.0;

    double alice_angle(int x) const { return x == 1 ? theta_a1 : theta_a2; }
    double bob_angle(int y) const { return y == 1 ? theta_b1 : theta_b2; }
};

// Analyzer angles that make the three Hardy conditions vanish for |Psi(theta)>:
//   tan(theta_a2/2) =  (cot theta)^{1/2},  tan(theta_b2/2) = -(tan theta)^{1/2},
//   tan(theta_a1/2) = -(cot theta)^{3/2},  tan(theta_b1/2) =  (tan theta)^{3/2}.
HardyDesign design_from_theta(double theta);

// Closed-form maximiser of the Hardy value at symmetric efficiency eta.
// Throws DomainError unless eta lies in (2/3, 1].
double optimal_theta(double eta);
HardyDesign optimal_design(double eta);
// Maximal Hardy value at efficiency eta; accepts the closed range [2/3, 1]
// so that the threshold value itself can be evaluated.
double max_hardy_value(double eta);

struct IdealHardyProbabilities {
    double p00_11 = 0.0;  // P(00|A1B1)
    double p0u_12 = 0.0;  // P(0u|A1B2)
    double pu0_21 = 0.0;  // P(u0|A2B1)
};

// Closed forms for the Hardy-design state with symmetric, lossy but
// otherwise ideal detectors. theta in (0, pi/4), eta in [0, 1].
IdealHardyProbabilities ideal_hardy_probabilities(double theta, double eta);
double hardy_function(double theta, double eta);

// Per-path detection efficiencies (path 0 = transmission, path 1 =
// reflection), Werner visibility, per-detector per-trial dark-click
// probability and mean number of pairs per pulse.
struct ImperfectionModel {
    double eta_a0 = 1.0;
    double eta_a1 = 1.0;
    double eta_b0 = 1.0;
    double eta_b1 = 1.0;
    double visibility = 1.0;
    double dark_prob = 0.0;
    double mean_pairs = 0.01;

    static ImperfectionModel symmetric(double eta, double visibility = 1.0, double dark_prob = 0.0,
                                       double mean_pairs = 0.01);

    double alice_efficiency(Outcome path) const { return path == Outcome::zero ? eta_a0 : eta_a1; }
    double bob_efficiency(Outcome path) const { return path == Outcome::zero ? eta_b0 : eta_b1; }

    // Throws ValidationError when a field is out of range.
    void validate() const;
};

inline constexpr double kDefaultMeanPairs = 0.01;
inline constexpr double kDefaultDarkProb = 2.5e-5;  // 5 counts/s at a 200 kHz trial rate

enum class PairMode {
    poisson,    // Poisson number of pairs per trial
    fixed_one,  // exactly one pair per trial
};

// Analytic outcome distribution. In fixed_one mode the distribution is
// conditioned on a single pair. In poisson mode the vacuum (probability
// exp(-mean_pairs)) yields (u, u) before dark clicks and every non-empty
// pulse is treated as one pair; multi-pair emission is left to the
// Monte Carlo engine. Dark clicks are composed exactly per station.
JointDistribution predict_distribution(const HardyDesign& design, const ImperfectionModel& imp,
                                       PairMode mode,
                                       const SettingWeights& weights = SettingWeights::uniform());

// The six probabilities entering the inconclusive-aware Hardy inequality.
struct HardyTerms {
    double p00_11 = 0.0;
    double p0u_12 = 0.0;
    double pu0_21 = 0.0;
    double eps1 = 0.0;  // P(00|A2B2)
    double eps2 = 0.0;  // P(01|A1B2)
    double eps3 = 0.0;  // P(10|A2B1)
};

struct HardyReport {
    HardyTerms terms;
    double hardy_value = 0.0;
    double sigma = 0.0;

    static HardyReport from_terms(const HardyTerms& terms, double sigma = 0.0);
};

// P_Hardy = P(00|A1B1) - P(0u|A1B2) - P(u0|A2B1) - (eps1 + eps2 + eps3).
double hardy_value(const HardyTerms& t);
HardyTerms hardy_terms(const JointDistribution& dist);
HardyReport hardy_value_from_distribution(const JointDistribution& dist);

struct MeanPairsFit {
    double pair_fraction = 0.0;  // 1 - exp(-mu)
    double mean_pairs = 0.0;
    double chi2 = 0.0;
};

// Weighted least-squares estimate of the non-vacuum fraction 1 - exp(-mu)
// that best maps the single-pair prediction of `imp` onto observed Hardy
// probabilities with the given standard uncertainties. Dark clicks are
// ignored in the fit.
MeanPairsFit fit_mean_pairs(const HardyTerms& observed, const HardyTerms& uncertainty,
                            const HardyDesign& design, const ImperfectionModel& imp);

// Hardy probabilities measured over 4.32e9 trials of the deployed setup
// (eta ~ 0.82, F = 0.991) and their quoted one-sigma uncertainties.
HardyTerms observed_hardy_terms();
HardyTerms observed_hardy_uncertainties();

struct FidelityPrediction {
    double visibility = 1.0;
    double single_pair = 0.0;   // P_Hardy given exactly one pair
    double mean_pairs = 0.0;    // fitted to the observed terms
    double pair_fraction = 0.0;
    double calibrated = 0.0;    // P_Hardy per trial, vacuum pulses included
};

// Werner-model Hardy value of the optimal design at (eta, fidelity). The
// per-trial value also accounts for empty pulses, with the pair rate fitted
// to the observed terms.
FidelityPrediction predict_at_fidelity(double eta, double fidelity);

}  // namespace hardy
