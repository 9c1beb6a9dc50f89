#include "hardy/hardy_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hardy/errors.hpp"

namespace hardy {
namespace {

constexpr double kTwoThirds = 2.0 / 3.0;

void require_efficiency(double eta) {
    if (!(eta > kTwoThirds && eta <= 1.0)) {
        throw DomainError("no positive Hardy value achievable: efficiency must exceed 2/3 and be at most 1 (got " +
                          std::to_string(eta) + ")");
    }
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

// Row-stochastic map from a station's click pattern before dark counts
// (click on 0, click on 1, no click) to its recorded outcome (0, 1, u).
using StationMap = std::array<std::array<double, 3>, 3>;

StationMap dark_click_map(double d) {
    double keep = 1.0 - d;
    StationMap m{};
    m[0] = {keep, 0.0, d};
    m[1] = {0.0, keep, d};
    m[2] = {d * keep, d * keep, keep * keep + d * d};
    return m;
}

}  // namespace

HardyDesign design_from_theta(double theta) {
    if (!(theta > 0.0 && theta < std::numbers::pi / 2)) {
        throw DomainError("design angle formulas need theta in (0, pi/2)");
    }
    double cot = std::cos(theta) / std::sin(theta);
    double tan = 1.0 / cot;
    HardyDesign d;
    d.theta = theta;
    d.theta_a2 = 2.0 * std::atan(std::sqrt(cot));
    d.theta_b2 = -2.0 * std::atan(std::sqrt(tan));
    d.theta_a1 = -2.0 * std::atan(std::pow(cot, 1.5));
    d.theta_b1 = 2.0 * std::atan(std::pow(tan, 1.5));
    return d;
}

double optimal_theta(double eta) {
    require_efficiency(eta);
    return 0.5 * std::asin(3.0 - std::sqrt((6.0 * eta - 1.0) / (2.0 * eta - 1.0)));
}

HardyDesign optimal_design(double eta) { return design_from_theta(optimal_theta(eta)); }

double max_hardy_value(double eta) {
    if (!(eta >= kTwoThirds - 1e-15 && eta <= 1.0)) {
        throw DomainError("efficiency must lie in [2/3, 1]");
    }
    double root = std::sqrt(1.0 + 4.0 * eta * (3.0 * eta - 2.0));
    return 0.5 * (1.0 - root) + 3.0 * eta * (1.0 - 3.0 * eta + root);
}

IdealHardyProbabilities ideal_hardy_probabilities(double theta, double eta) {
    if (!(theta > 0.0 && theta < std::numbers::pi / 4)) {
        throw DomainError("theta must lie in (0, pi/4)");
    }
    if (!in_unit(eta)) {
        throw DomainError("efficiency must lie in [0, 1]");
    }
    double c = std::cos(theta);
    double s = std::sin(theta);
    double cs = c * s;
    double amp = cs * (c - s) / (1.0 - cs);
    IdealHardyProbabilities p;
    p.p00_11 = eta * eta * amp * amp;
    p.p0u_12 = eta * (1.0 - eta) * cs * cs / (1.0 - cs);
    p.pu0_21 = p.p0u_12;
    return p;
}

double hardy_function(double theta, double eta) {
    auto p = ideal_hardy_probabilities(theta, eta);
    return p.p00_11 - p.p0u_12 - p.pu0_21;
}

ImperfectionModel ImperfectionModel::symmetric(double eta, double visibility, double dark_prob,
                                               double mean_pairs) {
    ImperfectionModel m;
    m.eta_a0 = m.eta_a1 = m.eta_b0 = m.eta_b1 = eta;
    m.visibility = visibility;
    m.dark_prob = dark_prob;
    m.mean_pairs = mean_pairs;
    m.validate();
    return m;
}

void ImperfectionModel::validate() const {
    if (!(in_unit(eta_a0) && in_unit(eta_a1) && in_unit(eta_b0) && in_unit(eta_b1))) {
        throw ValidationError("detection efficiencies must lie in [0, 1]");
    }
    if (!in_unit(visibility)) {
        throw ValidationError("visibility must lie in [0, 1]");
    }
    if (!(dark_prob >= 0.0 && dark_prob < 1.0)) {
        throw ValidationError("dark-click probability must lie in [0, 1)");
    }
    if (!(mean_pairs >= 0.0 && std::isfinite(mean_pairs))) {
        throw ValidationError("mean pair number must be finite and non-negative");
    }
}

JointDistribution predict_distribution(const HardyDesign& design, const ImperfectionModel& imp,
                                       PairMode mode, const SettingWeights& weights) {
    imp.validate();
    DensityMatrix rho = werner(design.theta, imp.visibility);
    StationMap dark = dark_click_map(imp.dark_prob);
    double pulse = mode == PairMode::fixed_one ? 1.0 : -std::expm1(-imp.mean_pairs);

    JointDistribution::Table table{};
    for (int x = 1; x <= kSettings; ++x) {
        Observable alice = observable_from_angle(design.alice_angle(x));
        for (int y = 1; y <= kSettings; ++y) {
            Observable bob = observable_from_angle(design.bob_angle(y));

            // Click patterns before dark counts, indexed (0, 1, none).
            std::array<std::array<double, 3>, 3> clicks{};
            for (int pa = 0; pa < 2; ++pa) {
                double ea = imp.alice_efficiency(outcome_from_index(pa));
                for (int pb = 0; pb < 2; ++pb) {
                    double eb = imp.bob_efficiency(outcome_from_index(pb));
                    double born = born_joint(rho, alice.projector(pa), bob.projector(pb));
                    clicks[pa][pb] += pulse * born * ea * eb;
                    clicks[pa][2] += pulse * born * ea * (1.0 - eb);
                    clicks[2][pb] += pulse * born * (1.0 - ea) * eb;
                    clicks[2][2] += pulse * born * (1.0 - ea) * (1.0 - eb);
                }
            }
            clicks[2][2] += 1.0 - pulse;

            std::size_t base = setting_pair_index(x, y) * 9;
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    double v = 0.0;
                    for (int ca = 0; ca < 3; ++ca) {
                        for (int cb = 0; cb < 3; ++cb) {
                            v += clicks[ca][cb] * dark[ca][a] * dark[cb][b];
                        }
                    }
                    table[base + static_cast<std::size_t>(a * 3 + b)] = clamp_probability(v);
                }
            }
        }
    }
    return JointDistribution(table, weights);
}

double hardy_value(const HardyTerms& t) {
    return t.p00_11 - t.p0u_12 - t.pu0_21 - (t.eps1 + t.eps2 + t.eps3);
}

HardyReport HardyReport::from_terms(const HardyTerms& terms, double sigma) {
    HardyReport r;
    r.terms = terms;
    r.hardy_value = hardy::hardy_value(terms);
    r.sigma = sigma;
    return r;
}

HardyTerms hardy_terms(const JointDistribution& d) {
    using enum Outcome;
    HardyTerms t;
    t.p00_11 = d(1, 1, zero, zero);
    t.p0u_12 = d(1, 2, zero, u);
    t.pu0_21 = d(2, 1, u, zero);
    t.eps1 = d(2, 2, zero, zero);
    t.eps2 = d(1, 2, zero, one);
    t.eps3 = d(2, 1, one, zero);
    return t;
}

HardyReport hardy_value_from_distribution(const JointDistribution& dist) {
    return HardyReport::from_terms(hardy_terms(dist), 0.0);
}

MeanPairsFit fit_mean_pairs(const HardyTerms& observed, const HardyTerms& uncertainty,
                            const HardyDesign& design, const ImperfectionModel& imp) {
    ImperfectionModel clean = imp;
    clean.dark_prob = 0.0;
    HardyTerms pred = hardy_terms(predict_distribution(design, clean, PairMode::fixed_one));
    const std::array<double, 6> p{pred.p00_11, pred.p0u_12, pred.pu0_21,
                                  pred.eps1,   pred.eps2,   pred.eps3};
    const std::array<double, 6> o{observed.p00_11, observed.p0u_12, observed.pu0_21,
                                  observed.eps1,   observed.eps2,   observed.eps3};
    const std::array<double, 6> s{uncertainty.p00_11, uncertainty.p0u_12, uncertainty.pu0_21,
                                  uncertainty.eps1,   uncertainty.eps2,   uncertainty.eps3};
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        if (!(s[i] > 0.0)) {
            throw DomainError("uncertainties must be positive");
        }
        double w = 1.0 / (s[i] * s[i]);
        num += w * p[i] * o[i];
        den += w * p[i] * p[i];
    }
    if (!(den > 0.0)) {
        throw DomainError("prediction carries no information about the pair rate");
    }
    MeanPairsFit fit;
    fit.pair_fraction = num / den;
    if (!(fit.pair_fraction > 0.0 && fit.pair_fraction < 1.0)) {
        throw DomainError("fitted pair fraction outside (0, 1)");
    }
    fit.mean_pairs = -std::log1p(-fit.pair_fraction);
    for (std::size_t i = 0; i < 6; ++i) {
        double r = (fit.pair_fraction * p[i] - o[i]) / s[i];
        fit.chi2 += r * r;
    }
    return fit;
}

HardyTerms observed_hardy_terms() {
    HardyTerms t;
    t.p00_11 = 3.227e-3;
    t.p0u_12 = 1.157e-3;
    t.pu0_21 = 1.154e-3;
    t.eps1 = 1.120e-4;
    t.eps2 = 1.578e-4;
    t.eps3 = 1.818e-4;
    return t;
}

HardyTerms observed_hardy_uncertainties() {
    HardyTerms t;
    t.p00_11 = 0.199e-3;
    t.p0u_12 = 0.052e-3;
    t.pu0_21 = 0.056e-3;
    t.eps1 = 0.136e-4;
    t.eps2 = 0.162e-4;
    t.eps3 = 0.171e-4;
    return t;
}

FidelityPrediction predict_at_fidelity(double eta, double fidelity) {
    FidelityPrediction out;
    out.visibility = visibility_from_fidelity(fidelity);
    HardyDesign design = optimal_design(eta);
    ImperfectionModel imp = ImperfectionModel::symmetric(eta, out.visibility, 0.0, 0.0);
    out.single_pair = hardy_value(hardy_terms(predict_distribution(design, imp, PairMode::fixed_one)));

    MeanPairsFit fit = fit_mean_pairs(observed_hardy_terms(), observed_hardy_uncertainties(), design, imp);
    out.mean_pairs = fit.mean_pairs;
    out.pair_fraction = fit.pair_fraction;
    imp.mean_pairs = fit.mean_pairs;
    out.calibrated = hardy_value(hardy_terms(predict_distribution(design, imp, PairMode::poisson)));
    return out;
}

}  // namespace hardy
