#include "hardy/spacetime.hpp"

#include <cmath>
#include <string>

#include "hardy/errors.hpp"

namespace hardy {

void SpacetimeConfig::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    const double durations[] = {t_e, t_qrng1, t_qrng2, t_delay1, t_delay2, t_pc1, t_pc2, t_m1, t_m2};
    for (double d : durations) {
        if (!finite(d) || d < 0.0) throw ValidationError("timing values must be finite and >= 0");
    }
    if (!finite(sa) || !finite(sb) || sa <= 0.0 || sb <= 0.0) {
        throw ValidationError("station distances must be positive");
    }
    if (!finite(lsa) || !finite(lsb) || lsa < sa || lsb < sb) {
        throw ValidationError("optical path must be at least the straight-line distance");
    }
    if (!finite(c) || c <= 0.0) throw ValidationError("speed of light must be positive");
}

SpacetimeConfig reference_configuration() {
    SpacetimeConfig cfg;
    cfg.sa = 93.0;
    cfg.sb = 90.0;
    cfg.lsa = 188.0;
    cfg.lsb = 169.0;
    cfg.t_e = 10.0;
    cfg.t_qrng1 = 96.0;
    cfg.t_qrng2 = 96.0;
    cfg.t_delay1 = 270.0;
    cfg.t_delay2 = 230.0;
    cfg.t_pc1 = 112.0;
    cfg.t_pc2 = 100.0;
    cfg.t_m1 = 55.0;
    cfg.t_m2 = 100.0;
    return cfg;
}

SeparationCheck check_locality(const SpacetimeConfig& cfg) {
    cfg.validate();
    double flight = (cfg.sa + cfg.sb) / cfg.c;
    double skew = (cfg.lsa - cfg.lsb) / cfg.c;
    SeparationCheck out;
    out.margin_first = flight - (cfg.t_e - skew + cfg.t_qrng1 + cfg.t_delay1 + cfg.t_pc1 + cfg.t_m2);
    out.margin_second = flight - (cfg.t_e + skew + cfg.t_qrng2 + cfg.t_delay2 + cfg.t_pc2 + cfg.t_m1);
    out.pass = out.margin_first > 0.0 && out.margin_second > 0.0;
    return out;
}

SeparationCheck check_measurement_independence(const SpacetimeConfig& cfg) {
    cfg.validate();
    SeparationCheck out;
    out.margin_first = cfg.sa / cfg.c - (cfg.lsa / cfg.c - cfg.t_delay1 - cfg.t_pc1);
    out.margin_second = cfg.sb / cfg.c - (cfg.lsb / cfg.c - cfg.t_delay2 - cfg.t_pc2);
    out.pass = out.margin_first > 0.0 && out.margin_second > 0.0;
    return out;
}

}  // namespace hardy
