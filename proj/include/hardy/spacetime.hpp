#pragma once

namespace hardy {

// Station geometry and timing. Distances in meters, times in ns.
struct SpacetimeConfig {
    double sa = 0.0;   // free-space source-Alice distance
    double sb = 0.0;
    double lsa = 0.0;  // effective optical path source-Alice
    double lsb = 0.0;
    double t_e = 0.0;  // pair generation
    double t_qrng1 = 0.0;
    double t_qrng2 = 0.0;
    double t_delay1 = 0.0;
    double t_delay2 = 0.0;
    double t_pc1 = 0.0;
    double t_pc2 = 0.0;
    double t_m1 = 0.0;
    double t_m2 = 0.0;
    double c = 0.299792458;  // m/ns

    // Throws ValidationError on negative durations, non-positive distances
    // or an optical path shorter than the straight line.
    void validate() const;
};

// Layout of the deployed experiment (fiber path given as effective length).
SpacetimeConfig reference_configuration();

struct SeparationCheck {
    double margin_first = 0.0;   // ns
    double margin_second = 0.0;  // ns
    bool pass = false;           // both margins strictly positive
};

// Each station's measurement finishes before light from the other
// station's setting choice can arrive.
SeparationCheck check_locality(const SpacetimeConfig& cfg);

// Each setting choice is space-like separated from pair emission.
SeparationCheck check_measurement_independence(const SpacetimeConfig& cfg);

}  // namespace hardy
