#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args) {
    std::string cmd = std::string(HARDY_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    std::array<char, 4096> buf;
    while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
    int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
    fs::path d = fs::temp_directory_path() / "hardy_cli_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("optimize") {
    Run r = run("optimize --eta 0.82");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(std::abs(j["design"]["theta"].get<double>() - 0.276432) < 2e-5);
    CHECK(std::abs(j["design"]["theta_a1"].get<double>() + 2.84165) < 2e-5);
    CHECK(std::abs(j["probabilities"]["P(00|A1B1)"].get<double>() - 0.040478) < 2e-5);
    CHECK(std::abs(j["max_hardy_value"].get<double>() - 0.0128816) < 2e-5);
    CHECK(j["version"].is_string());
    CHECK(j["config_hash"].get<std::string>().size() == 16);

    Run f = run("optimize --eta 0.82 --fidelity 0.9910");
    REQUIRE(f.code == 0);
    double v = json::parse(f.out)["fidelity"]["predicted_hardy_value"].get<double>();
    CHECK(std::abs(v - 5.28e-4) / 5.28e-4 < 0.05);

    CHECK(run("optimize --eta 0.5").code == 2);
    CHECK(run("optimize --eta 1.5").code == 2);
    Run csv = run("optimize --eta 0.85 --format csv");
    CHECK(csv.code == 0);
    CHECK(csv.out.rfind("eta,theta_a1", 0) == 0);
}

TEST_CASE("usage errors") {
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("--config /nonexistent/cfg.json spacetime").code == 2);
    CHECK(run("--help").code == 0);
}

TEST_CASE("simulate is reproducible") {
    fs::path a = scratch("sim_a"), b = scratch("sim_b");
    std::string args = "simulate --trials 20000 --records --seed 5";
    REQUIRE(run("--out " + a.string() + " " + args).code == 0);
    REQUIRE(run("--out " + b.string() + " --workers 3 " + args).code == 0);
    for (const char* f : {"counts.json", "records.csv", "simulate.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    json rep = json::parse(slurp(a / "simulate.json"));
    CHECK(rep["seed"] == 5);
    CHECK(rep["trials"] == 20000);

    CHECK(run("simulate --trials 0").code == 2);
    CHECK(run("--out /proc/forbidden/dir simulate --trials 10").code == 3);

    fs::path cfg = scratch("cfg") / "cfg.json";
    write(cfg, R"({"simulation": {"n_trials": 0}})");
    CHECK(run("--config " + cfg.string() + " simulate").code == 2);
    write(cfg, R"({"simulation": {"n_trails": 10}})");
    CHECK(run("--config " + cfg.string() + " simulate").code == 2);
    // Flags override the file.
    write(cfg, R"({"seed": 3, "simulation": {"n_trials": 10, "pair_mode": "fixed_one"}})");
    Run o = run("--config " + cfg.string() + " simulate --trials 30");
    REQUIRE(o.code == 0);
    CHECK(json::parse(o.out)["trials"] == 30);
    CHECK(json::parse(o.out)["seed"] == 3);
}

TEST_CASE("one-percent-scale simulate run") {
    // 1% of the full trial count at eta 0.822, F = 0.991, default dark and
    // pair rate. Positive at ~2.7 SE expected, so the seed stays fixed.
    fs::path cfg = scratch("one_percent") / "cfg.json";
    write(cfg, R"({"seed": 2, "simulation": {"eta": 0.822, "visibility": 0.988, "n_trials": 43200000}})");
    Run r = run("--config " + cfg.string() + " simulate");
    REQUIRE(r.code == 0);
    json rep = json::parse(r.out);
    CHECK(rep["trials"] == 43200000);
    double got = rep["hardy"]["hardy_value"];
    double sigma = rep["hardy"]["sigma"];
    double want = rep["predicted_hardy_value"];
    CHECK(got > 0);
    CHECK(want > 0);
    CHECK(std::abs(got - want) < 3 * sigma);
}

TEST_CASE("analyze") {
    fs::path d = scratch("analyze");
    // Six observed probabilities, n(xy) = 1.08e9 each.
    const double n = 1.08e9;
    auto c = [&](double p) { return static_cast<long long>(std::llround(p * n)); };
    json counts = json::object();
    counts["1,1,0,0"] = c(3.227e-3);
    counts["1,2,0,2"] = c(1.157e-3);
    counts["2,1,2,0"] = c(1.154e-3);
    counts["2,2,0,0"] = c(1.120e-4);
    counts["1,2,0,1"] = c(1.578e-4);
    counts["2,1,1,0"] = c(1.818e-4);
    long long total = 0;
    for (const char* xy : {"1,1", "1,2", "2,1", "2,2"}) {
        long long used = 0;
        for (auto& [k, v] : counts.items())
            if (k.rfind(xy, 0) == 0) used += v.get<long long>();
        counts[std::string(xy) + ",2,2"] = static_cast<long long>(n) - used;
        total += static_cast<long long>(n);
    }
    write(d / "counts.json", json{{"total", total}, {"counts", counts}}.dump());
    Run r = run("analyze " + (d / "counts.json").string());
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(std::abs(j["hardy"]["hardy_value"].get<double>() - 4.646e-4) < 5e-7);
    CHECK(j["log10_p_bound"].is_null());
    CHECK(j["ztests"].size() == 8);

    std::string uu = "x,y,a,b\n";
    for (int i = 0; i < 400; ++i) uu += std::to_string(1 + i % 2) + "," + std::to_string(1 + (i / 2) % 2) + ",2,2\n";
    write(d / "uu.csv", uu);
    Run u = run("analyze --block-size 100 " + (d / "uu.csv").string());
    REQUIRE(u.code == 0);
    json ju = json::parse(u.out);
    CHECK(ju["hardy"]["hardy_value"].get<double>() == 0.0);
    CHECK(ju["log10_p_bound"].get<double>() == 0.0);
    CHECK(ju["blocks"] == 4);

    write(d / "bad.csv", "x,y,a,b\n1,1,0,0\n1,2,7,0\n");
    CHECK(run("analyze " + (d / "bad.csv").string()).code == 4);
    CHECK(run("analyze " + (d / "missing.csv").string()).code == 3);

    Run boot = run("analyze --sigma bootstrap " + (d / "counts.json").string());
    CHECK(boot.code == 0);
    CHECK(json::parse(boot.out)["hardy"]["sigma"].get<double>() > 0);
}

TEST_CASE("analyze simulated records") {
    fs::path d = scratch("analyze_sim");
    REQUIRE(run("--out " + d.string() + " simulate --trials 400000 --pair-mode fixed_one --records").code == 0);
    Run r = run("analyze --block-size 100000 " + (d / "records.csv").string());
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["blocks"] == 4);
    CHECK(j["log10_p_bound"].get<double>() < -5);
    CHECK(j["hardy"]["hardy_value"].get<double>() > 0);
}

TEST_CASE("tomography") {
    fs::path d = scratch("tomo");
    // Counts for |Psi(0.2764)> in the six-state bases, N = 1e4.
    const double c = std::cos(0.2764), s = std::sin(0.2764);
    const std::array<std::array<double, 2>, 6> re{{{1, 0}, {0, 1}, {M_SQRT1_2, M_SQRT1_2}, {M_SQRT1_2, -M_SQRT1_2},
                                                   {M_SQRT1_2, 0}, {M_SQRT1_2, 0}}};
    const std::array<double, 6> im_v{0, 0, 0, 0, M_SQRT1_2, -M_SQRT1_2};
    const char* names = "HVDARL";
    json counts = json::object();
    for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
            // <phi_a phi_b | Psi> with Psi = c|01> + s|10>; conjugate bras.
            std::complex<double> ua0(re[a][0], 0), ua1(re[a][1], -im_v[a]);
            std::complex<double> ub0(re[b][0], 0), ub1(re[b][1], -im_v[b]);
            double p = std::norm(ua0 * ub1 * c + ua1 * ub0 * s);
            counts[std::string{names[a], names[b]}] = 1e4 * p;
        }
    }
    write(d / "t.json", json{{"N", 1e4}, {"counts", counts}}.dump());
    Run r = run("tomography --theta 0.2764 " + (d / "t.json").string());
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["fidelity"].get<double>() > 0.9999);

    write(d / "bad.json", R"({"counts": {"HH": 1}})");
    CHECK(run("tomography " + (d / "bad.json").string()).code == 4);
}

TEST_CASE("spacetime") {
    Run r = run("spacetime");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["locality"]["margin_alice_ns"] == 85.8);
    CHECK(j["locality"]["margin_bob_ns"] == 56.0);
    CHECK(j["measurement_independence"]["margin_alice_ns"] == 65.1);
    CHECK(j["measurement_independence"]["margin_bob_ns"] == 66.5);
    CHECK(j["pass"] == true);

    fs::path cfg = scratch("st") / "cfg.json";
    write(cfg, R"({"spacetime": {"t_delay1": 400}})");
    Run f = run("--config " + cfg.string() + " spacetime");
    REQUIRE(f.code == 0);
    CHECK(json::parse(f.out)["locality"]["pass"] == false);
    write(cfg, R"({"spacetime": {"t_m1": -5}})");
    CHECK(run("--config " + cfg.string() + " spacetime").code == 2);
}

}
