// hardy: batch front end for design, simulation, analysis, tomography and
// spacetime checks. Every command prints a JSON report on stdout and, with
// --out, also writes it (plus any data files) into that directory.
//
// Precedence: built-in defaults < --config file < command-line flags.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hardy/errors.hpp"
#include "hardy/hardy_model.hpp"
#include "hardy/io.hpp"
#include "hardy/pbr.hpp"
#include "hardy/quantum.hpp"
#include "hardy/simulator.hpp"
#include "hardy/spacetime.hpp"
#include "hardy/tomography.hpp"

#ifndef HARDY_VERSION
#define HARDY_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hardy;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kFormat = 4 };

json default_config() {
    const SpacetimeConfig st = reference_configuration();
    return {
        {"seed", 1},
        {"workers", 0},
        {"optimize", {{"eta", 0.82}, {"fidelity", nullptr}, {"format", "json"}}},
        {"simulation",
         {{"eta", 0.82},
          {"eta_a0", nullptr},
          {"eta_a1", nullptr},
          {"eta_b0", nullptr},
          {"eta_b1", nullptr},
          {"theta", nullptr},
          {"visibility", 1.0},
          {"dark_prob", kDefaultDarkProb},
          {"mean_pairs", kDefaultMeanPairs},
          {"pair_mode", "poisson"},
          {"n_trials", 1000000},
          {"partitions", 8},
          {"setting_weights", {0.25, 0.25, 0.25, 0.25}},
          {"write_records", false}}},
        {"analysis",
         {{"input", nullptr},
          {"block_size", 24000000},
          {"window", "cumulative"},
          {"sigma_method", "binomial"},
          {"bootstrap_resamples", 200}}},
        {"tomography", {{"input", nullptr}, {"theta", nullptr}, {"eta", 0.82}, {"max_iterations", 5000}}},
        {"spacetime",
         {{"sa", st.sa},
          {"sb", st.sb},
          {"lsa", st.lsa},
          {"lsb", st.lsb},
          {"t_e", st.t_e},
          {"t_qrng1", st.t_qrng1},
          {"t_qrng2", st.t_qrng2},
          {"t_delay1", st.t_delay1},
          {"t_delay2", st.t_delay2},
          {"t_pc1", st.t_pc1},
          {"t_pc2", st.t_pc2},
          {"t_m1", st.t_m1},
          {"t_m2", st.t_m2},
          {"c", st.c}}},
    };
}

// FNV-1a over the canonical (sorted-key) serialization.
std::string config_hash(const json& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : cfg.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json load_config(const std::string& path) {
    json cfg = default_config();
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json user;
    try {
        user = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    if (!user.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : user.items()) {
        if (!cfg.contains(key)) throw ValidationError("unknown config key '" + key + "'");
        if (cfg[key].is_object()) {
            if (!value.is_object()) throw ValidationError("config section '" + key + "' must be an object");
            for (const auto& [k, v] : value.items()) {
                if (!cfg[key].contains(k)) {
                    throw ValidationError("unknown config key '" + key + "." + k + "'");
                }
            }
        }
    }
    cfg.merge_patch(user);
    return cfg;
}

// Typed lookup that turns JSON type errors into config errors.
template <typename T>
T get(const json& section, const char* key) {
    try {
        return section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config field '") + key + "' has the wrong type");
    }
}

template <typename T>
std::optional<T> get_opt(const json& section, const char* key) {
    if (!section.contains(key) || section.at(key).is_null()) return std::nullopt;
    return get<T>(section, key);
}

struct Output {
    std::optional<fs::path> dir;

    fs::path file(const std::string& name) const {
        std::error_code ec;
        fs::create_directories(*dir, ec);
        if (ec || !fs::is_directory(*dir)) throw IoError("cannot create output directory " + dir->string());
        return *dir / name;
    }

    void report(const std::string& name, const json& doc) const {
        std::string text = doc.dump(2) + "\n";
        std::cout << text;
        if (!dir) return;
        std::ofstream out(file(name), std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out) throw IoError("cannot write " + (*dir / name).string());
    }
};

json envelope(const std::string& command, const json& cfg) {
    return {{"command", command},
            {"version", HARDY_VERSION},
            {"config_hash", config_hash(cfg)},
            {"seed", cfg.at("seed")}};
}

json terms_json(const HardyTerms& t) {
    return {{"P(00|A1B1)", t.p00_11}, {"P(0u|A1B2)", t.p0u_12}, {"P(u0|A2B1)", t.pu0_21},
            {"eps1", t.eps1},         {"eps2", t.eps2},         {"eps3", t.eps3}};
}

json report_json(const HardyReport& r) {
    return {{"terms", terms_json(r.terms)}, {"hardy_value", r.hardy_value}, {"sigma", r.sigma}};
}

json design_json(const HardyDesign& d) {
    return {{"theta", d.theta},
            {"theta_a1", d.theta_a1},
            {"theta_a2", d.theta_a2},
            {"theta_b1", d.theta_b1},
            {"theta_b2", d.theta_b2}};
}

// ---------------------------------------------------------------- optimize

int cmd_optimize(const json& cfg, const Output& out) {
    const json& sec = cfg.at("optimize");
    double eta = get<double>(sec, "eta");
    auto fid = get_opt<double>(sec, "fidelity");
    std::string format = get<std::string>(sec, "format");
    if (format != "json" && format != "csv") throw ValidationError("format must be json or csv");

    HardyDesign d = optimal_design(eta);
    HardyTerms ideal =
        hardy_terms(predict_distribution(d, ImperfectionModel::symmetric(eta, 1.0, 0.0, 0.0),
                                         PairMode::fixed_one));
    // The three Hardy conditions vanish analytically; report exact zeros.
    IdealHardyProbabilities p = ideal_hardy_probabilities(d.theta, eta);
    double pmax = max_hardy_value(eta);

    json doc = envelope("optimize", cfg);
    doc["eta"] = eta;
    doc["design"] = design_json(d);
    doc["probabilities"] = {{"P(00|A2B2)", 0.0},     {"P(01|A1B2)", 0.0},     {"P(10|A2B1)", 0.0},
                            {"P(00|A1B1)", p.p00_11}, {"P(0u|A1B2)", p.p0u_12}, {"P(u0|A2B1)", p.pu0_21}};
    doc["max_hardy_value"] = pmax;
    doc["condition_residual"] = ideal.eps1 + ideal.eps2 + ideal.eps3;
    if (fid) {
        FidelityPrediction f = predict_at_fidelity(eta, *fid);
        doc["fidelity"] = {{"fidelity", *fid},
                           {"visibility", f.visibility},
                           {"single_pair_hardy_value", f.single_pair},
                           {"fitted_mean_pairs", f.mean_pairs},
                           {"predicted_hardy_value", f.calibrated}};
    }

    if (format == "json") {
        out.report("optimize.json", doc);
        return kOk;
    }
    std::ostringstream csv;
    csv.precision(9);
    csv << "eta,theta_a1,theta_a2,theta_b1,theta_b2,theta,p00_22,p01_12,p10_21,p00_11,p0u_12,pu0_21,p_max";
    if (fid) csv << ",fidelity,predicted_hardy_value";
    csv << "\n"
        << eta << ',' << d.theta_a1 << ',' << d.theta_a2 << ',' << d.theta_b1 << ',' << d.theta_b2 << ','
        << d.theta << ",0,0,0," << p.p00_11 << ',' << p.p0u_12 << ',' << p.pu0_21 << ',' << pmax;
    if (fid) csv << ',' << *fid << ',' << doc["fidelity"]["predicted_hardy_value"].get<double>();
    csv << "\n";
    std::cout << csv.str();
    if (out.dir) {
        std::ofstream f(out.file("optimize.csv"), std::ios::binary | std::ios::trunc);
        f << csv.str();
        if (!f) throw IoError("cannot write optimize.csv");
    }
    return kOk;
}

// ---------------------------------------------------------------- simulate

SimulationConfig simulation_config(const json& cfg) {
    const json& sec = cfg.at("simulation");
    double eta = get<double>(sec, "eta");
    SimulationConfig sc;
    auto theta = get_opt<double>(sec, "theta");
    sc.design = theta ? design_from_theta(*theta) : optimal_design(eta);
    ImperfectionModel imp = ImperfectionModel::symmetric(
        eta, get<double>(sec, "visibility"), get<double>(sec, "dark_prob"), get<double>(sec, "mean_pairs"));
    imp.eta_a0 = get_opt<double>(sec, "eta_a0").value_or(eta);
    imp.eta_a1 = get_opt<double>(sec, "eta_a1").value_or(eta);
    imp.eta_b0 = get_opt<double>(sec, "eta_b0").value_or(eta);
    imp.eta_b1 = get_opt<double>(sec, "eta_b1").value_or(eta);
    imp.validate();
    sc.imperfections = imp;
    auto w = get<std::vector<double>>(sec, "setting_weights");
    if (w.size() != kSettingPairs) throw ValidationError("setting_weights needs four entries");
    sc.weights = SettingWeights({w[0], w[1], w[2], w[3]});
    auto n = get<std::int64_t>(sec, "n_trials");
    if (n < 1) throw ValidationError("n_trials must be at least 1");
    sc.n_trials = static_cast<std::uint64_t>(n);
    sc.seed = get<std::uint64_t>(cfg, "seed");
    std::string mode = get<std::string>(sec, "pair_mode");
    if (mode == "poisson") {
        sc.pair_mode = PairMode::poisson;
    } else if (mode == "fixed_one") {
        sc.pair_mode = PairMode::fixed_one;
    } else {
        throw ValidationError("pair_mode must be poisson or fixed_one");
    }
    auto parts = get<std::int64_t>(sec, "partitions");
    if (parts < 1 || parts > 4096) throw ValidationError("partitions must be in [1, 4096]");
    sc.partitions = static_cast<std::uint32_t>(parts);
    sc.validate();
    return sc;
}

// Worker count only changes scheduling, so it stays out of the config hash.
int cmd_simulate(const json& cfg, unsigned workers, const Output& out) {
    SimulationConfig sc = simulation_config(cfg);
    bool records = get<bool>(cfg.at("simulation"), "write_records");
    if (records && !out.dir) throw ValidationError("write_records needs --out");

    std::optional<io::RecordWriter> writer;
    if (records) writer.emplace(out.file("records.csv"));
    RecordSink sink;
    if (writer) sink = [&](std::span<const TrialRecord> r) { writer->write(r); };
    CountsTable counts = simulate(sc, sink, workers);
    if (writer) writer->flush();
    if (out.dir) io::write_counts(out.file("counts.json"), counts);

    json doc = envelope("simulate", cfg);
    doc["trials"] = counts.total();
    doc["design"] = design_json(sc.design);
    doc["hardy"] = report_json(hardy_value_from_counts(counts));
    doc["predicted_hardy_value"] =
        hardy_value(hardy_terms(predict_distribution(sc.design, sc.imperfections, sc.pair_mode, sc.weights)));
    json cells = json::object();
    for (std::size_t i = 0; i < kCells; ++i) cells[cell_key(i)] = counts[i];
    doc["counts"] = cells;
    out.report("simulate.json", doc);
    return kOk;
}

// ---------------------------------------------------------------- analyze

bool looks_like_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char ch;
    while (in.get(ch)) {
        if (!std::isspace(static_cast<unsigned char>(ch))) return ch == '{';
    }
    return false;
}

int cmd_analyze(const json& cfg, const Output& out) {
    const json& sec = cfg.at("analysis");
    auto input = get_opt<std::string>(sec, "input");
    if (!input) throw ValidationError("analyze needs an input file");
    if (!fs::exists(*input)) throw IoError("input " + *input + " does not exist");

    auto block = get<std::int64_t>(sec, "block_size");
    if (block < 1) throw ValidationError("block_size must be at least 1");
    PbrOptions opts;
    opts.block_size = static_cast<std::uint64_t>(block);
    std::string window = get<std::string>(sec, "window");
    if (window == "cumulative") {
        opts.window = PredictionWindow::cumulative;
    } else if (window == "previous_block") {
        opts.window = PredictionWindow::previous_block;
    } else {
        throw ValidationError("window must be cumulative or previous_block");
    }
    std::string sigma_method = get<std::string>(sec, "sigma_method");
    if (sigma_method != "binomial" && sigma_method != "bootstrap") {
        throw ValidationError("sigma_method must be binomial or bootstrap");
    }

    json doc = envelope("analyze", cfg);
    CountsTable counts;
    std::optional<PbrResult> pbr;
    if (looks_like_json(*input)) {
        counts = io::read_counts(fs::path(*input));
        doc["input_format"] = "counts";
    } else {
        PbrAnalyzer analyzer(opts);
        io::read_records(fs::path(*input), [&](const TrialRecord& r) {
            counts.add(r);
            analyzer.add(r);
        });
        pbr = analyzer.finish();
        doc["input_format"] = "records";
    }

    HardyReport report = hardy_value_from_counts(counts);
    if (sigma_method == "bootstrap") {
        auto resamples = get<int>(sec, "bootstrap_resamples");
        report.sigma = bootstrap_hardy_sigma(counts, resamples, get<std::uint64_t>(cfg, "seed"));
    }
    doc["trials"] = counts.total();
    doc["hardy"] = report_json(report);
    doc["hardy"]["sigma_method"] = sigma_method;
    if (pbr) {
        doc["log10_p_bound"] = pbr->log10_p_bound;
        doc["blocks"] = pbr->blocks;
        doc["block_size"] = pbr->block_size;
        doc["trivial_blocks"] = pbr->trivial_blocks;
        doc["window"] = window;
    } else {
        // Trial order is lost in a counts file, so no sequential bound exists.
        doc["log10_p_bound"] = nullptr;
        doc["blocks"] = nullptr;
    }
    json z = json::array();
    for (const ZTest& t : nosignaling_ztests(counts)) {
        z.push_back({{"label", t.label},
                     {"applicable", t.applicable},
                     {"z", t.z},
                     {"p_value", t.p_value}});
    }
    doc["ztests"] = z;
    out.report("analyze.json", doc);
    return kOk;
}

// -------------------------------------------------------------- tomography

json matrix_json(const Matrix4c& m, bool imaginary) {
    json rows = json::array();
    for (int i = 0; i < 4; ++i) {
        json row = json::array();
        for (int j = 0; j < 4; ++j) row.push_back(imaginary ? m(i, j).imag() : m(i, j).real());
        rows.push_back(row);
    }
    return rows;
}

int cmd_tomography(const json& cfg, const Output& out) {
    const json& sec = cfg.at("tomography");
    auto input = get_opt<std::string>(sec, "input");
    if (!input) throw ValidationError("tomography needs an input file");
    tomo::TomoCounts counts = io::read_tomo_counts(fs::path(*input));
    auto theta = get_opt<double>(sec, "theta");
    double target_theta = theta ? *theta : optimal_theta(get<double>(sec, "eta"));
    tomo::ReconstructOptions opts;
    opts.max_iterations = get<int>(sec, "max_iterations");
    if (opts.max_iterations < 1) throw ValidationError("max_iterations must be at least 1");

    tomo::TomographyResult res = tomo::reconstruct(counts, make_state(target_theta), opts);
    json doc = envelope("tomography", cfg);
    doc["target_theta"] = target_theta;
    doc["fidelity"] = *res.fidelity;
    doc["likelihood"] = res.likelihood;
    doc["iterations"] = res.iterations;
    doc["rho_real"] = matrix_json(res.rho.matrix(), false);
    doc["rho_imag"] = matrix_json(res.rho.matrix(), true);
    auto ev = res.rho.eigenvalues();
    doc["eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
    out.report("tomography.json", doc);
    return kOk;
}

// --------------------------------------------------------------- spacetime

double one_decimal(double v) { return std::round(v * 10.0) / 10.0; }

int cmd_spacetime(const json& cfg, const Output& out) {
    const json& s = cfg.at("spacetime");
    SpacetimeConfig st;
    st.sa = get<double>(s, "sa");
    st.sb = get<double>(s, "sb");
    st.lsa = get<double>(s, "lsa");
    st.lsb = get<double>(s, "lsb");
    st.t_e = get<double>(s, "t_e");
    st.t_qrng1 = get<double>(s, "t_qrng1");
    st.t_qrng2 = get<double>(s, "t_qrng2");
    st.t_delay1 = get<double>(s, "t_delay1");
    st.t_delay2 = get<double>(s, "t_delay2");
    st.t_pc1 = get<double>(s, "t_pc1");
    st.t_pc2 = get<double>(s, "t_pc2");
    st.t_m1 = get<double>(s, "t_m1");
    st.t_m2 = get<double>(s, "t_m2");
    st.c = get<double>(s, "c");
    SeparationCheck loc = check_locality(st);
    SeparationCheck mi = check_measurement_independence(st);

    json doc = envelope("spacetime", cfg);
    doc["locality"] = {{"margin_alice_ns", one_decimal(loc.margin_first)},
                       {"margin_bob_ns", one_decimal(loc.margin_second)},
                       {"pass", loc.pass}};
    doc["measurement_independence"] = {{"margin_alice_ns", one_decimal(mi.margin_first)},
                                       {"margin_bob_ns", one_decimal(mi.margin_second)},
                                       {"pass", mi.pass}};
    doc["pass"] = loc.pass && mi.pass;
    out.report("spacetime.json", doc);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Loophole-free Hardy test toolkit"};
    app.set_version_flag("--version", HARDY_VERSION);
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> workers;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "64-bit seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--workers", workers, "worker threads (0 = all cores)");

    auto* opt = app.add_subcommand("optimize", "optimal design at a detection efficiency");
    std::optional<double> eta;
    std::optional<double> fidelity;
    std::optional<std::string> format;
    opt->add_option("--eta", eta, "detection efficiency in (2/3, 1]");
    opt->add_option("--fidelity", fidelity, "state fidelity for the Werner prediction");
    opt->add_option("--format", format, "json or csv");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo trial generation");
    std::optional<std::int64_t> trials;
    std::optional<std::string> pair_mode;
    bool records = false;
    sim->add_option("--trials", trials, "number of trials");
    sim->add_option("--pair-mode", pair_mode, "poisson or fixed_one");
    sim->add_flag("--records", records, "also write records.csv");

    auto* ana = app.add_subcommand("analyze", "Hardy value, PBR p-value bound and Z-tests");
    std::optional<std::string> input;
    std::optional<std::int64_t> block_size;
    std::optional<std::string> sigma_method;
    ana->add_option("input", input, "records CSV or counts JSON");
    ana->add_option("--block-size", block_size, "trials per PBR block");
    ana->add_option("--sigma", sigma_method, "binomial or bootstrap");

    auto* tom = app.add_subcommand("tomography", "maximum-likelihood state reconstruction");
    std::optional<std::string> tomo_input;
    std::optional<double> tomo_theta;
    tom->add_option("input", tomo_input, "tomography counts JSON");
    tom->add_option("--theta", tomo_theta, "target state parameter");

    app.add_subcommand("spacetime", "space-like separation margins");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        json cfg = load_config(config_path);
        if (seed) cfg["seed"] = *seed;
        if (workers) cfg["workers"] = *workers;
        if (eta) cfg["optimize"]["eta"] = *eta;
        if (fidelity) cfg["optimize"]["fidelity"] = *fidelity;
        if (format) cfg["optimize"]["format"] = *format;
        if (trials) cfg["simulation"]["n_trials"] = *trials;
        if (pair_mode) cfg["simulation"]["pair_mode"] = *pair_mode;
        if (records) cfg["simulation"]["write_records"] = true;
        if (input) cfg["analysis"]["input"] = *input;
        if (block_size) cfg["analysis"]["block_size"] = *block_size;
        if (sigma_method) cfg["analysis"]["sigma_method"] = *sigma_method;
        if (tomo_input) cfg["tomography"]["input"] = *tomo_input;
        if (tomo_theta) cfg["tomography"]["theta"] = *tomo_theta;
        if (!cfg["seed"].is_number_unsigned() && !cfg["seed"].is_number_integer()) {
            throw ValidationError("seed must be an integer");
        }

        Output out;
        if (out_dir) out.dir = fs::path(*out_dir);

        // Only the section the command reads goes into its hash.
        auto scoped = [&](const char* section) {
            return json{{"seed", cfg["seed"]}, {section, cfg[section]}};
        };
        if (*opt) return cmd_optimize(scoped("optimize"), out);
        if (*sim) {
            auto threads = get<std::int64_t>(cfg, "workers");
            if (threads < 0) throw ValidationError("workers must be non-negative");
            return cmd_simulate(scoped("simulation"), static_cast<unsigned>(threads), out);
        }
        if (*ana) return cmd_analyze(scoped("analysis"), out);
        if (*tom) return cmd_tomography(scoped("tomography"), out);
        return cmd_spacetime(scoped("spacetime"), out);
    } catch (const DataFormatError& e) {
        std::cerr << "hardy: data format error: " << e.what() << "\n";
        return kFormat;
    } catch (const InsufficientDataError& e) {
        std::cerr << "hardy: insufficient data: " << e.what() << "\n";
        return kFormat;
    } catch (const IoError& e) {
        std::cerr << "hardy: I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const DomainError& e) {
        std::cerr << "hardy: " << e.what() << "\n";
        return kConfig;
    } catch (const ValidationError& e) {
        std::cerr << "hardy: invalid configuration: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "hardy: " << e.what() << "\n";
        return kFailure;
    }
}
