#include "hardy/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "hardy/errors.hpp"

namespace hardy::io {
namespace {

using nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

json parse_json(std::istream& in) {
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataFormatError(std::string("invalid JSON: ") + e.what());
    }
}

void finish_write(std::ostream& out, const std::string& what) {
    out.flush();
    if (!out) throw IoError("failed writing " + what);
}

}  // namespace

RecordWriter::RecordWriter(const std::filesystem::path& path) : file_(open_out(path)), out_(&file_) {
    *out_ << "x,y,a,b\n";
}

RecordWriter::RecordWriter(std::ostream& out) : out_(&out) { *out_ << "x,y,a,b\n"; }

void RecordWriter::write(std::span<const TrialRecord> records) {
    std::string buf;
    buf.reserve(records.size() * 8);
    for (const auto& r : records) {
        buf.push_back(static_cast<char>('0' + r.x));
        buf.push_back(',');
        buf.push_back(static_cast<char>('0' + r.y));
        buf.push_back(',');
        buf.push_back(static_cast<char>('0' + index_of(r.a)));
        buf.push_back(',');
        buf.push_back(static_cast<char>('0' + index_of(r.b)));
        buf.push_back('\n');
    }
    out_->write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!*out_) throw IoError("failed writing trial records");
}

void RecordWriter::flush() { finish_write(*out_, "trial records"); }

void read_records(std::istream& in, const std::function<void(const TrialRecord&)>& sink) {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "x,y,a,b") throw DataFormatError("expected header x,y,a,b", lineno);
            header = true;
            continue;
        }
        // Exactly four single-digit fields.
        if (line.size() != 7 || line[1] != ',' || line[3] != ',' || line[5] != ',') {
            throw DataFormatError("malformed record '" + line + "'", lineno);
        }
        int x = line[0] - '0';
        int y = line[2] - '0';
        int a = line[4] - '0';
        int b = line[6] - '0';
        if (x < 1 || x > 2 || y < 1 || y > 2) {
            throw DataFormatError("setting out of range in '" + line + "'", lineno);
        }
        if (a < 0 || a > 2 || b < 0 || b > 2) {
            throw DataFormatError("outcome out of range in '" + line + "'", lineno);
        }
        sink(TrialRecord{static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y),
                         outcome_from_index(a), outcome_from_index(b)});
    }
    if (in.bad()) throw IoError("read error in record stream");
    if (!header) throw DataFormatError("empty record file: missing header x,y,a,b", 1);
}

void read_records(const std::filesystem::path& path,
                  const std::function<void(const TrialRecord&)>& sink) {
    auto in = open_in(path);
    read_records(in, sink);
}

std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
    std::vector<TrialRecord> out;
    read_records(path, [&](const TrialRecord& r) { out.push_back(r); });
    return out;
}

std::size_t parse_cell_key(std::string_view key) {
    int v[4];
    const char* p = key.data();
    const char* end = key.data() + key.size();
    for (int i = 0; i < 4; ++i) {
        auto [next, ec] = std::from_chars(p, end, v[i]);
        if (ec != std::errc{} || next == p) throw DataFormatError("bad cell key '" + std::string(key) + "'");
        p = next;
        if (i < 3) {
            if (p == end || *p != ',') throw DataFormatError("bad cell key '" + std::string(key) + "'");
            ++p;
        }
    }
    if (p != end || v[0] < 1 || v[0] > 2 || v[1] < 1 || v[1] > 2 || v[2] < 0 || v[2] > 2 || v[3] < 0 ||
        v[3] > 2) {
        throw DataFormatError("bad cell key '" + std::string(key) + "'");
    }
    return cell_index(v[0], v[1], outcome_from_index(v[2]), outcome_from_index(v[3]));
}

void write_counts(std::ostream& out, const CountsTable& counts) {
    json cells = json::object();
    for (std::size_t i = 0; i < kCells; ++i) cells[cell_key(i)] = counts[i];
    json doc = {{"total", counts.total()}, {"counts", cells}};
    out << doc.dump(2) << '\n';
    finish_write(out, "counts");
}

void write_counts(const std::filesystem::path& path, const CountsTable& counts) {
    auto out = open_out(path);
    write_counts(out, counts);
}

CountsTable read_counts(std::istream& in) {
    json doc = parse_json(in);
    if (!doc.is_object() || !doc.contains("counts") || !doc["counts"].is_object()) {
        throw DataFormatError("counts file needs a \"counts\" object");
    }
    CountsTable table;
    for (const auto& [key, value] : doc["counts"].items()) {
        if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
            throw DataFormatError("count for '" + key + "' must be a non-negative integer");
        }
        std::size_t cell = parse_cell_key(key);
        if (table[cell] != 0) throw DataFormatError("duplicate cell '" + key + "'");
        table.add(cell, value.get<std::uint64_t>());
    }
    if (doc.contains("total")) {
        const json& total = doc["total"];
        if (!total.is_number_integer() || total.get<std::int64_t>() < 0) {
            throw DataFormatError("\"total\" must be a non-negative integer");
        }
        if (total.get<std::uint64_t>() != table.total()) {
            throw DataFormatError("\"total\" " + std::to_string(total.get<std::uint64_t>()) +
                                  " does not equal the sum of counts " + std::to_string(table.total()));
        }
    }
    return table;
}

CountsTable read_counts(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_counts(in);
}

tomo::TomoCounts read_tomo_counts(std::istream& in) {
    json doc = parse_json(in);
    if (!doc.is_object() || !doc.contains("counts") || !doc["counts"].is_object()) {
        throw DataFormatError("tomography file needs a \"counts\" object");
    }
    const auto& basis = tomo::TomoBasisSet::standard();
    tomo::TomoCounts counts;
    std::array<bool, tomo::kBases> seen{};
    for (const auto& [key, value] : doc["counts"].items()) {
        if (!value.is_number()) throw DataFormatError("count for '" + key + "' must be a number");
        std::size_t mu = basis.index_of(key);
        counts.n[mu] = value.get<double>();
        seen[mu] = true;
    }
    for (std::size_t mu = 0; mu < tomo::kBases; ++mu) {
        if (!seen[mu]) throw DataFormatError("missing tomography basis " + basis.label(mu));
    }
    if (doc.contains("N") && !doc["N"].is_null()) {
        if (!doc["N"].is_number()) throw DataFormatError("\"N\" must be a number");
        counts.n_total_scale = doc["N"].get<double>();
    } else {
        counts.n_total_scale = tomo::TomoCounts::natural_scale(counts.n);
    }
    try {
        counts.validate();
    } catch (const ValidationError& e) {
        throw DataFormatError(e.what());
    }
    return counts;
}

tomo::TomoCounts read_tomo_counts(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_tomo_counts(in);
}

void write_tomo_counts(std::ostream& out, const tomo::TomoCounts& counts) {
    const auto& basis = tomo::TomoBasisSet::standard();
    json cells = json::object();
    for (std::size_t mu = 0; mu < tomo::kBases; ++mu) cells[basis.label(mu)] = counts.n[mu];
    out << json{{"N", counts.n_total_scale}, {"counts", cells}}.dump(2) << '\n';
    finish_write(out, "tomography counts");
}

}  // namespace hardy::io
