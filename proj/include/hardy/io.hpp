#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "hardy/distribution.hpp"
#include "hardy/tomography.hpp"

namespace hardy::io {

// Record stream: CSV with header "x,y,a,b", outcomes 0, 1, 2 (2 = u).
class RecordWriter {
  public:
    explicit RecordWriter(const std::filesystem::path& path);  // IoError if unwritable
    explicit RecordWriter(std::ostream& out);

    void write(std::span<const TrialRecord> records);
    void flush();

  private:
    std::ofstream file_;
    std::ostream* out_;
};

// Calls `sink` for every record, in file order. Throws DataFormatError with
// the 1-based line number on the first malformed line.
void read_records(std::istream& in, const std::function<void(const TrialRecord&)>& sink);
void read_records(const std::filesystem::path& path,
                  const std::function<void(const TrialRecord&)>& sink);
std::vector<TrialRecord> read_records(const std::filesystem::path& path);

// Counts file: {"total": N, "counts": {"x,y,a,b": n, ...}}. Missing cells are 0.
void write_counts(std::ostream& out, const CountsTable& counts);
void write_counts(const std::filesystem::path& path, const CountsTable& counts);
CountsTable read_counts(std::istream& in);
CountsTable read_counts(const std::filesystem::path& path);

// Tomography file: {"N": scale, "counts": {"HH": n, ..., "LL": n}}. N may be
// omitted, in which case sum(n) / 9 is used.
tomo::TomoCounts read_tomo_counts(std::istream& in);
tomo::TomoCounts read_tomo_counts(const std::filesystem::path& path);
void write_tomo_counts(std::ostream& out, const tomo::TomoCounts& counts);

// Parses "x,y,a,b" cell keys as used in counts files.
std::size_t parse_cell_key(std::string_view key);

}  // namespace hardy::io
