#pragma once

#include "epijoint/model.hpp"
#include "epijoint/synthetic.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace epijoint {

namespace fs = std::filesystem;

// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

// Shortest text that reads back to the same double: 17 significant digits.
std::string format_real(double v);

// Splits one CSV record; double quotes delimit fields and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_number);

// Matrix with row and column labels, stored as
//   <corner>,<col 1>,...,<col n>
//   <row 1>,v11,...,v1n
struct LabeledMatrix {
    Matrix values;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::string corner = "territory";
};

std::string to_csv(const LabeledMatrix& m);
LabeledMatrix parse_labeled_csv(const std::string& text);
void write_labeled_csv(const fs::path& path, const LabeledMatrix& m);
LabeledMatrix read_labeled_csv(const fs::path& path);

// Calendar dates, ISO 8601 (YYYY-MM-DD) on output.
using Date = std::chrono::sys_days;
Date parse_iso_date(const std::string& s);
// CSSE header style M/D/YY.
Date parse_us_date(const std::string& s);
std::string format_date(Date d);

struct IngestConfig {
    fs::path input;
    std::vector<std::string> countries;
    std::optional<Date> start;
    std::optional<Date> end;
    bool clip_negative = true;
    bool smooth = false;

    void validate() const;
};

// Daily increments c[t] - c[t-1] of a cumulative series (one value shorter).
std::vector<double> daily_increments(const std::vector<double>& cumulative, bool clip_negative);
// 7-day (or any odd width) centered mean, truncated at both ends.
std::vector<double> centered_moving_average(const std::vector<double>& v, int width);

// Johns Hopkins CSSE global time series (cumulative counts). Province rows are
// summed per country before differencing; the day before `start` must be in
// the file.
CountMatrix ingest_jhu(const IngestConfig& cfg);
CountMatrix ingest_jhu_text(const std::string& text, const IngestConfig& cfg);

// Dataset directory: counts.csv, and when known r_star.csv, l_star.csv,
// history.csv, metadata.json.
struct DatasetFiles {
    CountMatrix z;
    std::optional<LabeledMatrix> r_star;
    std::optional<Matrix> l_star;
    std::optional<Matrix> history;
    nlohmann::json metadata = nlohmann::json::object();

    Infectiousness phi_z(const SerialInterval& phi) const;
};

LabeledMatrix counts_table(const CountMatrix& z);
LabeledMatrix repro_table(const ReproMatrix& r, const CountMatrix& z);
LabeledMatrix laplacian_table(const Matrix& l, const std::vector<std::string>& ids);

std::vector<fs::path> write_dataset(const fs::path& dir, const SyntheticDataset& data);
DatasetFiles read_dataset(const fs::path& dir);
// A dataset directory, or a CSSE file ingested with `ingest`.
DatasetFiles load_counts(const fs::path& input, const IngestConfig& ingest);

std::string sha256_hex(const std::string& bytes);

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    std::optional<std::uint64_t> seed;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;

    // Checksums every listed file as it is now.
    nlohmann::json to_json() const;
    void write(const fs::path& path) const;
};

// Long format (territory, date, value, series), one row per cell.
std::string tidy_csv(const std::vector<std::pair<std::string, LabeledMatrix>>& series);

inline constexpr const char* kVersion = "1.0.0";

} // namespace epijoint
