#include "epijoint/io.hpp"

#include "epijoint/errors.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace epijoint {

namespace {

double parse_real(const std::string& s, std::size_t line)
{
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t'))
        ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r'))
        --last;
    if (first == last)
        throw ParseError("empty numeric field", line);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ParseError(fmt::format("bad number '{}'", s), line);
    return v;
}

std::vector<std::string> split_lines(const std::string& text)
{
    std::vector<std::string> lines;
    std::string cur;
    bool quoted = false;
    for (char ch : text) {
        if (ch == '"')
            quoted = !quoted;
        if (ch == '\n' && !quoted) {
            if (!cur.empty() && cur.back() == '\r')
                cur.pop_back();
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) {
        if (cur.back() == '\r')
            cur.pop_back();
        lines.push_back(std::move(cur));
    }
    return lines;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& s, const std::string& what)
{
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(fmt::format("bad {} '{}'", what, s), 0);
    return v;
}

Date make_date(int y, int m, int d, const std::string& text)
{
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw ParseError(fmt::format("invalid date '{}'", text), 0);
    return Date{ymd};
}

std::vector<std::string> split_on(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        out.push_back(cur);
    return out;
}

} // namespace

void atomic_write(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::random_device rd;
    const fs::path tmp = path.string() + fmt::format(".tmp{:08x}", rd());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os)
            throw Error(fmt::format("cannot write {}", tmp.string()));
        os << content;
        os.flush();
        if (!os)
            throw Error(fmt::format("write to {} failed", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw Error(fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string format_real(double v)
{
    return fmt::format("{:.17g}", v);
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_number)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted)
        throw ParseError("unterminated quoted field", line_number);
    fields.push_back(std::move(cur));
    return fields;
}

std::string to_csv(const LabeledMatrix& m)
{
    if (static_cast<Eigen::Index>(m.rows.size()) != m.values.rows()
        || static_cast<Eigen::Index>(m.cols.size()) != m.values.cols())
        throw DimensionError("labels do not match the matrix shape");
    std::string out = csv_field(m.corner);
    for (const auto& c : m.cols)
        out += "," + csv_field(c);
    out += '\n';
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        out += csv_field(m.rows[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            out += ',';
            out += format_real(m.values(i, j));
        }
        out += '\n';
    }
    return out;
}

LabeledMatrix parse_labeled_csv(const std::string& text)
{
    const auto lines = split_lines(text);
    if (lines.empty())
        throw ParseError("empty CSV", 1);
    LabeledMatrix m;
    auto header = split_csv_line(lines[0], 1);
    m.corner = header[0];
    m.cols.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty())
            continue;
        auto f = split_csv_line(lines[i], i + 1);
        if (f.size() != header.size())
            throw ParseError(fmt::format("{} fields, expected {}", f.size(), header.size()),
                             i + 1);
        m.rows.push_back(f[0]);
        std::vector<double> row;
        for (std::size_t j = 1; j < f.size(); ++j)
            row.push_back(parse_real(f[j], i + 1));
        rows.push_back(std::move(row));
    }
    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_labeled_csv(const fs::path& path, const LabeledMatrix& m)
{
    atomic_write(path, to_csv(m));
}

LabeledMatrix read_labeled_csv(const fs::path& path)
{
    try {
        return parse_labeled_csv(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()), 0);
    }
}

Date parse_iso_date(const std::string& s)
{
    const auto parts = split_on(trim(s), '-');
    if (parts.size() != 3)
        throw ParseError(fmt::format("expected YYYY-MM-DD, got '{}'", s), 0);
    return make_date(parse_int(parts[0], "year"), parse_int(parts[1], "month"),
                     parse_int(parts[2], "day"), s);
}

Date parse_us_date(const std::string& s)
{
    const auto parts = split_on(trim(s), '/');
    if (parts.size() != 3)
        throw ParseError(fmt::format("expected M/D/YY, got '{}'", s), 0);
    int year = parse_int(parts[2], "year");
    if (year < 100)
        year += 2000;
    return make_date(year, parse_int(parts[0], "month"), parse_int(parts[1], "day"), s);
}

std::string format_date(Date d)
{
    const std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

void IngestConfig::validate() const
{
    if (countries.empty())
        throw ParameterError("select at least one country");
    if (start && end && *start > *end)
        throw RangeError("start date is after end date");
}

std::vector<double> daily_increments(const std::vector<double>& cumulative, bool clip_negative)
{
    std::vector<double> out;
    for (std::size_t i = 1; i < cumulative.size(); ++i) {
        const double d = cumulative[i] - cumulative[i - 1];
        out.push_back(clip_negative ? std::max(d, 0.0) : d);
    }
    return out;
}

std::vector<double> centered_moving_average(const std::vector<double>& v, int width)
{
    if (width < 1 || width % 2 == 0)
        throw ParameterError("smoothing width must be odd and positive");
    const auto n = static_cast<std::ptrdiff_t>(v.size());
    const std::ptrdiff_t h = width / 2;
    std::vector<double> out(v.size());
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - h);
        const std::ptrdiff_t hi = std::min(n - 1, t + h);
        double s = 0.0;
        for (std::ptrdiff_t u = lo; u <= hi; ++u)
            s += v[static_cast<std::size_t>(u)];
        out[static_cast<std::size_t>(t)] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

CountMatrix ingest_jhu_text(const std::string& text, const IngestConfig& cfg)
{
    cfg.validate();
    const auto lines = split_lines(text);
    if (lines.empty())
        throw ParseError("empty CSSE file", 1);
    const auto header = split_csv_line(lines[0], 1);
    constexpr std::size_t kFirstDate = 4;
    if (header.size() <= kFirstDate + 1 || trim(header[1]) != "Country/Region")
        throw ParseError("expected Province/State, Country/Region, Lat, Long and dates", 1);
    std::vector<Date> dates;
    for (std::size_t j = kFirstDate; j < header.size(); ++j) {
        try {
            dates.push_back(parse_us_date(header[j]));
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("column {}: {}", j + 1, e.what()), 1);
        }
        if (dates.size() > 1 && dates.back() != dates[dates.size() - 2] + std::chrono::days{1})
            throw ParseError(fmt::format("dates are not consecutive at column {}", j + 1), 1);
    }

    std::map<std::string, std::vector<double>> cumulative;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty())
            continue;
        const auto f = split_csv_line(lines[i], i + 1);
        if (f.size() != header.size())
            throw ParseError(fmt::format("{} fields, expected {}", f.size(), header.size()),
                             i + 1);
        auto& acc = cumulative[trim(f[1])];
        acc.resize(dates.size(), 0.0);
        for (std::size_t j = kFirstDate; j < f.size(); ++j) {
            // Blank cells appear in some CSSE revisions for not-yet-reported days.
            const std::string cell = trim(f[j]);
            acc[j - kFirstDate] += cell.empty() ? 0.0 : parse_real(cell, i + 1);
        }
    }

    for (const auto& name : cfg.countries)
        if (!cumulative.count(name)) {
            std::string avail;
            for (const auto& [k, v] : cumulative)
                avail += (avail.empty() ? "" : ", ") + k;
            throw ParameterError(fmt::format("unknown country '{}'; available: {}", name, avail));
        }

    // Day i of the daily series is dates[i + 1].
    const Date first = dates[1];
    const Date last = dates.back();
    const Date start = cfg.start.value_or(first);
    const Date end = cfg.end.value_or(last);
    if (start < first || end > last || start > end)
        throw RangeError(fmt::format("requested {} to {}, but daily counts cover {} to {}",
                                     format_date(start), format_date(end), format_date(first),
                                     format_date(last)));
    const auto offset = static_cast<std::size_t>((start - first).count());
    const auto n_days = static_cast<std::size_t>((end - start).count()) + 1;

    CountMatrix out;
    out.counts.resize(static_cast<Eigen::Index>(cfg.countries.size()), static_cast<Eigen::Index>(n_days));
    for (std::size_t c = 0; c < cfg.countries.size(); ++c) {
        std::vector<double> daily = daily_increments(cumulative[cfg.countries[c]], cfg.clip_negative);
        if (cfg.smooth)
            daily = centered_moving_average(daily, 7);
        for (std::size_t t = 0; t < n_days; ++t)
            out.counts(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = daily[offset + t];
        out.territory_ids.push_back(cfg.countries[c]);
    }
    for (std::size_t t = 0; t < n_days; ++t)
        out.dates.push_back(format_date(start + std::chrono::days{static_cast<int>(t)}));
    if (cfg.clip_negative)
        out.validate();
    return out;
}

CountMatrix ingest_jhu(const IngestConfig& cfg)
{
    if (!fs::exists(cfg.input))
        throw Error(fmt::format("input file {} does not exist", cfg.input.string()));
    try {
        return ingest_jhu_text(read_file(cfg.input), cfg);
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", cfg.input.string(), e.what()), 0);
    }
}

Infectiousness DatasetFiles::phi_z(const SerialInterval& phi) const
{
    if (history)
        return infectiousness(z.counts, phi, *history);
    return infectiousness(z.counts, phi);
}

LabeledMatrix counts_table(const CountMatrix& z)
{
    return {z.counts, z.territory_ids, z.dates, "territory"};
}

LabeledMatrix repro_table(const ReproMatrix& r, const CountMatrix& z)
{
    return {r, z.territory_ids, z.dates, "territory"};
}

LabeledMatrix laplacian_table(const Matrix& l, const std::vector<std::string>& ids)
{
    return {l, ids, ids, "territory"};
}

std::vector<fs::path> write_dataset(const fs::path& dir, const SyntheticDataset& data)
{
    fs::create_directories(dir);
    const auto& ids = data.z.territory_ids;
    std::vector<fs::path> written;
    auto put = [&](const std::string& name, const LabeledMatrix& m) {
        write_labeled_csv(dir / name, m);
        written.push_back(dir / name);
    };
    put("counts.csv", counts_table(data.z));
    put("r_star.csv", repro_table(data.r_star, data.z));
    put("l_star.csv", laplacian_table(data.l_star.l, ids));
    std::vector<std::string> lags;
    for (Eigen::Index s = data.history.cols(); s >= 1; --s)
        lags.push_back(std::to_string(-s));
    put("history.csv", {data.history, ids, lags, "territory"});

    nlohmann::json meta;
    meta["generator"] = kGeneratorVersion;
    meta["seed"] = data.seed;
    meta["territories"] = data.z.territories();
    meta["days"] = data.z.days();
    meta["clusters"] = data.clusters.n_clusters;
    meta["assignment"] = data.clusters.assignment;
    meta["z0"] = std::vector<double>(data.z0.data(), data.z0.data() + data.z0.size());
    meta["gamma"] = std::vector<double>(data.scale.gamma.data(),
                                        data.scale.gamma.data() + data.scale.gamma.size());
    atomic_write(dir / "metadata.json", meta.dump(2) + "\n");
    written.push_back(dir / "metadata.json");
    return written;
}

DatasetFiles read_dataset(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw Error(fmt::format("{} is not a dataset directory", dir.string()));
    DatasetFiles out;
    const LabeledMatrix counts = read_labeled_csv(dir / "counts.csv");
    out.z.counts = counts.values;
    out.z.territory_ids = counts.rows;
    out.z.dates = counts.cols;
    out.z.validate();
    if (fs::exists(dir / "r_star.csv")) {
        out.r_star = read_labeled_csv(dir / "r_star.csv");
        if (out.r_star->values.rows() != out.z.territories() || out.r_star->values.cols() != out.z.days())
            throw DimensionError("r_star.csv does not match counts.csv");
    }
    if (fs::exists(dir / "l_star.csv")) {
        out.l_star = read_labeled_csv(dir / "l_star.csv").values;
        if (out.l_star->rows() != out.z.territories() || out.l_star->cols() != out.z.territories())
            throw DimensionError("l_star.csv must be C x C");
    }
    if (fs::exists(dir / "history.csv")) {
        out.history = read_labeled_csv(dir / "history.csv").values;
        if (out.history->rows() != out.z.territories())
            throw DimensionError("history.csv must have one row per territory");
    }
    if (fs::exists(dir / "metadata.json")) {
        try {
            out.metadata = nlohmann::json::parse(read_file(dir / "metadata.json"));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(fmt::format("metadata.json: {}", e.what()), 0);
        }
    }
    return out;
}

DatasetFiles load_counts(const fs::path& input, const IngestConfig& ingest)
{
    if (fs::is_directory(input))
        return read_dataset(input);
    IngestConfig cfg = ingest;
    cfg.input = input;
    DatasetFiles out;
    out.z = ingest_jhu(cfg);
    return out;
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

nlohmann::json RunManifest::to_json() const
{
    auto files = [](const std::vector<fs::path>& paths) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : paths) {
            nlohmann::json e = {{"path", p.string()}};
            if (fs::is_regular_file(p)) {
                const std::string bytes = read_file(p);
                e["sha256"] = sha256_hex(bytes);
                e["bytes"] = bytes.size();
            }
            arr.push_back(e);
        }
        return arr;
    };
    nlohmann::json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["versions"] = {{"epijoint", kVersion},
                     {"synthetic_generator", kGeneratorVersion},
                     {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                           EIGEN_MINOR_VERSION)}};
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    return j;
}

void RunManifest::write(const fs::path& path) const
{
    atomic_write(path, to_json().dump(2) + "\n");
}

std::string tidy_csv(const std::vector<std::pair<std::string, LabeledMatrix>>& series)
{
    std::string out = "territory,date,value,series\n";
    for (const auto& [name, m] : series)
        for (Eigen::Index i = 0; i < m.values.rows(); ++i)
            for (Eigen::Index j = 0; j < m.values.cols(); ++j)
                out += fmt::format("{},{},{},{}\n", csv_field(m.rows[static_cast<std::size_t>(i)]),
                                   csv_field(m.cols[static_cast<std::size_t>(j)]),
                                   format_real(m.values(i, j)), csv_field(name));
    return out;
}

} // namespace epijoint
