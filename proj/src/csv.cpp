#include "harmony/error.hpp"
#include "harmony/tabular.hpp"

#include <charconv>
#include <cmath>
#include <fnmatch.h>
#include <fstream>
#include <sstream>

namespace harmony {

namespace {

std::vector<std::string> split_record(const std::string& text, std::size_t& pos, std::size_t line,
                                      const std::string& source)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    while (pos < text.size()) {
        const char c = text[pos];
        if (quoted) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    cur += '"';
                    pos += 2;
                    continue;
                }
                quoted = false;
                ++pos;
                continue;
            }
            cur += c;
            ++pos;
            continue;
        }
        if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
            ++pos;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
            ++pos;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n')
                ++pos;
            ++pos;
            fields.push_back(std::move(cur));
            return fields;
        } else {
            cur += c;
            ++pos;
        }
    }
    if (quoted)
        throw DataError(source + ": unterminated quoted field starting on line " + std::to_string(line));
    fields.push_back(std::move(cur));
    return fields;
}

bool needs_quotes(const std::string& s)
{
    return s.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quote(const std::string& s)
{
    if (!needs_quotes(s))
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

bool is_glob(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

double parse_number(const std::string& cell, std::size_t row, const std::string& col)
{
    std::string_view s(cell);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    if (s.empty())
        throw DataError("missing value at row " + std::to_string(row + 1) + ", column '" + col + "'");
    if (s.front() == '+')
        s.remove_prefix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("cannot parse '" + cell + "' as a number at row " + std::to_string(row + 1) +
                        ", column '" + col + "'");
    if (!std::isfinite(v))
        throw DataError("non-finite value at row " + std::to_string(row + 1) + ", column '" + col + "'");
    return v;
}

} // namespace

int CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    return -1;
}

CsvTable parse_csv(const std::string& raw, const std::string& source)
{
    std::string_view view(raw);
    if (view.starts_with("\xEF\xBB\xBF"))
        view.remove_prefix(3);
    const std::string text(view);

    CsvTable table;
    std::size_t pos = 0;
    std::size_t line = 1;
    if (text.empty())
        throw DataError(source + ": missing header row");
    table.header = split_record(text, pos, line, source);
    while (pos < text.size()) {
        ++line;
        auto rec = split_record(text, pos, line, source);
        if (rec.size() == 1 && rec[0].empty())
            continue;
        if (rec.size() != table.header.size())
            throw DataError(source + ": line " + std::to_string(line) + " has " + std::to_string(rec.size()) +
                            " fields, header has " + std::to_string(table.header.size()));
        table.rows.push_back(std::move(rec));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.string());
}

void write_csv(const std::filesystem::path& path, const CsvTable& table)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write '" + path.string() + "'");
    auto emit = [&](const std::vector<std::string>& rec) {
        for (std::size_t i = 0; i < rec.size(); ++i) {
            if (i)
                out << ',';
            out << quote(rec[i]);
        }
        out << '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows)
        emit(r);
    if (!out)
        throw ConfigError("failed writing '" + path.string() + "'");
}

std::vector<std::string> resolve_feature_columns(const CsvTable& table, const Schema& schema)
{
    std::vector<std::string> out;
    std::vector<bool> taken(table.header.size(), false);
    for (const auto& pat : schema.feature_cols) {
        if (!is_glob(pat)) {
            const int c = table.column(pat);
            if (c < 0)
                throw ConfigError("schema: feature column '" + pat + "' not found");
            if (!taken[static_cast<std::size_t>(c)]) {
                taken[static_cast<std::size_t>(c)] = true;
                out.push_back(pat);
            }
            continue;
        }
        bool any = false;
        for (std::size_t i = 0; i < table.header.size(); ++i) {
            const auto& h = table.header[i];
            if (h == schema.site_col || h == schema.target_col)
                continue;
            if (fnmatch(pat.c_str(), h.c_str(), 0) == 0) {
                any = true;
                if (!taken[i]) {
                    taken[i] = true;
                    out.push_back(h);
                }
            }
        }
        if (!any)
            throw ConfigError("schema: feature pattern '" + pat + "' matches no column");
    }
    if (out.empty())
        throw ConfigError("schema: at least one feature column is required");
    return out;
}

Dataset dataset_from_table(const CsvTable& table, const Schema& schema)
{
    const int site_c = table.column(schema.site_col);
    const int target_c = table.column(schema.target_col);
    if (site_c < 0)
        throw ConfigError("schema: site column '" + schema.site_col + "' not found");
    if (target_c < 0)
        throw ConfigError("schema: target column '" + schema.target_col + "' not found");
    const auto feature_names = resolve_feature_columns(table, schema);
    std::vector<int> feat_idx, cov_idx;
    for (const auto& f : feature_names)
        feat_idx.push_back(table.column(f));
    for (const auto& c : schema.covariate_cols) {
        const int i = table.column(c);
        if (i < 0)
            throw ConfigError("schema: covariate column '" + c + "' not found");
        cov_idx.push_back(i);
    }

    if (table.rows.empty())
        throw DataError("empty dataset");

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Dataset d;
    d.feature_names = feature_names;
    d.covariate_names = schema.covariate_cols;
    d.features.resize(n, static_cast<Eigen::Index>(feat_idx.size()));
    d.covariates.resize(cov_idx.empty() ? 0 : n, static_cast<Eigen::Index>(cov_idx.size()));
    d.sites.reserve(table.rows.size());

    std::vector<std::string> labels;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto ri = static_cast<Eigen::Index>(r);
        for (std::size_t j = 0; j < feat_idx.size(); ++j)
            d.features(ri, static_cast<Eigen::Index>(j)) =
                parse_number(row[static_cast<std::size_t>(feat_idx[j])], r, feature_names[j]);
        for (std::size_t j = 0; j < cov_idx.size(); ++j)
            d.covariates(ri, static_cast<Eigen::Index>(j)) =
                parse_number(row[static_cast<std::size_t>(cov_idx[j])], r, schema.covariate_cols[j]);
        const auto& site = row[static_cast<std::size_t>(site_c)];
        if (site.empty())
            throw DataError("missing site at row " + std::to_string(r + 1));
        d.sites.push_back(site);
        labels.push_back(row[static_cast<std::size_t>(target_c)]);
    }

    d.target.resize(n);
    if (schema.classification) {
        for (std::size_t r = 0; r < labels.size(); ++r)
            if (labels[r].empty())
                throw DataError("missing target at row " + std::to_string(r + 1));
        d.task = TaskKind::classification(labels);
        for (std::size_t r = 0; r < labels.size(); ++r)
            d.target[static_cast<Eigen::Index>(r)] = d.task.class_index(labels[r]);
    } else {
        d.task = TaskKind::regression();
        for (std::size_t r = 0; r < labels.size(); ++r)
            d.target[static_cast<Eigen::Index>(r)] = parse_number(labels[r], r, schema.target_col);
    }

    d.validate();
    return d;
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema)
{
    return dataset_from_table(read_csv(path), schema);
}

CsvTable dataset_to_table(const Dataset& data, bool with_id)
{
    CsvTable t;
    if (with_id)
        t.header.push_back("id");
    t.header.push_back("site");
    t.header.push_back("target");
    for (const auto& f : data.feature_names)
        t.header.push_back(f);
    for (const auto& c : data.covariate_names)
        t.header.push_back(c);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        std::vector<std::string> rec;
        if (with_id)
            rec.push_back(std::to_string(i));
        rec.push_back(data.sites[static_cast<std::size_t>(i)]);
        rec.push_back(data.target_label(i));
        for (Eigen::Index j = 0; j < data.features.cols(); ++j)
            rec.push_back(format_double(data.features(i, j)));
        for (Eigen::Index j = 0; j < data.covariates.cols(); ++j)
            rec.push_back(format_double(data.covariates(i, j)));
        t.rows.push_back(std::move(rec));
    }
    return t;
}

} // namespace harmony
