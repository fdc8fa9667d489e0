// harmony: command-line front end.
//
//   harmony run --config run.toml [--seed N] [--out DIR] [--jobs N]
//   harmony harmonize fit --data in.csv --model model.json --site-col site --features 'f*' [...]
//   harmony harmonize transform --data in.csv --model model.json --out out.csv
//   harmony generate --config gen.toml --out data.csv [--seed N]
//   harmony sample --config sample.toml --data in.csv --out out.csv [--seed N]
//
// Exit codes: 0 ok, 1 internal, 2 config, 3 data, 4 numerical. Failures print
// one JSON line to stderr.

#include "harmony/combat.hpp"
#include "harmony/config.hpp"
#include "harmony/error.hpp"
#include "harmony/parallel.hpp"
#include "harmony/schemes.hpp"
#include "harmony/seed.hpp"
#include "harmony/synthgen.hpp"
#include "harmony/tabular.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace harmony;

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numerical: return 4;
    }
    return 1;
}

void report_error(const std::string& kind, const std::string& message)
{
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "': " + e.what());
    }
}

int required_column(const CsvTable& table, const std::string& name)
{
    const int c = table.column(name);
    if (c < 0)
        throw ConfigError("schema: column '" + name + "' not found");
    return c;
}

Eigen::MatrixXd numeric_columns(const CsvTable& table, const std::vector<std::string>& names)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const int c = required_column(table, names[j]);
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const std::string& cell = table.rows[i][static_cast<std::size_t>(c)];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw DataError("cannot parse '" + cell + "' as a finite number at row " + std::to_string(i + 1) +
                                ", column '" + names[j] + "'");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return out;
}

std::vector<std::string> text_column(const CsvTable& table, const std::string& name)
{
    const int c = required_column(table, name);
    std::vector<std::string> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows)
        out.push_back(row[static_cast<std::size_t>(c)]);
    return out;
}

std::uint64_t parse_seed_doc(const json& doc, const char* key, std::uint64_t fallback)
{
    if (!doc.contains(key))
        return fallback;
    try {
        return doc.at(key).get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 0;
};

int cmd_run(const RunArgs& args)
{
    if (args.jobs > 0)
        set_max_jobs(static_cast<std::size_t>(args.jobs));
    auto run = config::load_run_config(args.config);
    if (args.seed) {
        run.seed = *args.seed;
        run.document["seed"] = *args.seed;
    }
    if (!args.out.empty())
        run.output_dir = args.out;

    const Dataset data = config::load_run_dataset(run);
    const auto configs = config::experiment_configs(run, data.task);
    const auto table = schemes::compare_schemes(data, configs);

    fs::create_directories(run.output_dir);
    json outputs = json::array();
    for (const auto& r : table.reports) {
        const std::string name = "report_" + schemes::to_string(r.scheme) + ".json";
        write_text(run.output_dir / name, r.to_json().dump(2) + "\n");
        outputs.push_back(name);
    }
    write_text(run.output_dir / "comparison.csv", table.to_csv());
    outputs.push_back("comparison.csv");

    const json manifest = {{"version", kVersion},
                           {"seed", run.seed},
                           {"config_hash", hex64(seed::fnv1a(run.document.dump()))},
                           {"n_rows", data.rows()},
                           {"n_features", data.n_features()},
                           {"outputs", outputs}};
    write_text(run.output_dir / "manifest.json", manifest.dump(2) + "\n");
    std::cout << table.to_text();
    return 0;
}

// ---------------------------------------------------------------------------

struct HarmonizeArgs {
    std::string data;
    std::string model;
    std::string out;
    std::string site_col = "site";
    std::vector<std::string> features;
    std::vector<std::string> covariates;
    std::string target_col;
    std::string task = "classification";
    bool no_eb = false;
};

json task_json(const TaskKind& t)
{
    if (t.is_regression())
        return {{"kind", "regression"}};
    return {{"kind", "classification"}, {"classes", t.classes()}};
}

TaskKind task_from(const json& j)
{
    if (j.at("kind").get<std::string>() == "regression")
        return TaskKind::regression();
    return TaskKind::classification(j.at("classes").get<std::vector<std::string>>());
}

/// Target covariate block for a preserved target column, or zero columns.
Eigen::MatrixXd target_block(const CsvTable& table, const std::string& target_col, const TaskKind& task)
{
    if (target_col.empty())
        return Eigen::MatrixXd(static_cast<Eigen::Index>(table.rows.size()), 0);
    if (task.is_regression())
        return numeric_columns(table, {target_col});
    return encode_target_labels(text_column(table, target_col), task);
}

Eigen::MatrixXd hstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

void write_adjusted(const CsvTable& table, const std::vector<std::string>& feature_cols, const Eigen::MatrixXd& adjusted,
                    const fs::path& out)
{
    CsvTable copy = table;
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
        const auto c = static_cast<std::size_t>(copy.column(feature_cols[j]));
        for (std::size_t i = 0; i < copy.rows.size(); ++i)
            copy.rows[i][c] = format_double(adjusted(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    if (out.has_parent_path())
        fs::create_directories(out.parent_path());
    write_csv(out, copy);
}

int cmd_harmonize_fit(const HarmonizeArgs& a)
{
    if (a.features.empty())
        throw ConfigError("--features is required");
    if (a.task != "classification" && a.task != "regression")
        throw ConfigError("--task must be classification or regression");
    const CsvTable table = read_csv(a.data);
    if (table.rows.empty())
        throw DataError("empty dataset");
    Schema schema;
    schema.site_col = a.site_col;
    schema.target_col = a.target_col;
    schema.feature_cols = a.features;
    const auto feature_cols = resolve_feature_columns(table, schema);
    const auto sites = text_column(table, a.site_col);

    TaskKind task = TaskKind::regression();
    if (!a.target_col.empty() && a.task == "classification")
        task = TaskKind::classification(text_column(table, a.target_col));

    const Eigen::MatrixXd covariates =
        hstack(target_block(table, a.target_col, task), numeric_columns(table, a.covariates));
    combat::CombatConfig cfg;
    cfg.use_eb = !a.no_eb;
    const auto result = combat::fit_transform(numeric_columns(table, feature_cols), sites, covariates, cfg);

    json schema_j = {{"site_col", a.site_col}, {"feature_cols", feature_cols}, {"covariate_cols", a.covariates}};
    if (!a.target_col.empty()) {
        schema_j["target_col"] = a.target_col;
        schema_j["task"] = task_json(task);
    }
    const json doc = {{"format", "harmony.harmonize"}, {"version", 1}, {"schema", schema_j}, {"combat", result.model.to_json()}};
    write_text(a.model, doc.dump(2) + "\n");
    if (!a.out.empty())
        write_adjusted(table, feature_cols, result.adjusted, a.out);
    return 0;
}

int cmd_harmonize_transform(const HarmonizeArgs& a)
{
    if (a.out.empty())
        throw ConfigError("--out is required");
    const json doc = read_json(a.model);
    std::vector<std::string> feature_cols, covariate_cols;
    std::string site_col, target_col;
    TaskKind task = TaskKind::regression();
    combat::CombatModel model;
    try {
        if (doc.at("format").get<std::string>() != "harmony.harmonize")
            throw ConfigError("'" + a.model + "' is not a harmonize model");
        const auto& s = doc.at("schema");
        site_col = s.at("site_col").get<std::string>();
        feature_cols = s.at("feature_cols").get<std::vector<std::string>>();
        covariate_cols = s.at("covariate_cols").get<std::vector<std::string>>();
        if (s.contains("target_col")) {
            target_col = s.at("target_col").get<std::string>();
            task = task_from(s.at("task"));
        }
        model = combat::CombatModel::from_json(doc.at("combat"));
    } catch (const json::exception& e) {
        throw ConfigError("malformed model '" + a.model + "': " + e.what());
    }
    const CsvTable table = read_csv(a.data);
    if (table.rows.empty())
        throw DataError("empty dataset");
    const Eigen::MatrixXd covariates =
        hstack(target_block(table, target_col, task), numeric_columns(table, covariate_cols));
    const Eigen::MatrixXd adjusted =
        combat::transform(model, numeric_columns(table, feature_cols), text_column(table, site_col), covariates);
    write_adjusted(table, feature_cols, adjusted, a.out);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_generate(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed)
{
    json doc = config::load_document(config_path);
    if (seed)
        doc["seed"] = *seed;
    const auto cfg = synth::GenConfig::from_json(doc);
    const Dataset data = synth::generate(cfg);
    if (fs::path(out).has_parent_path())
        fs::create_directories(fs::path(out).parent_path());
    write_csv(out, dataset_to_table(data, true));
    return 0;
}

int cmd_sample(const std::string& config_path, const std::string& data_path, const std::string& out,
               std::optional<std::uint64_t> seed)
{
    const json doc = config::load_document(config_path);
    for (const auto& [key, v] : doc.items())
        if (key != "schema" && key != "dependence" && key != "independence" && key != "seed")
            throw ConfigError("unknown key '" + key + "'");
    if (!doc.contains("schema"))
        throw ConfigError("schema: required");
    if (doc.contains("dependence") == doc.contains("independence"))
        throw ConfigError("give exactly one of 'dependence' or 'independence'");
    const Schema schema = config::schema_from_json(doc.at("schema"));
    const std::uint64_t s = seed ? *seed : parse_seed_doc(doc, "seed", 0);

    const CsvTable table = read_csv(data_path);
    const Dataset data = dataset_from_table(table, schema);
    const std::vector<int> keep = doc.contains("dependence")
                                      ? synth::dependence_rows(data, synth::DependenceSpec::from_json(doc.at("dependence")), s)
                                      : synth::independence_rows(data, synth::IndependenceSpec::from_json(doc.at("independence")), s);
    subset(data, keep).validate();
    CsvTable kept;
    kept.header = table.header;
    for (int r : keep)
        kept.rows.push_back(table.rows[static_cast<std::size_t>(r)]);
    if (fs::path(out).has_parent_path())
        fs::create_directories(fs::path(out).parent_path());
    write_csv(out, kept);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-site harmonization and leakage-free prediction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Compare harmonization schemes under cross-validation");
    run->add_option("--config", run_args.config, "Run config (TOML or JSON)")->required();
    run->add_option("--seed", run_args.seed, "Override the config seed");
    run->add_option("--out", run_args.out, "Output directory");
    run->add_option("--jobs", run_args.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

    HarmonizeArgs h;
    auto* harmonize = app.add_subcommand("harmonize", "Fit or apply a standalone ComBat model");
    harmonize->require_subcommand(1);
    auto* hfit = harmonize->add_subcommand("fit", "Fit ComBat and write the model");
    hfit->add_option("--data", h.data, "Input CSV")->required();
    hfit->add_option("--model", h.model, "Model JSON to write")->required();
    hfit->add_option("--out", h.out, "Also write the adjusted CSV here");
    hfit->add_option("--site-col", h.site_col, "Site column");
    hfit->add_option("--features", h.features, "Feature columns or globs")->required();
    hfit->add_option("--covariates", h.covariates, "Covariate columns to preserve");
    hfit->add_option("--target-col", h.target_col, "Target column to preserve as a covariate");
    hfit->add_option("--task", h.task, "classification or regression (with --target-col)");
    hfit->add_flag("--no-eb", h.no_eb, "Disable empirical Bayes shrinkage");
    auto* htransform = harmonize->add_subcommand("transform", "Apply a fitted model");
    htransform->add_option("--data", h.data, "Input CSV")->required();
    htransform->add_option("--model", h.model, "Model JSON")->required();
    htransform->add_option("--out", h.out, "Harmonized CSV to write")->required();

    std::string gen_config, gen_out;
    std::optional<std::uint64_t> gen_seed;
    auto* generate = app.add_subcommand("generate", "Write a synthetic multi-site dataset");
    generate->add_option("--config", gen_config, "Generator config (TOML or JSON)")->required();
    generate->add_option("--out", gen_out, "CSV to write")->required();
    generate->add_option("--seed", gen_seed, "Override the config seed");

    std::string sample_config, sample_data, sample_out;
    std::optional<std::uint64_t> sample_seed;
    auto* sample = app.add_subcommand("sample", "Force site-target dependence or independence");
    sample->add_option("--config", sample_config, "Sampler config (TOML or JSON)")->required();
    sample->add_option("--data", sample_data, "Input CSV")->required();
    sample->add_option("--out", sample_out, "CSV to write")->required();
    sample->add_option("--seed", sample_seed, "Override the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("config", e.what());
        return 2;
    }

    try {
        if (*run)
            return cmd_run(run_args);
        if (*hfit)
            return cmd_harmonize_fit(h);
        if (*htransform)
            return cmd_harmonize_transform(h);
        if (*generate)
            return cmd_generate(gen_config, gen_out, gen_seed);
        if (*sample)
            return cmd_sample(sample_config, sample_data, sample_out, sample_seed);
    } catch (const Error& e) {
        report_error(to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return 1;
    }
    return 1;
}
