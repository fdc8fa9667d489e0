#include "harmony/config.hpp"

#include "harmony/error.hpp"
#include "harmony/seed.hpp"

#include "toml.hpp"

#include <fstream>
#include <sstream>

namespace harmony::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json toml_to_json(const toml::node& n)
{
    if (const auto* t = n.as_table()) {
        json j = json::object();
        for (auto&& [k, v] : *t)
            j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (const auto* a = n.as_array()) {
        json j = json::array();
        for (const auto& v : *a)
            j.push_back(toml_to_json(v));
        return j;
    }
    if (const auto* s = n.as_string())
        return s->get();
    if (const auto* i = n.as_integer())
        return i->get();
    if (const auto* f = n.as_floating_point())
        return f->get();
    if (const auto* b = n.as_boolean())
        return b->get();
    throw ConfigError("unsupported TOML value at line " + std::to_string(n.source().begin.line) +
                      " (dates and times are not accepted)");
}

/// Runs `f`, turning any failure into one entry of `errors`.
template <class F>
void collect(std::vector<std::string>& errors, const std::string& where, F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        errors.push_back(where + ": " + e.what());
    } catch (const json::exception& e) {
        errors.push_back(where + ": " + e.what());
    }
}

std::vector<std::string> string_list(const json& j)
{
    if (j.is_string())
        return {j.get<std::string>()};
    return j.get<std::vector<std::string>>();
}

} // namespace

json load_document(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (path.extension() == ".json") {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file '" + path.string() + "': " + e.what());
        }
    }
    try {
        return toml_to_json(toml::parse(text, path.string()));
    } catch (const toml::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "' line " + std::to_string(e.source().begin.line) + ": " +
                          std::string(e.description()));
    }
}

combat::CombatConfig combat_from_json(const json& j)
{
    combat::CombatConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "use_eb") c.use_eb = v.get<bool>();
            else if (key == "max_iters") c.max_iters = v.get<int>();
            else if (key == "tol") c.tol = v.get<double>();
            else if (key == "ridge_eps") c.ridge_eps = v.get<double>();
            else if (key == "sigma_floor") c.sigma_floor = v.get<double>();
            else throw ConfigError("unknown combat option '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("combat config: ") + e.what());
    }
    c.validate();
    return c;
}

json combat_to_json(const combat::CombatConfig& c)
{
    return {{"use_eb", c.use_eb}, {"max_iters", c.max_iters}, {"tol", c.tol}, {"ridge_eps", c.ridge_eps},
            {"sigma_floor", c.sigma_floor}};
}

Schema schema_from_json(const json& j)
{
    Schema s;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "site_col") s.site_col = v.get<std::string>();
            else if (key == "target_col") s.target_col = v.get<std::string>();
            else if (key == "feature_cols") s.feature_cols = string_list(v);
            else if (key == "covariate_cols") s.covariate_cols = string_list(v);
            else if (key == "task") {
                const auto t = v.get<std::string>();
                if (t != "classification" && t != "regression")
                    throw ConfigError("task must be 'classification' or 'regression', got '" + t + "'");
                s.classification = t == "classification";
            } else throw ConfigError("unknown schema key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("schema: ") + e.what());
    }
    if (s.site_col.empty() || s.target_col.empty() || s.feature_cols.empty())
        throw ConfigError("schema needs site_col, target_col and at least one feature_cols entry");
    return s;
}

bool RunConfig::classification() const
{
    if (source.generate)
        return source.generate->target == synth::TargetKind::Binary;
    return schema.classification;
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir)
{
    std::vector<std::string> errors;
    RunConfig run;
    run.document = doc;
    if (!doc.is_object())
        throw ConfigError("config must be a table of settings");

    static const std::vector<std::string> known = {"seed", "output_dir", "dataset", "schema", "cv", "schemes",
                                                   "predictor", "pretty", "combat", "use_covariates", "f1_positive"};
    for (const auto& [key, v] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            errors.push_back("unknown key '" + key + "'");

    if (!doc.contains("seed"))
        errors.push_back("seed: required (runs are never seeded from the clock)");
    else
        collect(errors, "seed", [&] { run.seed = doc.at("seed").get<std::uint64_t>(); });

    run.output_dir = base_dir / "harmony_out";
    if (doc.contains("output_dir"))
        collect(errors, "output_dir", [&] { run.output_dir = base_dir / doc.at("output_dir").get<std::string>(); });

    if (!doc.contains("dataset")) {
        errors.push_back("dataset: required (give 'path' or a 'generate' table)");
    } else {
        const json& ds = doc.at("dataset");
        collect(errors, "dataset", [&] {
            for (const auto& [key, v] : ds.items())
                if (key != "path" && key != "generate" && key != "dependence" && key != "independence")
                    throw ConfigError("unknown key '" + key + "'");
            if (ds.contains("path") == ds.contains("generate"))
                throw ConfigError("give exactly one of 'path' or 'generate'");
        });
        if (ds.contains("path"))
            collect(errors, "dataset.path", [&] {
                const fs::path p = base_dir / ds.at("path").get<std::string>();
                if (!fs::exists(p))
                    throw ConfigError("dataset path '" + p.string() + "' does not exist");
                run.source.path = p;
            });
        if (ds.contains("generate"))
            collect(errors, "dataset.generate", [&] {
                if (ds.at("generate").contains("seed"))
                    run.source.generate_seed = ds.at("generate").at("seed").get<std::uint64_t>();
                run.source.generate = synth::GenConfig::from_json(ds.at("generate"));
            });
        if (ds.contains("dependence") && ds.contains("independence"))
            errors.push_back("dataset: 'dependence' and 'independence' samplers are mutually exclusive");
        if (ds.contains("dependence"))
            collect(errors, "dataset.dependence",
                    [&] { run.source.dependence = synth::DependenceSpec::from_json(ds.at("dependence")); });
        if (ds.contains("independence"))
            collect(errors, "dataset.independence",
                    [&] { run.source.independence = synth::IndependenceSpec::from_json(ds.at("independence")); });
    }

    if (doc.contains("schema"))
        collect(errors, "schema", [&] { run.schema = schema_from_json(doc.at("schema")); });
    else if (run.source.path)
        errors.push_back("schema: required for a dataset read from a file");

    if (doc.contains("cv"))
        collect(errors, "cv", [&] {
            for (const auto& [key, v] : doc.at("cv").items()) {
                if (key == "k") run.k = v.get<int>();
                else if (key == "repeats") run.repeats = v.get<int>();
                else throw ConfigError("unknown key '" + key + "'");
            }
            if (run.k < 2)
                throw ConfigError("k must be >= 2");
            if (run.repeats < 1)
                throw ConfigError("repeats must be >= 1");
        });

    run.schemes = {schemes::SchemeKind::Unharmonized, schemes::SchemeKind::WDH, schemes::SchemeKind::TTL,
                   schemes::SchemeKind::NoTarget, schemes::SchemeKind::Pretty};
    if (doc.contains("schemes"))
        collect(errors, "schemes", [&] {
            run.schemes.clear();
            for (const auto& name : string_list(doc.at("schemes")))
                run.schemes.push_back(schemes::scheme_kind_from_string(name));
            if (run.schemes.empty())
                throw ConfigError("at least one scheme is required");
        });

    if (doc.contains("predictor"))
        collect(errors, "predictor", [&] { run.predictor = predictors::PredictorSpec::from_json(doc.at("predictor")); });
    if (doc.contains("pretty"))
        collect(errors, "pretty", [&] {
            run.pretty = doc.at("pretty");
            if (!run.pretty.is_object())
                throw ConfigError("must be a table");
        });
    if (doc.contains("combat"))
        collect(errors, "combat", [&] { run.combat = combat_from_json(doc.at("combat")); });
    if (doc.contains("use_covariates"))
        collect(errors, "use_covariates", [&] { run.use_covariates = doc.at("use_covariates").get<bool>(); });
    if (doc.contains("f1_positive"))
        collect(errors, "f1_positive", [&] { run.f1_positive = doc.at("f1_positive").get<std::string>(); });

    // Checks that need the task.
    if (errors.empty()) {
        const TaskKind task = run.classification() ? TaskKind::classification({"_"}) : TaskKind::regression();
        if (run.predictor)
            collect(errors, "predictor", [&] {
                if (predictors::is_classifier(run.predictor->kind) != run.classification())
                    throw ConfigError("kind '" + predictors::to_string(run.predictor->kind) + "' does not match the task");
            });
        collect(errors, "pretty", [&] { pretty::PrettyConfig::from_json(run.pretty, task); });
    }

    if (!errors.empty()) {
        std::string msg = std::to_string(errors.size()) + " config error" + (errors.size() > 1 ? "s" : "") + ": ";
        for (std::size_t i = 0; i < errors.size(); ++i)
            msg += (i ? "; " : "") + errors[i];
        throw ConfigError(msg);
    }
    return run;
}

RunConfig load_run_config(const fs::path& path)
{
    return parse_run_config(load_document(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

Dataset load_run_dataset(const RunConfig& run)
{
    Dataset data;
    if (run.source.generate) {
        auto g = *run.source.generate;
        g.seed = run.source.generate_seed ? *run.source.generate_seed : seed::derive(run.seed, "generate");
        data = synth::generate(g);
    } else {
        data = load_dataset(*run.source.path, run.schema);
    }
    const std::uint64_t sampling = seed::derive(run.seed, "sampling");
    if (run.source.dependence)
        data = synth::sample_dependence(data, *run.source.dependence, sampling);
    if (run.source.independence)
        data = synth::sample_independence(data, *run.source.independence, sampling);
    data.validate();
    return data;
}

std::vector<schemes::ExperimentConfig> experiment_configs(const RunConfig& run, const TaskKind& task)
{
    std::vector<schemes::ExperimentConfig> out;
    for (auto kind : run.schemes) {
        auto c = schemes::ExperimentConfig::defaults_for(kind, task);
        if (run.predictor)
            c.predictor = *run.predictor;
        c.k = run.k;
        c.repeats = run.repeats;
        c.seed = run.seed;
        c.combat = run.combat;
        c.use_covariates = run.use_covariates;
        auto pj = run.pretty;
        if (!pj.contains("predictive"))
            pj["predictive"] = c.predictor.to_json();
        c.pretty = pretty::PrettyConfig::from_json(pj, task);
        if (!run.f1_positive.empty())
            c.f1_positive = task.class_index(run.f1_positive);
        c.validate(task);
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace harmony::config
