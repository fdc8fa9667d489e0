#include "harmony/synthgen.hpp"

#include "harmony/error.hpp"
#include "harmony/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <limits>
#include <random>
#include <set>

namespace harmony::synth {

using nlohmann::json;

namespace {

std::string numbered(const char* prefix, int i, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
    return buf;
}

int digits(int n) { return n < 10 ? 2 : static_cast<int>(std::to_string(n).size()); }

bool has_site_effects(Signal s) { return s == Signal::EosOnly || s == Signal::Both; }
bool has_true_signal(Signal s) { return s == Signal::TrueOnly || s == Signal::Both; }

std::vector<int> shuffled(std::vector<int> rows, std::mt19937_64& rng)
{
    std::shuffle(rows.begin(), rows.end(), rng);
    return rows;
}

std::map<std::string, std::vector<int>> rows_by_site(const Dataset& data)
{
    std::map<std::string, std::vector<int>> out;
    for (std::size_t i = 0; i < data.sites.size(); ++i)
        out[data.sites[i]].push_back(static_cast<int>(i));
    return out;
}

std::vector<int> finish(std::vector<int> keep)
{
    std::sort(keep.begin(), keep.end());
    return keep;
}

Dataset checked_subset(const Dataset& data, const std::vector<int>& rows)
{
    Dataset out = subset(data, rows);
    out.validate();
    return out;
}

template <class T>
T enum_from(const std::string& s, std::initializer_list<T> values, const char* what)
{
    for (T v : values)
        if (to_string(v) == s)
            return v;
    std::string known;
    for (T v : values)
        known += (known.empty() ? "" : ", ") + to_string(v);
    throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected " + known + ")");
}

} // namespace

std::string to_string(Signal s)
{
    switch (s) {
    case Signal::TrueOnly: return "TrueOnly";
    case Signal::EosOnly: return "EosOnly";
    case Signal::Both: return "Both";
    case Signal::Null: return "Null";
    }
    return "?";
}

std::string to_string(Form f) { return f == Form::Simple ? "Simple" : "Interaction"; }
std::string to_string(TargetKind t) { return t == TargetKind::Binary ? "binary" : "age"; }

Signal signal_from_string(const std::string& s)
{
    return enum_from(s, {Signal::TrueOnly, Signal::EosOnly, Signal::Both, Signal::Null}, "signal");
}
Form form_from_string(const std::string& s) { return enum_from(s, {Form::Simple, Form::Interaction}, "form"); }
TargetKind target_kind_from_string(const std::string& s)
{
    return enum_from(s, {TargetKind::Binary, TargetKind::Age}, "target kind");
}

double GenConfig::resolved_effect() const
{
    if (effect_size >= 0.0)
        return effect_size;
    if (target == TargetKind::Age)
        return kDefaultAgeLoading;
    return form == Form::Simple ? kDefaultSimpleEffect : kDefaultInteractionEffect;
}

void GenConfig::validate() const
{
    if (n_sites < 2)
        throw ConfigError("n_sites must be >= 2");
    if (n_features < 1)
        throw ConfigError("n_features must be >= 1");
    if (n_samples < 2 * n_sites)
        throw ConfigError("n_samples must give every site at least 2 rows");
    if (!std::isfinite(effect_size) || !std::isfinite(site_shift_scale) || !std::isfinite(site_scale_spread))
        throw ConfigError("generator parameters must be finite");
    if (site_shift_scale < 0.0 || site_scale_spread < 0.0)
        throw ConfigError("site effect scales must be >= 0");
    if (!(site_target_bias >= 0.5 && site_target_bias < 1.0))
        throw ConfigError("site_target_bias must lie in [0.5, 1)");
    if (form == Form::Interaction && target == TargetKind::Binary && n_features < 2)
        throw ConfigError("interaction form needs at least 2 features");
}

json GenConfig::to_json() const
{
    return {{"n_sites", n_sites},
            {"n_samples", n_samples},
            {"n_features", n_features},
            {"signal", to_string(signal)},
            {"form", to_string(form)},
            {"target", to_string(target)},
            {"effect_size", resolved_effect()},
            {"site_shift_scale", site_shift_scale},
            {"site_scale_spread", site_scale_spread},
            {"site_target_bias", site_target_bias},
            {"seed", seed}};
}

GenConfig GenConfig::from_json(const json& j)
{
    GenConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n_sites") c.n_sites = v.get<int>();
            else if (key == "n_samples") c.n_samples = v.get<int>();
            else if (key == "n_features") c.n_features = v.get<int>();
            else if (key == "signal") c.signal = signal_from_string(v.get<std::string>());
            else if (key == "form") c.form = form_from_string(v.get<std::string>());
            else if (key == "target") c.target = target_kind_from_string(v.get<std::string>());
            else if (key == "effect_size") c.effect_size = v.get<double>();
            else if (key == "site_shift_scale") c.site_shift_scale = v.get<double>();
            else if (key == "site_scale_spread") c.site_scale_spread = v.get<double>();
            else if (key == "site_target_bias") c.site_target_bias = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw ConfigError("unknown generator option '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("generator config: ") + e.what());
    }
    c.validate();
    return c;
}

Dataset generate(const GenConfig& config)
{
    config.validate();
    const int n = config.n_samples;
    const int p = config.n_features;
    const int S = config.n_sites;
    const double effect = config.resolved_effect();

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Eigen::MatrixXd base(n, p);
    {
        std::mt19937_64 rng(seed::derive(config.seed, "base-noise"));
        for (int i = 0; i < n; ++i)
            for (int g = 0; g < p; ++g)
                base(i, g) = normal(rng);
    }

    std::vector<int> site(static_cast<std::size_t>(n));
    {
        std::mt19937_64 rng(seed::derive(config.seed, "sites"));
        for (int i = 0; i < n; ++i)
            site[static_cast<std::size_t>(i)] = i % S;
        std::shuffle(site.begin(), site.end(), rng);
    }

    Eigen::MatrixXd shift(S, p), scale(S, p);
    {
        std::mt19937_64 rng(seed::derive(config.seed, "site-effects"));
        normal.reset();
        for (int s = 0; s < S; ++s)
            for (int g = 0; g < p; ++g) {
                shift(s, g) = config.site_shift_scale * normal(rng);
                scale(s, g) = std::exp(config.site_scale_spread * normal(rng));
            }
    }

    std::vector<double> u(static_cast<std::size_t>(n)), u_sex(static_cast<std::size_t>(n));
    {
        std::mt19937_64 rng(seed::derive(config.seed, "target"));
        for (auto& x : u)
            x = uniform(rng);
        std::mt19937_64 rng_sex(seed::derive(config.seed, "sex"));
        for (auto& x : u_sex)
            x = uniform(rng_sex);
    }

    const bool site_fx = has_site_effects(config.signal);
    const bool true_fx = has_true_signal(config.signal);

    Dataset d;
    d.features = base;
    d.target.resize(n);
    d.sites.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        d.sites[static_cast<std::size_t>(i)] = numbered("site", site[static_cast<std::size_t>(i)] + 1, digits(S));
    for (int g = 0; g < p; ++g)
        d.feature_names.push_back(numbered("f", g + 1, digits(p)));

    if (config.target == TargetKind::Binary) {
        d.task = TaskKind::classification({"A", "B"});
        // Which class each site favors when site identity carries target signal.
        std::vector<int> favored(static_cast<std::size_t>(S));
        for (int s = 0; s < S; ++s) {
            const bool a = shift(s, 0) > 0.0;
            const bool b = p > 1 && shift(s, 1) > 0.0;
            favored[static_cast<std::size_t>(s)] = config.form == Form::Simple ? a : (a != b);
        }
        if (std::all_of(favored.begin(), favored.end(), [&](int f) { return f == favored[0]; }))
            for (int s = 0; s < S; ++s)
                favored[static_cast<std::size_t>(s)] = s % 2;
        for (int i = 0; i < n; ++i) {
            const std::size_t iu = static_cast<std::size_t>(i);
            double prob_b = 0.5;
            if (site_fx)
                prob_b = favored[static_cast<std::size_t>(site[iu])] ? config.site_target_bias : 1.0 - config.site_target_bias;
            d.target[i] = u[iu] < prob_b ? 1.0 : 0.0;
        }
        if (true_fx) {
            for (int i = 0; i < n; ++i) {
                const double sign = 2.0 * d.target[i] - 1.0;
                if (config.form == Form::Simple) {
                    for (int g = 0; g < std::min(p, 6); ++g)
                        d.features(i, g) += effect * sign / 2.0;
                } else {
                    for (int a = 0; a + 1 < std::min(p, 6); a += 2)
                        d.features(i, a + 1) += effect * sign * base(i, a);
                }
            }
        }
    } else {
        d.task = TaskKind::regression();
        const double lo = 18.0, hi = 88.0;
        const double mid = (lo + hi) / 2.0, sd = (hi - lo) / std::sqrt(12.0);
        d.covariates.resize(n, 1);
        d.covariate_names = {"sex"};
        for (int i = 0; i < n; ++i) {
            const std::size_t iu = static_cast<std::size_t>(i);
            d.target[i] = lo + (hi - lo) * u[iu];
            d.covariates(i, 0) = u_sex[iu] < 0.5 ? 0.0 : 1.0;
            if (true_fx)
                d.features.row(i).array() += effect * (d.target[i] - mid) / sd;
        }
    }
    if (d.covariates.rows() != n)
        d.covariates.resize(n, 0);

    if (site_fx)
        for (int i = 0; i < n; ++i) {
            const int s = site[static_cast<std::size_t>(i)];
            d.features.row(i) = (d.features.row(i).array() * scale.row(s).array() + shift.row(s).array()).matrix();
        }
    return d;
}

// ---------------------------------------------------------------------------

void DependenceSpec::validate() const
{
    if (minority_count < 1)
        throw ConfigError("minority_count must be >= 1; a site without minority rows makes the target collinear with site");
    if (majority_cap < 0 || per_site_cap < 0)
        throw ConfigError("caps must be >= 0");
    for (const auto& [s, fr] : retention)
        for (double f : fr)
            if (!(f > 0.0 && f <= 1.0))
                throw ConfigError("retention fractions for site '" + s + "' must lie in (0, 1]");
    for (const auto& [s, r] : ranges)
        if (!(r.second > r.first))
            throw ConfigError("empty target range for site '" + s + "'");
}

DependenceSpec DependenceSpec::from_json(const json& j)
{
    DependenceSpec d;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "majority") d.majority = v.get<std::map<std::string, std::string>>();
            else if (key == "minority_count") d.minority_count = v.get<int>();
            else if (key == "majority_cap") d.majority_cap = v.get<int>();
            else if (key == "retention") d.retention = v.get<std::map<std::string, std::vector<double>>>();
            else if (key == "ranges") {
                for (const auto& [s, r] : v.items())
                    d.ranges[s] = {r.at(0).get<double>(), r.at(1).get<double>()};
            } else if (key == "balance_covariate") d.balance_covariate = v.get<std::string>();
            else if (key == "per_site_cap") d.per_site_cap = v.get<int>();
            else throw ConfigError("unknown dependence option '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("dependence config: ") + e.what());
    }
    d.validate();
    return d;
}

std::vector<int> dependence_rows(const Dataset& data, const DependenceSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const auto by_site = rows_by_site(data);
    std::vector<int> keep;

    if (data.task.is_classification()) {
        const int K = data.task.n_classes();
        int site_no = 0;
        for (const auto& [site, rows] : by_site) {
            std::mt19937_64 rng(seed::derive(seed, site));
            std::vector<std::vector<int>> per_class(static_cast<std::size_t>(K));
            for (int r : rows)
                per_class[static_cast<std::size_t>(data.target[r])].push_back(r);
            for (auto& c : per_class)
                c = shuffled(c, rng);

            if (auto it = spec.retention.find(site); it != spec.retention.end()) {
                if (static_cast<int>(it->second.size()) != K)
                    throw ConfigError("retention for site '" + site + "' needs one fraction per class");
                for (int c = 0; c < K; ++c) {
                    const auto& pool = per_class[static_cast<std::size_t>(c)];
                    const auto take = static_cast<std::size_t>(
                        std::max(1.0, std::round(it->second[static_cast<std::size_t>(c)] * static_cast<double>(pool.size()))));
                    if (pool.empty())
                        throw DataError("site '" + site + "' has no rows of class '" + data.task.classes()[static_cast<std::size_t>(c)] + "'");
                    keep.insert(keep.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(take, pool.size())));
                }
                ++site_no;
                continue;
            }

            int major = site_no % K;
            if (auto it = spec.majority.find(site); it != spec.majority.end())
                major = data.task.class_index(it->second);
            for (int c = 0; c < K; ++c) {
                const auto& pool = per_class[static_cast<std::size_t>(c)];
                std::size_t take = pool.size();
                if (c == major) {
                    if (spec.majority_cap > 0)
                        take = std::min(take, static_cast<std::size_t>(spec.majority_cap));
                } else {
                    if (pool.size() < static_cast<std::size_t>(spec.minority_count))
                        throw DataError("site '" + site + "' has " + std::to_string(pool.size()) + " rows of minority class '" +
                                        data.task.classes()[static_cast<std::size_t>(c)] + "', need " +
                                        std::to_string(spec.minority_count));
                    take = static_cast<std::size_t>(spec.minority_count);
                }
                keep.insert(keep.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
            }
            ++site_no;
        }
        return finish(std::move(keep));
    }

    // Regression: disjoint target ranges per site.
    int balance_col = -1;
    if (!spec.balance_covariate.empty()) {
        const auto& names = data.covariate_names;
        auto it = std::find(names.begin(), names.end(), spec.balance_covariate);
        if (it == names.end())
            throw ConfigError("balance covariate '" + spec.balance_covariate + "' not in dataset");
        balance_col = static_cast<int>(it - names.begin());
    }
    const double lo = data.target.minCoeff(), hi = data.target.maxCoeff();
    const int S = static_cast<int>(by_site.size());
    int site_no = 0;
    for (const auto& [site, rows] : by_site) {
        std::pair<double, double> range{lo + (hi - lo) * site_no / S, lo + (hi - lo) * (site_no + 1) / S};
        bool last = site_no == S - 1;
        if (auto it = spec.ranges.find(site); it != spec.ranges.end()) {
            range = it->second;
            last = range.second >= hi;
        }
        std::mt19937_64 rng(seed::derive(seed, site));
        std::map<double, std::vector<int>> groups;
        for (int r : rows) {
            const double t = data.target[r];
            if (t >= range.first && (t < range.second || (last && t <= range.second)))
                groups[balance_col < 0 ? 0.0 : data.covariates(r, balance_col)].push_back(r);
        }
        std::size_t per_group = std::numeric_limits<std::size_t>::max();
        for (auto& [g, members] : groups) {
            members = shuffled(members, rng);
            per_group = std::min(per_group, members.size());
        }
        if (groups.empty())
            throw DataError("site '" + site + "' has no rows in its target range");
        if (balance_col < 0)
            per_group = groups.begin()->second.size();
        if (spec.per_site_cap > 0)
            per_group = std::min(per_group, static_cast<std::size_t>(spec.per_site_cap) / groups.size());
        std::size_t kept = 0;
        for (const auto& [g, members] : groups) {
            keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(per_group));
            kept += per_group;
        }
        if (kept < 2)
            throw DataError("site '" + site + "' keeps fewer than 2 rows in its target range");
        ++site_no;
    }
    return finish(std::move(keep));
}

// ---------------------------------------------------------------------------

void IndependenceSpec::validate() const
{
    if (per_site_total < 0)
        throw ConfigError("per_site_total must be >= 0");
    if (n_bins < 1)
        throw ConfigError("n_bins must be >= 1");
}

IndependenceSpec IndependenceSpec::from_json(const json& j)
{
    IndependenceSpec s;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "per_site_total") s.per_site_total = v.get<int>();
            else if (key == "n_bins") s.n_bins = v.get<int>();
            else throw ConfigError("unknown independence option '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("independence config: ") + e.what());
    }
    s.validate();
    return s;
}

std::vector<int> independence_rows(const Dataset& data, const IndependenceSpec& spec, std::uint64_t seed)
{
    spec.validate();
    const bool cls = data.task.is_classification();
    const int groups = cls ? data.task.n_classes() : spec.n_bins;
    const double lo = data.target.minCoeff(), hi = data.target.maxCoeff();
    auto group_of = [&](int r) {
        if (cls)
            return static_cast<int>(data.target[r]);
        if (!(hi > lo))
            return 0;
        return std::min(groups - 1, static_cast<int>((data.target[r] - lo) / (hi - lo) * groups));
    };

    std::vector<int> keep;
    for (const auto& [site, rows] : rows_by_site(data)) {
        std::mt19937_64 rng(seed::derive(seed, site));
        std::vector<std::vector<int>> pools(static_cast<std::size_t>(groups));
        for (int r : rows)
            pools[static_cast<std::size_t>(group_of(r))].push_back(r);
        std::size_t smallest = rows.size();
        for (auto& pool : pools) {
            pool = shuffled(pool, rng);
            smallest = std::min(smallest, pool.size());
        }
        std::vector<std::size_t> want(static_cast<std::size_t>(groups), smallest);
        if (spec.per_site_total > 0) {
            const auto total = static_cast<std::size_t>(spec.per_site_total);
            for (std::size_t g = 0; g < want.size(); ++g)
                want[g] = total / want.size() + (g < total % want.size() ? 1 : 0);
        }
        for (std::size_t g = 0; g < pools.size(); ++g) {
            if (pools[g].size() < want[g] || want[g] == 0)
                throw DataError("site '" + site + "' cannot supply " + std::to_string(want[g]) + " rows of " +
                                (cls ? "class '" + data.task.classes()[g] + "'" : "target bin " + std::to_string(g)) +
                                " (has " + std::to_string(pools[g].size()) + ")");
            keep.insert(keep.end(), pools[g].begin(), pools[g].begin() + static_cast<std::ptrdiff_t>(want[g]));
        }
    }
    return finish(std::move(keep));
}

Dataset sample_dependence(const Dataset& data, const DependenceSpec& spec, std::uint64_t seed)
{
    return checked_subset(data, dependence_rows(data, spec, seed));
}

Dataset sample_independence(const Dataset& data, const IndependenceSpec& spec, std::uint64_t seed)
{
    return checked_subset(data, independence_rows(data, spec, seed));
}

} // namespace harmony::synth
