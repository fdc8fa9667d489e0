#include "harmony/combat.hpp"
#include "harmony/error.hpp"
#include "harmony/json_io.hpp"

namespace harmony::combat {

using nlohmann::json;

json CombatModel::to_json() const
{
    json j;
    j["format"] = "harmony.combat";
    j["version"] = 1;
    j["config"] = {
        {"use_eb", config_.use_eb},   {"max_iters", config_.max_iters},     {"tol", config_.tol},
        {"ridge_eps", config_.ridge_eps}, {"sigma_floor", config_.sigma_floor},
    };
    json sites = json::array();
    for (const auto& s : sites_)
        sites.push_back({{"name", s.name}, {"count", s.count}});
    j["sites"] = std::move(sites);
    j["n_features"] = n_features();
    j["covariate_width"] = covariate_width();
    j["alpha"] = jsonio::vector_to_json(alpha_);
    j["beta"] = jsonio::matrix_to_json(beta_);
    j["sigma"] = jsonio::vector_to_json(sigma_);
    j["gamma_hat"] = jsonio::matrix_to_json(gamma_hat_);
    j["delta2_hat"] = jsonio::matrix_to_json(delta2_hat_);
    j["gamma_star"] = jsonio::matrix_to_json(gamma_star_);
    j["delta_star2"] = jsonio::matrix_to_json(delta_star2_);
    json priors = json::array();
    for (const auto& p : priors_)
        priors.push_back({{"gamma_bar", p.gamma_bar},
                          {"tau2", p.tau2},
                          {"lambda", p.ig.lambda},
                          {"theta", p.ig.theta},
                          {"degenerate", p.ig.degenerate}});
    j["priors"] = std::move(priors);
    j["eb_iterations"] = eb_iterations_;
    return j;
}

CombatModel CombatModel::from_json(const json& j)
{
    try {
        if (j.at("format").get<std::string>() != "harmony.combat")
            throw ConfigError("not a ComBat model document");
        CombatModel m;
        const auto& c = j.at("config");
        m.config_.use_eb = c.at("use_eb").get<bool>();
        m.config_.max_iters = c.at("max_iters").get<int>();
        m.config_.tol = c.at("tol").get<double>();
        m.config_.ridge_eps = c.at("ridge_eps").get<double>();
        m.config_.sigma_floor = c.at("sigma_floor").get<double>();
        m.config_.validate();
        for (const auto& s : j.at("sites"))
            m.sites_.push_back({s.at("name").get<std::string>(), s.at("count").get<int>()});
        const auto p = j.at("n_features").get<Eigen::Index>();
        const auto t = j.at("covariate_width").get<Eigen::Index>();
        const auto s = static_cast<Eigen::Index>(m.sites_.size());
        m.alpha_ = jsonio::vector_from_json(j.at("alpha"), p);
        m.beta_ = jsonio::matrix_from_json(j.at("beta"), t, p);
        m.sigma_ = jsonio::vector_from_json(j.at("sigma"), p);
        m.gamma_hat_ = jsonio::matrix_from_json(j.at("gamma_hat"), s, p);
        m.delta2_hat_ = jsonio::matrix_from_json(j.at("delta2_hat"), s, p);
        m.gamma_star_ = jsonio::matrix_from_json(j.at("gamma_star"), s, p);
        m.delta_star2_ = jsonio::matrix_from_json(j.at("delta_star2"), s, p);
        for (const auto& pj : j.at("priors")) {
            SitePriors pr;
            pr.gamma_bar = pj.at("gamma_bar").get<double>();
            pr.tau2 = pj.at("tau2").get<double>();
            pr.ig.lambda = pj.at("lambda").get<double>();
            pr.ig.theta = pj.at("theta").get<double>();
            pr.ig.degenerate = pj.at("degenerate").get<bool>();
            m.priors_.push_back(pr);
        }
        m.eb_iterations_ = j.at("eb_iterations").get<std::vector<int>>();
        if (static_cast<Eigen::Index>(m.priors_.size()) != s || static_cast<Eigen::Index>(m.eb_iterations_.size()) != s)
            throw ConfigError("ComBat model: per-site arrays do not match site count");
        for (std::size_t i = 1; i < m.sites_.size(); ++i)
            if (!(m.sites_[i - 1].name < m.sites_[i].name))
                throw ConfigError("ComBat model: sites must be sorted and unique");
        if ((m.delta_star2_.array() <= 0.0).any())
            throw ConfigError("ComBat model: delta_star2 must be positive");
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed ComBat model: ") + e.what());
    }
}

} // namespace harmony::combat
