#pragma once

// Parametric ComBat: per-feature linear model with site indicators and
// covariates, pooled standardization, and per-site location/scale corrections
// optionally shrunk by empirical Bayes.

#include <Eigen/Dense>
#include "json.hpp"

#include <span>
#include <string>
#include <vector>

namespace harmony::combat {

struct CombatConfig {
    bool use_eb = true;
    int max_iters = 500;
    /// Stop when max relative change over gamma* and delta*^2 drops below this.
    double tol = 1e-4;
    double ridge_eps = 1e-8;
    double sigma_floor = 1e-8;

    /// Throws ConfigError on invalid values.
    void validate() const;
    bool operator==(const CombatConfig&) const = default;
};

/// Inverse-gamma hyperprior for the multiplicative effects of one site.
struct InverseGammaPrior {
    double lambda = 0.0;
    double theta = 0.0;
    /// Set when the variance of delta-hat^2 is too small to match moments;
    /// shrinkage is skipped for that site.
    bool degenerate = false;
};

/// lambda = (2 s2 + m^2) / s2, theta = (m s2 + m^3) / s2. The inverse gamma with
/// these parameters has mean m and variance s2.
InverseGammaPrior moment_match_inverse_gamma(double m, double s2);

struct SitePriors {
    double gamma_bar = 0.0;
    double tau2 = 0.0;
    InverseGammaPrior ig;
};

struct SiteInfo {
    std::string name;
    int count = 0;
};

/// One empirical-Bayes fixed-point step for a single (site, feature) cell.
/// Returns the updated gamma* from the previous delta*^2.
double eb_gamma_update(double gamma_hat, double gamma_bar, double tau2, int n, double delta2_prev);
/// Returns the updated delta*^2 from sum_j (z_j - gamma*)^2.
double eb_delta2_update(double sum_sq, int n, double lambda, double theta);

class CombatModel {
public:
    const CombatConfig& config() const noexcept { return config_; }
    const std::vector<SiteInfo>& sites() const noexcept { return sites_; }
    /// Index into sites(); throws DataError naming unknown sites.
    int site_index(const std::string& name) const;

    const Eigen::VectorXd& alpha() const noexcept { return alpha_; }         // p
    const Eigen::MatrixXd& beta() const noexcept { return beta_; }           // t x p
    const Eigen::VectorXd& sigma() const noexcept { return sigma_; }         // p
    const Eigen::MatrixXd& gamma_hat() const noexcept { return gamma_hat_; } // s x p
    const Eigen::MatrixXd& delta2_hat() const noexcept { return delta2_hat_; }
    const Eigen::MatrixXd& gamma_star() const noexcept { return gamma_star_; }
    const Eigen::MatrixXd& delta_star2() const noexcept { return delta_star2_; }
    const std::vector<SitePriors>& priors() const noexcept { return priors_; }
    /// Iterations used by the EB loop per site (0 when shrinkage was skipped).
    const std::vector<int>& eb_iterations() const noexcept { return eb_iterations_; }

    Eigen::Index n_features() const noexcept { return alpha_.size(); }
    Eigen::Index covariate_width() const noexcept { return beta_.rows(); }

    nlohmann::json to_json() const;
    static CombatModel from_json(const nlohmann::json& j);

    bool operator==(const CombatModel&) const;

private:
    friend struct Fitter;

    CombatConfig config_;
    std::vector<SiteInfo> sites_;
    Eigen::VectorXd alpha_;
    Eigen::MatrixXd beta_;
    Eigen::VectorXd sigma_;
    Eigen::MatrixXd gamma_hat_;
    Eigen::MatrixXd delta2_hat_;
    Eigen::MatrixXd gamma_star_;
    Eigen::MatrixXd delta_star2_;
    std::vector<SitePriors> priors_;
    std::vector<int> eb_iterations_;
};

/// Fits ComBat. `covariates` may have zero columns.
CombatModel fit(const Eigen::MatrixXd& features, std::span<const std::string> sites,
                const Eigen::MatrixXd& covariates, const CombatConfig& config);

struct FitTransformResult {
    CombatModel model;
    Eigen::MatrixXd adjusted;
};

/// Fits and returns the adjusted training matrix computed from fit-time
/// standardized values. Equal bit-for-bit to transform(model, same inputs).
FitTransformResult fit_transform(const Eigen::MatrixXd& features, std::span<const std::string> sites,
                                 const Eigen::MatrixXd& covariates, const CombatConfig& config);

/// Applies stored corrections. No refitting. Covariate width must match fit time.
Eigen::MatrixXd transform(const CombatModel& model, const Eigen::MatrixXd& features,
                          std::span<const std::string> sites, const Eigen::MatrixXd& covariates);

} // namespace harmony::combat
