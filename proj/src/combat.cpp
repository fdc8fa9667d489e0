#include "harmony/combat.hpp"

#include "harmony/error.hpp"
#include "harmony/parallel.hpp"
#include "harmony/simd/kernels.hpp"
#include "harmony/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace harmony::combat {

namespace {

// Relative variance of delta-hat^2 across features below which moment
// matching is treated as degenerate.
constexpr double kDegenerateRelVariance = 1e-12;

double relative_change(double now, double before)
{
    const double diff = std::abs(now - before);
    if (diff == 0.0)
        return 0.0;
    const double den = std::abs(before);
    return den > 0.0 ? diff / den : std::numeric_limits<double>::infinity();
}

double mean_of(const Eigen::Ref<const Eigen::RowVectorXd>& v) { return v.sum() / static_cast<double>(v.size()); }

double sample_variance(const Eigen::Ref<const Eigen::RowVectorXd>& v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean_of(v);
    return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

void check_inputs(const Eigen::MatrixXd& features, std::span<const std::string> sites,
                  const Eigen::MatrixXd& covariates)
{
    if (static_cast<Eigen::Index>(sites.size()) != features.rows())
        throw DataError("site label count " + std::to_string(sites.size()) + " does not match row count " +
                        std::to_string(features.rows()));
    if (covariates.cols() > 0 && covariates.rows() != features.rows())
        throw DataError("covariate row count does not match feature row count");
    if (!features.allFinite())
        throw DataError("non-finite feature value passed to ComBat");
    if (covariates.size() > 0 && !covariates.allFinite())
        throw DataError("non-finite covariate value passed to ComBat");
}

/// alpha_g + sum_k X_jk beta_kg, evaluated row by row in a fixed order so the
/// result for a row never depends on the other rows in the batch.
Eigen::MatrixXd stand_mean(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& beta,
                           const Eigen::MatrixXd& covariates, Eigen::Index rows)
{
    const Eigen::Index p = alpha.size();
    const Eigen::Index t = beta.rows();
    Eigen::MatrixXd out(rows, p);
    for (Eigen::Index g = 0; g < p; ++g) {
        for (Eigen::Index j = 0; j < rows; ++j) {
            double v = alpha[g];
            for (Eigen::Index k = 0; k < t; ++k)
                v += covariates(j, k) * beta(k, g);
            out(j, g) = v;
        }
    }
    return out;
}

double adjust_scale(double sigma, double delta_star2) { return sigma / std::sqrt(delta_star2); }

/// Rows grouped by site index (stable), with block offsets.
struct SiteGrouping {
    std::vector<int> order;
    std::vector<std::size_t> offsets; // size s + 1
};

SiteGrouping group_by_site(const std::vector<int>& site_of_row, std::size_t n_sites)
{
    SiteGrouping g;
    g.order.resize(site_of_row.size());
    std::iota(g.order.begin(), g.order.end(), 0);
    std::stable_sort(g.order.begin(), g.order.end(),
                     [&](int a, int b) { return site_of_row[static_cast<std::size_t>(a)] < site_of_row[static_cast<std::size_t>(b)]; });
    g.offsets.assign(n_sites + 1, 0);
    for (int s : site_of_row)
        ++g.offsets[static_cast<std::size_t>(s) + 1];
    for (std::size_t i = 1; i <= n_sites; ++i)
        g.offsets[i] += g.offsets[i - 1];
    return g;
}

/// Standardizes column g into `z` (grouped order), returning the grouped
/// stand-mean column in `mean_out`.
void standardize_column(const Eigen::MatrixXd& features, const Eigen::MatrixXd& smean, const SiteGrouping& grp,
                        Eigen::Index g, double sigma, std::vector<double>& y_buf, std::vector<double>& mean_out,
                        std::span<double> z)
{
    const std::size_t n = grp.order.size();
    y_buf.resize(n);
    mean_out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        y_buf[i] = features(grp.order[i], g);
        mean_out[i] = smean(grp.order[i], g);
    }
    simd::kernels().standardize(y_buf, mean_out, sigma, z);
}

} // namespace

void CombatConfig::validate() const
{
    if (!(tol > 0.0))
        throw ConfigError("combat tol must be > 0");
    if (max_iters < 1)
        throw ConfigError("combat max_iters must be >= 1");
    if (!(sigma_floor > 0.0))
        throw ConfigError("combat sigma_floor must be > 0");
    if (!(ridge_eps >= 0.0))
        throw ConfigError("combat ridge_eps must be >= 0");
}

InverseGammaPrior moment_match_inverse_gamma(double m, double s2)
{
    InverseGammaPrior p;
    if (!(s2 > kDegenerateRelVariance * m * m) || !std::isfinite(s2) || !std::isfinite(m)) {
        p.degenerate = true;
        return p;
    }
    p.lambda = (2.0 * s2 + m * m) / s2;
    p.theta = (m * s2 + m * m * m) / s2;
    return p;
}

double eb_gamma_update(double gamma_hat, double gamma_bar, double tau2, int n, double delta2_prev)
{
    const double nt = static_cast<double>(n) * tau2;
    return (nt * gamma_hat + delta2_prev * gamma_bar) / (nt + delta2_prev);
}

double eb_delta2_update(double sum_sq, int n, double lambda, double theta)
{
    return (theta + 0.5 * sum_sq) / (static_cast<double>(n) / 2.0 + lambda - 1.0);
}

int CombatModel::site_index(const std::string& name) const
{
    auto it = std::lower_bound(sites_.begin(), sites_.end(), name,
                               [](const SiteInfo& s, const std::string& v) { return s.name < v; });
    if (it == sites_.end() || it->name != name)
        throw DataError("unknown site '" + name + "'");
    return static_cast<int>(it - sites_.begin());
}

bool CombatModel::operator==(const CombatModel& o) const
{
    auto same_sites = std::equal(sites_.begin(), sites_.end(), o.sites_.begin(), o.sites_.end(),
                                 [](const SiteInfo& a, const SiteInfo& b) { return a.name == b.name && a.count == b.count; });
    auto same_priors = std::equal(priors_.begin(), priors_.end(), o.priors_.begin(), o.priors_.end(),
                                  [](const SitePriors& a, const SitePriors& b) {
                                      return a.gamma_bar == b.gamma_bar && a.tau2 == b.tau2 && a.ig.lambda == b.ig.lambda &&
                                             a.ig.theta == b.ig.theta && a.ig.degenerate == b.ig.degenerate;
                                  });
    return config_ == o.config_ && same_sites && same_priors && alpha_ == o.alpha_ && beta_ == o.beta_ &&
           sigma_ == o.sigma_ && gamma_hat_ == o.gamma_hat_ && delta2_hat_ == o.delta2_hat_ &&
           gamma_star_ == o.gamma_star_ && delta_star2_ == o.delta_star2_ && eb_iterations_ == o.eb_iterations_;
}

struct Fitter {
    static FitTransformResult run(const Eigen::MatrixXd& features, std::span<const std::string> sites,
                                  const Eigen::MatrixXd& covariates, const CombatConfig& config, bool want_adjusted)
    {
        config.validate();
        check_inputs(features, sites, covariates);
        const Eigen::Index n = features.rows();
        const Eigen::Index p = features.cols();
        const Eigen::Index t = covariates.cols();
        if (p < 1)
            throw DataError("ComBat needs at least one feature");

        CombatModel model;
        model.config_ = config;

        const auto levels = distinct_sites(sites);
        const auto s = static_cast<Eigen::Index>(levels.size());
        std::vector<int> site_of_row(static_cast<std::size_t>(n));
        std::vector<int> counts(levels.size(), 0);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto& name = sites[static_cast<std::size_t>(j)];
            const int idx = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), name) - levels.begin());
            site_of_row[static_cast<std::size_t>(j)] = idx;
            ++counts[static_cast<std::size_t>(idx)];
        }
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (counts[i] < 2)
                throw DataError("site '" + levels[i] + "' has " + std::to_string(counts[i]) +
                                " sample(s); ComBat needs at least 2 per site");
            model.sites_.push_back({levels[i], counts[i]});
        }

        // (1) Least squares on [site indicators | covariates], ridge-regularized.
        Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, s + t);
        for (Eigen::Index j = 0; j < n; ++j)
            design(j, site_of_row[static_cast<std::size_t>(j)]) = 1.0;
        if (t > 0)
            design.rightCols(t) = covariates;

        Eigen::MatrixXd gram = design.transpose() * design;
        gram.diagonal().array() += config.ridge_eps;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("ComBat design matrix factorization failed");
        const Eigen::MatrixXd coef = ldlt.solve(design.transpose() * features);
        if (!coef.allFinite())
            throw NumericalError("ComBat design solve produced non-finite coefficients "
                                 "(target covariate collinear with site?)");

        const double N = static_cast<double>(n);
        model.beta_ = coef.bottomRows(t);
        // Grand mean of the covariate-adjusted data. Equals the count-weighted
        // site coefficients under exact least squares, and keeps the weighted
        // gamma-hat sum at zero when the ridge term nudges those coefficients.
        if (t > 0)
            model.alpha_ = (features - covariates * model.beta_).colwise().sum().transpose() / N;
        else
            model.alpha_ = features.colwise().sum().transpose() / N;

        // (2) Pooled scale from full-model residuals.
        const Eigen::MatrixXd resid = features - design * coef;
        model.sigma_.resize(p);
        for (Eigen::Index g = 0; g < p; ++g) {
            const double var = simd::sum_sq_dev({resid.col(g).data(), static_cast<std::size_t>(n)}, 0.0) / N;
            model.sigma_[g] = std::max(std::sqrt(var), config.sigma_floor);
        }

        // (3) Standardize into site-grouped columns.
        const Eigen::MatrixXd smean = stand_mean(model.alpha_, model.beta_, covariates, n);
        const SiteGrouping grp = group_by_site(site_of_row, levels.size());
        Eigen::MatrixXd z(n, p);
        Eigen::MatrixXd mean_grouped(n, p);
        parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
            const auto g = static_cast<Eigen::Index>(gi);
            std::vector<double> ybuf, mbuf;
            standardize_column(features, smean, grp, g, model.sigma_[g], ybuf, mbuf,
                               {z.col(g).data(), static_cast<std::size_t>(n)});
            std::copy(mbuf.begin(), mbuf.end(), mean_grouped.col(g).data());
        });

        auto block = [&](const Eigen::MatrixXd& m, Eigen::Index site, Eigen::Index g) {
            const std::size_t b = grp.offsets[static_cast<std::size_t>(site)];
            const std::size_t e = grp.offsets[static_cast<std::size_t>(site) + 1];
            return std::span<const double>(m.col(g).data() + b, e - b);
        };

        // (4) Per-site location/scale estimates.
        const double floor2 = config.sigma_floor * config.sigma_floor;
        model.gamma_hat_.resize(s, p);
        model.delta2_hat_.resize(s, p);
        std::vector<bool> varies(static_cast<std::size_t>(s), false);
        std::vector<Eigen::Index> first_row(static_cast<std::size_t>(s), -1);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto i = static_cast<std::size_t>(site_of_row[static_cast<std::size_t>(j)]);
            if (first_row[i] < 0)
                first_row[i] = j;
            else if (!varies[i] && features.row(j) != features.row(first_row[i]))
                varies[i] = true;
        }
        for (Eigen::Index i = 0; i < s; ++i) {
            if (!varies[static_cast<std::size_t>(i)])
                throw DataError("site '" + levels[static_cast<std::size_t>(i)] +
                                "' has zero within-site variance on every feature");
            const double ni = counts[static_cast<std::size_t>(i)];
            for (Eigen::Index g = 0; g < p; ++g) {
                const auto zb = block(z, i, g);
                const double gh = simd::sum(zb) / ni;
                const double dh = simd::sum_sq_dev(zb, gh) / ni;
                model.gamma_hat_(i, g) = gh;
                model.delta2_hat_(i, g) = std::max(dh, floor2);
            }
        }

        // (5) Empirical Bayes shrinkage.
        model.gamma_star_ = model.gamma_hat_;
        model.delta_star2_ = model.delta2_hat_;
        model.priors_.assign(static_cast<std::size_t>(s), SitePriors{});
        model.eb_iterations_.assign(static_cast<std::size_t>(s), 0);
        for (Eigen::Index i = 0; i < s; ++i) {
            auto& pr = model.priors_[static_cast<std::size_t>(i)];
            pr.gamma_bar = mean_of(model.gamma_hat_.row(i));
            pr.tau2 = sample_variance(model.gamma_hat_.row(i));
            pr.ig = moment_match_inverse_gamma(mean_of(model.delta2_hat_.row(i)), sample_variance(model.delta2_hat_.row(i)));
            if (!config.use_eb || p < 2 || pr.ig.degenerate)
                continue;

            const int ni = counts[static_cast<std::size_t>(i)];
            Eigen::RowVectorXd g_old = model.gamma_hat_.row(i);
            Eigen::RowVectorXd d_old = model.delta2_hat_.row(i);
            Eigen::RowVectorXd g_new(p), d_new(p);
            double change = std::numeric_limits<double>::infinity();
            int iter = 0;
            while (iter < config.max_iters) {
                ++iter;
                change = 0.0;
                for (Eigen::Index g = 0; g < p; ++g) {
                    g_new[g] = eb_gamma_update(model.gamma_hat_(i, g), pr.gamma_bar, pr.tau2, ni, d_old[g]);
                    const double ss = simd::sum_sq_dev(block(z, i, g), g_new[g]);
                    d_new[g] = std::max(eb_delta2_update(ss, ni, pr.ig.lambda, pr.ig.theta), floor2);
                    change = std::max({change, relative_change(g_new[g], g_old[g]), relative_change(d_new[g], d_old[g])});
                }
                g_old = g_new;
                d_old = d_new;
                if (change < config.tol)
                    break;
            }
            if (!(change < config.tol))
                throw NumericalError("empirical Bayes did not converge for site '" + levels[static_cast<std::size_t>(i)] +
                                     "' after " + std::to_string(iter) + " iterations (last relative change " +
                                     format_double(change) + ")");
            model.gamma_star_.row(i) = g_old;
            model.delta_star2_.row(i) = d_old;
            model.eb_iterations_[static_cast<std::size_t>(i)] = iter;
        }

        FitTransformResult out{std::move(model), {}};
        if (!want_adjusted)
            return out;

        const CombatModel& m = out.model;
        out.adjusted.resize(n, p);
        parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
            const auto g = static_cast<Eigen::Index>(gi);
            std::vector<double> buf(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < s; ++i) {
                const std::size_t b = grp.offsets[static_cast<std::size_t>(i)];
                const std::size_t e = grp.offsets[static_cast<std::size_t>(i) + 1];
                simd::kernels().adjust(block(z, i, g), m.gamma_star_(i, g), adjust_scale(m.sigma_[g], m.delta_star2_(i, g)),
                                       block(mean_grouped, i, g), std::span<double>(buf.data() + b, e - b));
            }
            for (std::size_t k = 0; k < buf.size(); ++k)
                out.adjusted(grp.order[k], g) = buf[k];
        });
        return out;
    }
};

CombatModel fit(const Eigen::MatrixXd& features, std::span<const std::string> sites,
                const Eigen::MatrixXd& covariates, const CombatConfig& config)
{
    return Fitter::run(features, sites, covariates, config, false).model;
}

FitTransformResult fit_transform(const Eigen::MatrixXd& features, std::span<const std::string> sites,
                                 const Eigen::MatrixXd& covariates, const CombatConfig& config)
{
    return Fitter::run(features, sites, covariates, config, true);
}

Eigen::MatrixXd transform(const CombatModel& model, const Eigen::MatrixXd& features,
                          std::span<const std::string> sites, const Eigen::MatrixXd& covariates)
{
    check_inputs(features, sites, covariates);
    const Eigen::Index m = features.rows();
    const Eigen::Index p = model.n_features();
    if (features.cols() != p)
        throw ConfigError("feature width " + std::to_string(features.cols()) + " does not match model width " +
                          std::to_string(p));
    if (covariates.cols() != model.covariate_width())
        throw ConfigError("covariate width " + std::to_string(covariates.cols()) + " does not match fit-time width " +
                          std::to_string(model.covariate_width()));

    std::vector<int> site_of_row(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j)
        site_of_row[static_cast<std::size_t>(j)] = model.site_index(sites[static_cast<std::size_t>(j)]);

    const Eigen::MatrixXd smean = stand_mean(model.alpha(), model.beta(), covariates, m);
    const SiteGrouping grp = group_by_site(site_of_row, model.sites().size());
    const auto s = static_cast<Eigen::Index>(model.sites().size());

    Eigen::MatrixXd out(m, p);
    parallel_for(static_cast<std::size_t>(p), [&](std::size_t gi) {
        const auto g = static_cast<Eigen::Index>(gi);
        std::vector<double> ybuf, mbuf;
        std::vector<double> z(static_cast<std::size_t>(m));
        std::vector<double> adjusted(static_cast<std::size_t>(m));
        standardize_column(features, smean, grp, g, model.sigma()[g], ybuf, mbuf, z);
        for (Eigen::Index i = 0; i < s; ++i) {
            const std::size_t b = grp.offsets[static_cast<std::size_t>(i)];
            const std::size_t e = grp.offsets[static_cast<std::size_t>(i) + 1];
            if (b == e)
                continue;
            simd::kernels().adjust(std::span<const double>(z.data() + b, e - b), model.gamma_star()(i, g),
                                   adjust_scale(model.sigma()[g], model.delta_star2()(i, g)),
                                   std::span<const double>(mbuf.data() + b, e - b),
                                   std::span<double>(adjusted.data() + b, e - b));
        }
        for (std::size_t k = 0; k < adjusted.size(); ++k)
            out(grp.order[k], g) = adjusted[k];
    });
    return out;
}

} // namespace harmony::combat
