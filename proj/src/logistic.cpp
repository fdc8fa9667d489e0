#include "harmony/error.hpp"
#include "harmony/predictors.hpp"
#include "harmony/simd/kernels.hpp"

#include <cmath>
#include <deque>

namespace harmony::predictors {

namespace {

std::span<const double> col(const Eigen::MatrixXd& X, Eigen::Index j)
{
    return {X.col(j).data(), static_cast<std::size_t>(X.rows())};
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z)
{
    if (z >= 0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Linear scores b + X w for one class block.
void linear_scores(const Eigen::MatrixXd& X, const double* w, double b, std::vector<double>& z)
{
    z.assign(static_cast<std::size_t>(X.rows()), b);
    for (Eigen::Index f = 0; f < X.cols(); ++f)
        if (w[f] != 0.0)
            simd::axpy(w[f], col(X, f), z);
}

int n_blocks(int n_classes) { return n_classes <= 2 ? 1 : n_classes; }

} // namespace

double logistic_objective(const Eigen::MatrixXd& X, const Targets& y, double l2, const Eigen::VectorXd& params,
                          Eigen::VectorXd* grad)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const int blocks = n_blocks(y.n_classes);
    const Eigen::Index stride = p + 1;
    if (params.size() != blocks * stride)
        throw ConfigError("logistic parameter vector has wrong length");
    if (grad)
        grad->setZero(params.size());

    double loss = 0.0;
    std::vector<double> resid(static_cast<std::size_t>(n));

    if (blocks == 1) {
        std::vector<double> z;
        linear_scores(X, params.data(), params[p], z);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double yi = y.values[i];
            loss += softplus(z[static_cast<std::size_t>(i)]) - yi * z[static_cast<std::size_t>(i)];
            resid[static_cast<std::size_t>(i)] = sigmoid(z[static_cast<std::size_t>(i)]) - yi;
        }
        if (grad) {
            for (Eigen::Index f = 0; f < p; ++f)
                (*grad)[f] = simd::dot(col(X, f), resid) + l2 * params[f];
            (*grad)[p] = simd::sum(resid);
        }
        loss += 0.5 * l2 * params.head(p).squaredNorm();
        return loss;
    }

    std::vector<std::vector<double>> Z(static_cast<std::size_t>(blocks));
    for (int k = 0; k < blocks; ++k)
        linear_scores(X, params.data() + k * stride, params[k * stride + p], Z[static_cast<std::size_t>(k)]);

    std::vector<std::vector<double>> P(static_cast<std::size_t>(blocks), std::vector<double>(static_cast<std::size_t>(n)));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        double zmax = Z[0][ii];
        for (int k = 1; k < blocks; ++k)
            zmax = std::max(zmax, Z[static_cast<std::size_t>(k)][ii]);
        double s = 0.0;
        for (int k = 0; k < blocks; ++k)
            s += std::exp(Z[static_cast<std::size_t>(k)][ii] - zmax);
        const double lse = zmax + std::log(s);
        const int yi = static_cast<int>(y.values[i]);
        loss += lse - Z[static_cast<std::size_t>(yi)][ii];
        for (int k = 0; k < blocks; ++k)
            P[static_cast<std::size_t>(k)][ii] = std::exp(Z[static_cast<std::size_t>(k)][ii] - lse) - (k == yi ? 1.0 : 0.0);
    }
    for (int k = 0; k < blocks; ++k) {
        const auto w = params.segment(k * stride, p);
        loss += 0.5 * l2 * w.squaredNorm();
        if (grad) {
            const auto& r = P[static_cast<std::size_t>(k)];
            for (Eigen::Index f = 0; f < p; ++f)
                (*grad)[k * stride + f] = simd::dot(col(X, f), r) + l2 * w[f];
            (*grad)[k * stride + p] = simd::sum(r);
        }
    }
    return loss;
}

LogisticModel train_logistic(const LogisticParams& params, const Eigen::MatrixXd& X, const Targets& y)
{
    const Eigen::Index p = X.cols();
    const int blocks = n_blocks(y.n_classes);
    const Eigen::Index dim = blocks * (p + 1);

    auto f = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) { return logistic_objective(X, y, params.l2, w, &g); };

    // L-BFGS with Armijo backtracking.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd g(dim);
    double fx = f(w, g);
    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem; // (s, y) pairs
    int iter = 0;
    Eigen::VectorXd g_new(dim);

    while (iter < params.max_iters && g.norm() >= params.grad_tol) {
        ++iter;
        // Two-loop recursion.
        Eigen::VectorXd q = g;
        std::vector<double> alphas(mem.size());
        for (std::size_t i = mem.size(); i-- > 0;) {
            const auto& [s, yv] = mem[i];
            alphas[i] = s.dot(q) / yv.dot(s);
            q -= alphas[i] * yv;
        }
        if (!mem.empty()) {
            const auto& [s, yv] = mem.back();
            q *= s.dot(yv) / yv.squaredNorm();
        } else {
            q /= std::max(1.0, g.norm());
        }
        for (std::size_t i = 0; i < mem.size(); ++i) {
            const auto& [s, yv] = mem[i];
            const double beta = yv.dot(q) / yv.dot(s);
            q += (alphas[i] - beta) * s;
        }
        Eigen::VectorXd dir = -q;
        double slope = g.dot(dir);
        if (!(slope < 0)) {
            mem.clear();
            dir = -g / std::max(1.0, g.norm());
            slope = g.dot(dir);
        }

        double step = 1.0;
        double f_new = 0.0;
        Eigen::VectorXd w_new;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            w_new = w + step * dir;
            f_new = f(w_new, g_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (mem.empty())
                break; // no descent possible at working precision
            mem.clear();
            continue;
        }

        Eigen::VectorXd s = w_new - w;
        Eigen::VectorXd yv = g_new - g;
        if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
            mem.emplace_back(std::move(s), std::move(yv));
            if (static_cast<int>(mem.size()) > params.history)
                mem.pop_front();
        }
        w = std::move(w_new);
        g = g_new;
        fx = f_new;
    }
    if (!w.allFinite() || !std::isfinite(fx))
        throw NumericalError("logistic regression diverged");

    LogisticModel model;
    model.n_classes = y.n_classes;
    model.weights.resize(blocks, p);
    model.intercepts.resize(blocks);
    for (int k = 0; k < blocks; ++k) {
        model.weights.row(k) = w.segment(k * (p + 1), p).transpose();
        model.intercepts[k] = w[k * (p + 1) + p];
    }
    model.iterations = iter;
    model.grad_norm = g.norm();
    return model;
}

Eigen::MatrixXd logistic_scores(const LogisticModel& model, const Eigen::MatrixXd& X)
{
    const Eigen::Index m = X.rows();
    const auto blocks = model.weights.rows();
    std::vector<std::vector<double>> Z(static_cast<std::size_t>(blocks));
    for (Eigen::Index k = 0; k < blocks; ++k) {
        const Eigen::VectorXd w = model.weights.row(k).transpose();
        linear_scores(X, w.data(), model.intercepts[k], Z[static_cast<std::size_t>(k)]);
    }

    if (blocks == 1) {
        Eigen::MatrixXd out(m, 2);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double p1 = sigmoid(Z[0][static_cast<std::size_t>(i)]);
            out(i, 0) = 1.0 - p1;
            out(i, 1) = p1;
        }
        return out;
    }

    Eigen::MatrixXd out(m, blocks);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        double zmax = Z[0][ii];
        for (Eigen::Index k = 1; k < blocks; ++k)
            zmax = std::max(zmax, Z[static_cast<std::size_t>(k)][ii]);
        double s = 0.0;
        for (Eigen::Index k = 0; k < blocks; ++k)
            s += (out(i, k) = std::exp(Z[static_cast<std::size_t>(k)][ii] - zmax));
        out.row(i) /= s;
    }
    return out;
}

} // namespace harmony::predictors
