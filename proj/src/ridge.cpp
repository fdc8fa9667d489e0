#include "harmony/error.hpp"
#include "harmony/predictors.hpp"
#include "harmony/simd/kernels.hpp"

namespace harmony::predictors {

// Closed form on centered data; the intercept is not penalized.
RidgeModel train_ridge(const RidgeParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n < 2)
        throw DataError("ridge regression needs at least 2 training rows");

    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += params.alpha;
    Eigen::VectorXd rhs(p);
    for (Eigen::Index f = 0; f < p; ++f)
        rhs[f] = simd::dot({Xc.col(f).data(), static_cast<std::size_t>(n)}, {yc.data(), static_cast<std::size_t>(n)});

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("ridge normal equations could not be factorized");
    RidgeModel model;
    model.weights = ldlt.solve(rhs);
    if (!model.weights.allFinite())
        throw NumericalError("ridge solve produced non-finite weights");
    model.intercept = y_mean - x_mean.dot(model.weights);
    return model;
}

Eigen::VectorXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& X)
{
    const Eigen::Index m = X.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(m, model.intercept);
    for (Eigen::Index f = 0; f < X.cols(); ++f)
        simd::axpy(model.weights[f], {X.col(f).data(), static_cast<std::size_t>(m)}, {out.data(), static_cast<std::size_t>(m)});
    return out;
}

} // namespace harmony::predictors
