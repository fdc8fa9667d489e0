#include "kernels_impl.hpp"

#include <cassert>

namespace harmony::simd::detail {

namespace {

double sum(std::span<const double> x)
{
    double s = 0.0;
    for (double v : x)
        s += v;
    return s;
}

double dot(std::span<const double> x, std::span<const double> y)
{
    assert(x.size() == y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += x[i] * y[i];
    return s;
}

double sum_sq_dev(std::span<const double> x, double center)
{
    double s = 0.0;
    for (double v : x) {
        const double d = v - center;
        s += d * d;
    }
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += alpha * x[i];
}

void standardize(std::span<const double> y, std::span<const double> mean, double sigma,
                 std::span<double> out)
{
    assert(y.size() == mean.size() && y.size() == out.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = (y[i] - mean[i]) / sigma;
}

void adjust(std::span<const double> z, double shift, double scale, std::span<const double> mean,
            std::span<double> out)
{
    assert(z.size() == mean.size() && z.size() == out.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = scale * (z[i] - shift) + mean[i];
}

} // namespace

const KernelTable scalar_table{
    Isa::Scalar, &sum, &dot, &sum_sq_dev, &axpy, &standardize, &adjust,
};

} // namespace harmony::simd::detail
