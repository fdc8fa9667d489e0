#pragma once

// Column kernels used by the harmonization and linear-model inner loops.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 variant. The variant is chosen once at runtime from
// CPU features; HARMONY_KERNELS=scalar in the environment forces the
// reference path.
//
// Elementwise kernels (axpy, standardize, adjust) are bit-identical across
// variants. Reductions (sum, dot, sum_sq_dev) differ only by summation order.

#include <span>
#include <string_view>
#include <vector>

namespace harmony::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;
    double (*sum)(std::span<const double> x);
    double (*dot)(std::span<const double> x, std::span<const double> y);
    /// sum_i (x_i - center)^2
    double (*sum_sq_dev)(std::span<const double> x, double center);
    /// y_i += alpha * x_i
    void (*axpy)(double alpha, std::span<const double> x, std::span<double> y);
    /// out_i = (y_i - mean_i) / sigma
    void (*standardize)(std::span<const double> y, std::span<const double> mean, double sigma,
                        std::span<double> out);
    /// out_i = scale * (z_i - shift) + mean_i
    void (*adjust)(std::span<const double> z, double shift, double scale,
                   std::span<const double> mean, std::span<double> out);
};

/// The active table.
const KernelTable& kernels();

/// The table for a specific ISA; throws if it is not available on this CPU/build.
const KernelTable& kernels_for(Isa isa);

/// ISAs usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// Overrides the active table (tests, benchmarks). Not for use while kernels are running.
void set_active_isa(Isa isa);

std::string_view to_string(Isa isa);

// Convenience wrappers over the active table.
inline double sum(std::span<const double> x) { return kernels().sum(x); }
inline double dot(std::span<const double> x, std::span<const double> y) { return kernels().dot(x, y); }
inline double sum_sq_dev(std::span<const double> x, double center) { return kernels().sum_sq_dev(x, center); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) { kernels().axpy(alpha, x, y); }

} // namespace harmony::simd
