#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Reference computations used to check the library. None of these call into otdebias, so a
// bug in the main implementation cannot be reproduced here by construction.
namespace otdebias::docsbook::oracle {

using Matrix = std::vector<std::vector<double>>;

/// Smallest N <= max_denominator for which every entry of a and b is a multiple of 1/N
/// (within 1e-9). Returns 0 when there is none.
int common_denominator(std::span<const double> a, std::span<const double> b, int max_denominator = 10000);

/// Exact optimal transport cost between two rational mass vectors. Every integer coupling
/// with row sums N a and column sums N b is enumerated; the transportation polytope has
/// integral vertices, so the cheapest one is the exact optimum. Practical for n <= 4 and
/// small N.
double exact_ot(std::span<const double> a, std::span<const double> b, const Matrix& cost);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& x, double h = 1e-5);

/// Zero-order-hold pair evaluated from the closed form without any series switch.
double zoh_a(double a, double delta);
double zoh_b(double a, double b, double delta);

/// y_t = C sum_{s<=t} (prod_{r=s+1..t} a_bar_r) b_bar_s x_s + D x_t, evaluated term by term
/// (O(T^2) per channel). x and delta are T x D.
Matrix unrolled_scan(const Matrix& x, std::span<const double> A, std::span<const double> B,
                     std::span<const double> C, std::span<const double> D, const Matrix& delta);

/// Final state h_T of the same recurrence, also by explicit products.
std::vector<double> unrolled_final_state(const Matrix& x, std::span<const double> A, std::span<const double> B,
                                         const Matrix& delta);

/// Bin index of each value by linear search: bin i holds [e_i, e_{i+1}), the last bin is
/// closed, values outside go to the nearest end bin.
std::vector<std::size_t> bin_indices(std::span<const double> values, std::span<const double> edges);

/// 2 sum (sqrt p - sqrt q)^2.
double hellinger_sq(std::span<const double> p, std::span<const double> q);

/// Same-size correlation with a square odd kernel under whole-sample mirror padding
/// (index -1 maps to 1), computed on an explicitly padded copy of the image.
Matrix correlate_mirror(const Matrix& image, const Matrix& kernel);

/// Complex Gabor value at pixel offset (x, y) from its textbook definition.
double gabor_real(double theta, double sigma, double wavelength, double x, double y);
double gabor_imag(double theta, double sigma, double wavelength, double x, double y);

/// Population mean, standard deviation and Pearson correlation.
double mean(std::span<const double> v);
double population_std(std::span<const double> v);
double pearson(std::span<const double> x, std::span<const double> y);

/// Largest |F_a - F_b| over the running sums of two mass vectors.
double ks_from_masses(std::span<const double> a, std::span<const double> b);

}  // namespace otdebias::docsbook::oracle
