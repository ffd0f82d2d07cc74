#pragma once

// Independent oracles for the test and acceptance suites. Everything here is
// computed by a route that shares no code with the library path it checks:
// GSL for chi-square distribution functions, brute force for the detector
// recursions, and exact probability recursions for Shewhart.

#include <cstdint>
#include <span>
#include <vector>

namespace oracles {

// P(X <= x) for X ~ chi2(df).
double chi2_cdf(double x, int df);

// Quantile: smallest x with P(X <= x) = p.
double chi2_quantile(double p, int df);

double chi2_pdf(double x, int df);

// log density ratio of chi2(df) to the law of c * chi2(df), evaluated via the
// two densities (not via the closed form under test).
double llr_from_densities(double u, int df, double c);

// Classical Pearson statistic against the uniform expectation N/K over k cells
// (counts beyond the k present cells must be zero / absent).
double pearson_uniform(std::span<const std::int64_t> counts, std::int64_t k_cells);

// CUSUM alarm statistic after the full stream: max over 1<=k<=t of
// sum_{i=k..t} llr_i, computed by O(t^2) enumeration.
double cusum_brute_force(std::span<const double> llrs);

// Shiryaev-Roberts statistic: sum over 1<=k<=t of prod_{i=k..t} exp(llr_i).
double shiryaev_roberts_brute_force(std::span<const double> llrs);

// Exact PV(t) = P(theta <= t | T = t) for a Shewhart rule whose per-step alarm
// probability is p0 pre-change and p1 post-change, under a geometric(nu)
// change-point prior on {1,2,...}.
double shewhart_pv_exact(double p0, double p1, double nu, std::int64_t t);

}  // namespace oracles
