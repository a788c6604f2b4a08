#pragma once

namespace scovreg {

/// Standard normal CDF.
double normal_cdf(double x) noexcept;

/// Standard normal quantile. Acklam's rational approximation refined by one
/// Halley step; absolute error below 1e-12 on (0, 1). Returns +-inf at 0 and 1.
double normal_quantile(double prob);

} // namespace scovreg
