#pragma once

#include <cstddef>
#include <vector>

namespace actuate {

double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);  // population std
double median(std::vector<double> v);

/// Linear-interpolation percentile, p in [0, 100].
double percentile(std::vector<double> v, double p);

/// Spearman rank correlation with average ranks for ties.
/// Returns 0 when either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace actuate
