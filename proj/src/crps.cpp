#include "downscale/crps.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "downscale/error.hpp"

namespace dsc {

double crps_empirical(std::span<const double> members, double y) {
    const std::size_t m = members.size();
    require(m > 0, "crps: empty ensemble");
    double sum_abs = 0.0;
    for (double x : members) sum_abs += std::abs(x - y);

    // Pair term via the sorted identity sum_ij |xi - xj| = 2 sum_k (2k+1-m) x(k).
    std::vector<double> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    double pair = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        pair += (2.0 * static_cast<double>(k) + 1.0 - static_cast<double>(m)) * sorted[k];
    }
    const double dm = static_cast<double>(m);
    return sum_abs / dm - pair / (dm * dm);
}

double crps_integral_oracle(std::span<const double> members, double y, double step) {
    require(!members.empty(), "crps oracle: empty ensemble");
    require(step > 0.0, "crps oracle: step must be positive");

    std::vector<double> knots(members.begin(), members.end());
    knots.push_back(y);
    std::sort(knots.begin(), knots.end());
    const double lo = knots.front() - 1.0;
    const double hi = knots.back() + 1.0;
    knots.insert(knots.begin(), lo);
    knots.push_back(hi);

    std::vector<double> sorted(members.begin(), members.end());
    std::sort(sorted.begin(), sorted.end());
    const auto cdf = [&](double z) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), z);
        return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    };

    double integral = 0.0;
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
        const double a = knots[s];
        const double b = knots[s + 1];
        if (b <= a) continue;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / step)));
        const double h = (b - a) / n;
        for (int k = 0; k < n; ++k) {
            const double z = a + (k + 0.5) * h;  // midpoint rule per segment
            const double d = cdf(z) - (z >= y ? 1.0 : 0.0);
            integral += d * d * h;
        }
    }
    return integral;
}

double improvement(double model, double baseline) {
    require(baseline > 0.0, "improvement: baseline must be positive");
    return 1.0 - model / baseline;
}

double drop_vs_direct(double transfer, double direct) {
    require(direct > 0.0, "drop_vs_direct: direct score must be positive");
    return transfer / direct - 1.0;
}

}  // namespace dsc
