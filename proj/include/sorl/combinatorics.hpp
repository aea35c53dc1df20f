#pragma once

#include <cmath>
#include <vector>

namespace sorl {

inline double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// C(n, k) <= limit, without overflow.
inline bool binomial_at_most(int n, int k, double limit) {
    return log_binomial(n, k) <= std::log(limit) + 1e-9;
}

/// Advances c (ascending, values in [0, n)) to the next k-subset in
/// lexicographic order; false after the last one.
inline bool next_combination(std::vector<int>& c, int n) {
    const int k = static_cast<int>(c.size());
    int i = k - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) return false;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
    return true;
}

inline std::vector<int> first_combination(int k) {
    std::vector<int> c(k);
    for (int i = 0; i < k; ++i) c[i] = i;
    return c;
}

}  // namespace sorl
