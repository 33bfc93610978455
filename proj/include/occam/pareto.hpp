#pragma once

#include <cstddef>
#include <vector>

namespace occam {

struct ParetoPoint {
    double complexity = 0.0;
    double loss = 0.0;
};

/// a dominates b: no worse in both objectives and strictly better in one.
inline bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept {
    return a.complexity <= b.complexity && a.loss <= b.loss && (a.complexity < b.complexity || a.loss < b.loss);
}

/// Indices of the nondominated points (both objectives minimized), in input
/// order. Exact duplicates do not dominate each other, so ties keep both.
inline std::vector<std::size_t> pareto_front(const std::vector<ParetoPoint>& pts) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) dominated = j != i && dominates(pts[j], pts[i]);
        if (!dominated) front.push_back(i);
    }
    return front;
}

} // namespace occam
