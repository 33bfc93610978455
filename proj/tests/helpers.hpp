#pragma once

#include <string>
#include <vector>

#include "occam/panel.hpp"

namespace occam::testing {

inline Panel make_panel(const std::vector<std::vector<double>>& inputs, const std::vector<double>& target, std::string name = {}) {
    Panel p;
    p.name = std::move(name);
    p.inputs = Matrix::from_columns(inputs);
    p.targets = Matrix::from_columns({target});
    return p;
}

inline PanelSet one_panel(std::vector<std::string> input_names, const std::vector<std::vector<double>>& inputs, const std::vector<double>& target,
                          std::string target_name = "y") {
    PanelSet ps;
    ps.input_names = std::move(input_names);
    ps.target_names = {std::move(target_name)};
    ps.panels.push_back(make_panel(inputs, target));
    return ps;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

} // namespace occam::testing
