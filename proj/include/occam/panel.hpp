#pragma once

#include <optional>
#include <string>
#include <vector>

#include "occam/error.hpp"
#include "occam/matrix.hpp"
#include "occam/units.hpp"

namespace occam {

/// One dataset D^(p): inputs X (N_p×K_x) and targets Y (N_p×K_y) with an optional time column.
struct Panel {
    std::string name;
    Matrix inputs;
    Matrix targets;
    std::vector<double> time;

    std::size_t rows() const noexcept { return inputs.rows(); }
};

/// P panels over a shared schema.
struct PanelSet {
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    std::vector<Panel> panels;
    std::optional<UnitSpec> units;
    std::vector<std::string> transforms;  // e.g. "log(n)"; reported fits live in the transformed space

    std::size_t size() const noexcept { return panels.size(); }
    std::size_t total_rows() const noexcept {
        std::size_t n = 0;
        for (const auto& p : panels) n += p.rows();
        return n;
    }

    void validate() const {
        if (panels.empty()) throw ValidationError("panel set is empty");
        if (input_names.empty()) throw ValidationError("no input columns");
        if (target_names.empty()) throw ValidationError("no target columns");
        for (const auto& t : target_names)
            for (const auto& i : input_names)
                if (t == i) throw ValidationError("column '" + t + "' is both input and target");
        for (const auto& p : panels) {
            const std::string where = p.name.empty() ? "panel" : "panel '" + p.name + "'";
            if (p.rows() == 0) throw ValidationError(where + " is empty");
            if (p.inputs.cols() != input_names.size()) throw ValidationError(where + " has wrong input column count");
            if (p.targets.cols() != target_names.size()) throw ValidationError(where + " has wrong target column count");
            if (p.targets.rows() != p.rows()) throw ValidationError(where + " has mismatched input/target rows");
            if (!p.time.empty() && p.time.size() != p.rows()) throw ValidationError(where + " has mismatched time column");
        }
    }

    /// Single-target view used by the fitting pipeline.
    PanelSet target(std::size_t k) const {
        PanelSet out;
        out.input_names = input_names;
        out.target_names = {target_names.at(k)};
        out.units = units;
        out.transforms = transforms;
        const std::size_t cols[] = {k};
        for (const auto& p : panels) out.panels.push_back({p.name, p.inputs, p.targets.select_columns(cols), p.time});
        return out;
    }
};

} // namespace occam
