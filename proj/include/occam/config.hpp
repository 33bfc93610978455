#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "occam/basis.hpp"
#include "occam/error.hpp"
#include "occam/json_schema.hpp"
#include "occam/search.hpp"
#include "occam/units.hpp"

namespace occam {

struct LibrarySpec {
    std::string bases = "+ - * / x+c x*c";
    int depth = 3;
    std::vector<std::vector<std::string>> layers;  // overrides bases/depth when set

    BasisLibrary build(const std::vector<std::string>& inputs) const {
        if (!layers.empty()) return BasisLibrary::from_layers(layers, inputs);
        return BasisLibrary::from_string(bases, depth, inputs);
    }

    std::vector<std::vector<std::string>> layer_names() const {
        if (!layers.empty()) return layers;
        std::vector<std::string> one;
        std::istringstream in(bases);
        for (std::string tok; in >> tok;) one.push_back(tok);
        return std::vector(static_cast<std::size_t>(depth), one);
    }
};

/// A validated run configuration. `document` is the config as run (overrides
/// applied), echoed into every result so a run can be repeated exactly.
struct RunConfig {
    nlohmann::json document;
    std::string mode;
    std::string id;
    std::uint64_t seed = 0;
    std::size_t seeds = 1;
    TrainConfig train;
    LibrarySpec library;
    std::optional<UnitSpec> units;
    std::filesystem::path base_dir;  // relative data paths resolve against this

    const nlohmann::json& section(const char* key) const {
        static const nlohmann::json none = nlohmann::json::object();
        return document.contains(key) ? document[key] : none;
    }
    bool has(const char* key) const { return document.contains(key); }

    std::filesystem::path resolve(const std::string& path) const {
        std::filesystem::path p(path);
        return p.is_absolute() ? p : base_dir / p;
    }
};

/// Applies the keys of a (schema-checked) "train" object on top of `cfg`.
inline void apply_train(TrainConfig& cfg, const nlohmann::json& t) {
    auto num = [&](const char* k, auto& field) {
        if (t.contains(k)) field = t[k].get<std::remove_reference_t<decltype(field)>>();
    };
    num("epochs", cfg.epochs);
    num("lr", cfg.lr);
    num("const_lr", cfg.const_lr);
    num("decay", cfg.decay);
    num("w_alpha", cfg.w_alpha);
    num("w_gamma", cfg.w_gamma);
    num("w_units", cfg.w_units);
    num("sigma", cfg.sigma);
    num("top_q", cfg.top_q);
    num("equalization", cfg.equalization);
    num("temperature", cfg.temperature);
    num("samples", cfg.samples);
    num("const_fit_iters", cfg.const_fit_iters);
    num("init_low", cfg.init_low);
    num("init_high", cfg.init_high);
    num("max_step", cfg.max_step);
    num("fitness_resolution", cfg.fitness_resolution);
    num("polish_iters", cfg.polish_iters);
    num("cache", cfg.cache);
    num("threads", cfg.threads);
    if (t.contains("invalid_floor")) cfg.invalid_floor = t["invalid_floor"].get<double>();
    if (t.contains("const_method"))
        cfg.const_method = t["const_method"] == "lm" ? ConstantMethod::LevenbergMarquardt : ConstantMethod::GradientDescent;
    if (t.contains("aggregate")) cfg.aggregate = t["aggregate"] == "median" ? PanelAggregate::Median : PanelAggregate::Mean;
}

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> output;
};

/// Schema-validates `doc`, applies overrides and converts it. Every failure is
/// a ValidationError whose pointer names the offending key.
inline RunConfig parse_run_config(nlohmann::json doc, const nlohmann::json& schema, const RunOverrides& ov = {},
                                  std::filesystem::path base_dir = {}) {
    if (ov.seed) doc["seed"] = *ov.seed;
    if (ov.threads) doc["train"]["threads"] = *ov.threads;
    if (ov.output) doc["output"] = *ov.output;
    SchemaValidator(schema).validate(doc);

    RunConfig c;
    c.document = doc;
    c.base_dir = std::move(base_dir);
    c.mode = doc["mode"];
    c.id = doc.value("id", std::string());
    c.seed = doc.value("seed", std::uint64_t{0});
    c.seeds = doc.value("seeds", std::size_t{1});
    if (doc.contains("train")) apply_train(c.train, doc["train"]);
    c.train.seed = c.seed;
    c.train.validate();
    if (c.train.init_low > c.train.init_high) throw ValidationError("init_low must not exceed init_high", "/train/init_low");

    if (doc.contains("library")) {
        const auto& l = doc["library"];
        if (l.contains("layers")) {
            c.library.layers = l["layers"].get<std::vector<std::vector<std::string>>>();
            if (l.contains("bases") || l.contains("depth"))
                throw ValidationError("give either layers or bases/depth, not both", "/library/layers");
        }
        if (l.contains("bases")) c.library.bases = l["bases"];
        if (l.contains("depth")) c.library.depth = l["depth"];
        const auto names = c.library.layer_names();
        for (std::size_t d = 0; d < names.size(); ++d)
            for (const auto& name : names[d])
                if (!BasisCatalog::builtin().find(name))
                    throw ValidationError("unknown basis '" + name + "'", c.library.layers.empty() ? "/library/bases" : "/library/layers/" + std::to_string(d));
    }

    if (doc.contains("units")) {
        const auto& u = doc["units"];
        UnitSpec spec(u["names"].get<std::vector<std::string>>(), u.value("w_units", c.train.w_units));
        for (auto it = u["variables"].begin(); it != u["variables"].end(); ++it) {
            try {
                spec.set(it.key(), it.value().get<std::vector<double>>());
            } catch (const ValidationError& e) {
                throw ValidationError(e.what(), "/units/variables/" + it.key());
            }
        }
        c.train.w_units = spec.w_units;
        c.units = std::move(spec);
    }

    const bool needs_data = c.mode != "simulate";
    if (needs_data && !doc.contains("data")) throw ValidationError("mode '" + c.mode + "' needs a data section", "/data");
    if (doc.contains("data")) {
        const auto& d = doc["data"];
        const int sources = d.contains("csv") + d.contains("generator") + d.contains("degree_distribution");
        if (sources != 1) throw ValidationError("data needs exactly one of csv, generator, degree_distribution", "/data");
        if (c.mode == "synth" && !d.contains("generator")) throw ValidationError("synth needs a generator", "/data/generator");
    }
    if (c.mode == "fit-ode" && !doc.contains("ode")) throw ValidationError("fit-ode needs an ode section", "/ode");
    if (c.mode == "sweep" && !doc.contains("sweep")) throw ValidationError("sweep needs a sweep section", "/sweep");
    if (c.mode == "simulate" && !doc.contains("simulate")) throw ValidationError("simulate needs a simulate section", "/simulate");
    if (doc.contains("ode") && doc["ode"].contains("per_target"))
        for (auto it = doc["ode"]["per_target"].begin(); it != doc["ode"]["per_target"].end(); ++it) {
            TrainConfig t = c.train;
            apply_train(t, it.value());
            try {
                t.validate();
            } catch (const ValidationError& e) {
                throw ValidationError(e.what(), "/ode/per_target/" + it.key() + e.pointer().substr(std::string("/train").size()));
            }
        }
    return c;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what(), "/");
    }
}

inline RunConfig load_run_config(const std::filesystem::path& path, const nlohmann::json& schema, const RunOverrides& ov = {}) {
    return parse_run_config(read_json_file(path), schema, ov, path.parent_path());
}

} // namespace occam
