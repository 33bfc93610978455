#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "occam/config.hpp"
#include "occam/runner.hpp"
#include "occam_schema.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void log_line(const char* level, const std::string& msg, const std::string& extra = {}) {
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
    std::cerr << "ts=" << now << " level=" << level << " msg=" << nlohmann::json(msg).dump() << extra << '\n';
}

fs::path preset_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("OCCAM_PRESETS")) return env;
    return OCCAM_PRESET_DIR;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

int execute(const std::string& config_path, const std::string& mode, const occam::RunOverrides& ov) {
    const auto schema = nlohmann::json::parse(occam::kRunConfigSchema);
    auto doc = occam::read_json_file(config_path);
    if (!mode.empty()) {
        if (doc.contains("mode") && doc["mode"] != mode)
            log_line("warn", "command overrides config mode", " config_mode=" + doc["mode"].dump() + " mode=\"" + mode + "\"");
        doc["mode"] = mode;
    }
    const auto cfg = occam::parse_run_config(doc, schema, ov, fs::path(config_path).parent_path());
    const fs::path out_dir = cfg.document.value("output", std::string("occam_out"));
    log_line("info", "run start", " mode=\"" + cfg.mode + "\" seed=" + std::to_string(cfg.seed) + " config=\"" + config_path + "\"");
    auto out = occam::run(cfg, [](const std::string& m) { log_line("info", m); });
    fs::create_directories(out_dir);
    write_file(out_dir / "result.json", out.result.dump(2) + "\n");
    for (const auto& [name, text] : out.files) write_file(out_dir / name, text);
    if (out.result.contains("fits"))
        for (const auto& f : out.result["fits"])
            log_line("info", "fit", " target=\"" + f["target"].get<std::string>() + "\" expression=" + f.value("expression", nlohmann::json("")).dump() +
                                        " wmse=" + f["loss"]["wmse"].dump());
    log_line("info", "run done", " out=\"" + out_dir.string() + "\"");
    return kExitOk;
}

int list_presets(const std::string& dir_flag) {
    const auto schema = nlohmann::json::parse(occam::kRunConfigSchema);
    const fs::path dir = preset_dir(dir_flag);
    if (!fs::is_directory(dir)) throw occam::ValidationError("preset directory '" + dir.string() + "' not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const auto cfg = occam::load_run_config(f, schema);
        std::printf("%-24s %-13s %s\n", cfg.id.c_str(), cfg.mode.c_str(), cfg.document.value("description", std::string()).c_str());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"occam: neuro-symbolic regression for panel and time-series data"};
    app.require_subcommand(1);

    std::string config, out, preset_flag;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::vector<std::pair<std::string, CLI::App*>> modes;
    for (const char* m : {"run", "fit", "fit-ode", "fit-ensemble", "sweep", "grid", "implicit", "synth", "simulate"}) {
        auto* sub = app.add_subcommand(m, std::string(m) == "run" ? "run a config in its own mode" : std::string("run a config as '") + m + "'");
        sub->add_option("config", config, "run config (JSON)")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads (default: OCCAM_THREADS or hardware)");
        sub->add_option("--out", out, "output directory");
        modes.emplace_back(m, sub);
    }
    auto* validate = app.add_subcommand("validate", "check a config against the schema");
    validate->add_option("config", config, "run config (JSON)")->required();
    auto* presets = app.add_subcommand("presets", "list bundled case-study configs");
    presets->add_option("--dir", preset_flag, "preset directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (presets->parsed()) return list_presets(preset_flag);
        if (validate->parsed()) {
            occam::load_run_config(config, nlohmann::json::parse(occam::kRunConfigSchema));
            log_line("info", "config valid", " config=\"" + config + "\"");
            return kExitOk;
        }
        occam::RunOverrides ov;
        for (const auto& [name, sub] : modes) {
            if (!sub->parsed()) continue;
            if (sub->count("--seed")) ov.seed = seed;
            if (sub->count("--threads")) ov.threads = threads;
            if (sub->count("--out")) ov.output = out;
            return execute(config, name == "run" ? std::string() : name, ov);
        }
    } catch (const occam::ValidationError& e) {
        log_line("error", e.what(), " kind=validation pointer=\"" + e.pointer() + "\"");
        return kExitValidation;
    } catch (const occam::ParseError& e) {
        log_line("error", e.what(), " kind=parse");
        return kExitValidation;
    } catch (const std::exception& e) {
        log_line("error", e.what(), " kind=runtime");
        return kExitRuntime;
    }
    return kExitValidation;
}
