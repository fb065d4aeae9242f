#include "run_context.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kblow::cli {

namespace fs = std::filesystem;

std::string artifact_version() {
#ifdef KBLOW_VERSION
    return KBLOW_VERSION;
#else
    return "unknown";
#endif
}

std::string profile_name(Profile p) { return p == Profile::Strict ? "strict" : "default"; }

Section::Section(const json& j, std::string pointer) : j_(&j), ptr_(std::move(pointer)) {
    if (!j.is_object()) throw SchemaError((ptr_.empty() ? "/" : ptr_) + ": expected an object");
}

Section Section::child(const std::string& key) const {
    if (!has(key)) fail(key, "required field is missing");
    if (!j_->at(key).is_object()) fail(key, "expected an object");
    return Section(j_->at(key), ptr_ + "/" + key);
}

std::vector<Section> Section::items(const std::string& key) const {
    if (!has(key)) fail(key, "required field is missing");
    const auto& arr = j_->at(key);
    if (!arr.is_array()) fail(key, "expected an array");
    std::vector<Section> out;
    for (std::size_t i = 0; i < arr.size(); ++i) out.emplace_back(arr[i], ptr_ + "/" + key + "/" + std::to_string(i));
    return out;
}

void Section::allow_only(const std::vector<std::string>& keys) const {
    for (const auto& [k, v] : j_->items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(k, "unknown field");
}

void Section::fail(const std::string& key, const std::string& why) const {
    throw SchemaError(ptr_ + "/" + key + ": " + why);
}

Run::Run(std::string subcommand, RunOptions opt) : subcommand_(std::move(subcommand)) {
    json manifest;
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw SchemaError("cannot read config file '" + opt.config_path + "'");
        try {
            config_ = json::parse(in);
        } catch (const json::parse_error& ex) {
            throw SchemaError("config file '" + opt.config_path + "' is not valid JSON: " + ex.what());
        }
        if (!config_.is_object()) throw SchemaError("/: config must be a JSON object");
        has_config_ = true;
        if (config_.value("schema", std::string()) == "kblow.manifest/1") {
            manifest = config_;
            Section m(manifest, "");
            const auto sub = m.get<std::string>("subcommand");
            if (sub != subcommand_)
                m.fail("subcommand", "manifest was written by '" + sub + "', not '" + subcommand_ + "'");
            config_ = m.get<json>("config");
            if (!config_.is_object()) m.fail("config", "expected an object");
        }
    }
    auto from_manifest = [&](const char* key, auto fallback) {
        using T = decltype(fallback);
        return manifest.is_object() && manifest.contains(key) ? manifest.at(key).get<T>() : fallback;
    };
    seed_ = opt.seed.value_or(from_manifest("seed", seed_));
    jobs_ = opt.jobs.value_or(from_manifest("jobs", jobs_));
    if (jobs_ < 1) throw SchemaError("--jobs must be at least 1");
    if (opt.profile) {
        profile_ = *opt.profile;
    } else {
        const auto name = from_manifest("tolerance_profile", std::string("default"));
        if (name != "default" && name != "strict") throw SchemaError("/tolerance_profile: expected strict or default");
        profile_ = name == "strict" ? Profile::Strict : Profile::Default;
    }

    if (!opt.out_dir.empty()) {
        out_ = opt.out_dir;
    } else if (const char* env = std::getenv("KBLOW_OUT_DIR"); env && *env) {
        out_ = env;
    } else {
        out_ = "kblow_out";
    }
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw SchemaError("cannot create output directory '" + out_.string() + "': " + ec.message());
    resolved_ = config_;
}

void Run::write(const std::string& name, const std::string& content) {
    const fs::path p = out_ / name;
    std::ofstream os(p, std::ios::binary);
    os << content;
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    outputs_.push_back(p.string());
}

void Run::write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

void Run::begin_phase(const std::string& name) {
    end_phase();
    phase_ = name;
    phase_start_ = std::chrono::steady_clock::now();
}

void Run::end_phase() {
    if (phase_.empty()) return;
    timings_.emplace_back(phase_, std::chrono::duration<double>(std::chrono::steady_clock::now() - phase_start_).count());
    phase_.clear();
}

json Run::manifest(int exit_code) const {
    json t = json::object();
    for (const auto& [k, v] : timings_) t[k] = v;
    return {{"schema", "kblow.manifest/1"},
            {"subcommand", subcommand_},
            {"config", resolved_},
            {"artifact_version", artifact_version()},
            {"seed", seed_},
            {"jobs", jobs_},
            {"tolerance_profile", profile_name(profile_)},
            {"outputs", outputs_},
            {"timings", t},
            {"exit_code", exit_code}};
}

void Run::write_manifest(int exit_code) {
    end_phase();
    const fs::path p = out_ / (subcommand_ + "_manifest.json");
    std::ofstream os(p);
    os << manifest(exit_code).dump(2) << "\n";
}

}  // namespace kblow::cli
