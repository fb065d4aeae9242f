#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace kblow::cli {

using nlohmann::json;

enum ExitCode { Success = 0, CheckFailed = 1, UsageError = 2, NonConvergence = 3 };

// Bad flags, unreadable files and config that does not match its schema.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// A mathematical check on the inputs or the results did not hold.
class CheckError : public std::runtime_error {
public:
    explicit CheckError(const std::string& what) : std::runtime_error(what) {}
};

class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

enum class Profile { Default, Strict };

struct RunOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<unsigned> seed;
    std::optional<int> jobs;
    std::optional<Profile> profile;
};

std::string profile_name(Profile p);

// Read-only view of a config object that reports failures with a JSON pointer to the field.
class Section {
public:
    Section(const json& j, std::string pointer);

    const json& raw() const { return *j_; }
    const std::string& pointer() const { return ptr_; }
    bool has(const std::string& key) const { return j_->contains(key); }
    Section child(const std::string& key) const;
    std::vector<Section> items(const std::string& key) const;

    template <class T>
    T get(const std::string& key) const {
        if (!has(key)) fail(key, "required field is missing");
        return convert<T>(key);
    }
    template <class T>
    T get(const std::string& key, const T& fallback) const {
        return has(key) ? convert<T>(key) : fallback;
    }

    // Runs a library parser on a sub-object and rethrows its errors with the pointer attached.
    template <class F>
    auto parse(const std::string& key, F fn) const {
        if (!has(key)) fail(key, "required field is missing");
        try {
            return fn(j_->at(key));
        } catch (const SchemaError&) {
            throw;
        } catch (const std::exception& ex) {
            fail(key, ex.what());
        }
    }

    void allow_only(const std::vector<std::string>& keys) const;
    [[noreturn]] void fail(const std::string& key, const std::string& why) const;

private:
    template <class T>
    T convert(const std::string& key) const {
        try {
            return j_->at(key).get<T>();
        } catch (const std::exception& ex) {
            fail(key, ex.what());
        }
    }

    const json* j_;
    std::string ptr_;
};

// One subcommand invocation: resolved options, output files and the manifest describing them.
class Run {
public:
    Run(std::string subcommand, RunOptions opt);

    const std::string& subcommand() const { return subcommand_; }
    unsigned seed() const { return seed_; }
    int jobs() const { return jobs_; }
    Profile profile() const { return profile_; }
    bool strict() const { return profile_ == Profile::Strict; }
    const std::filesystem::path& out_dir() const { return out_; }

    // The module config, unwrapped from a manifest when one is given.
    const json& config() const { return config_; }
    Section root() const { return Section(config_, ""); }
    bool has_config() const { return has_config_; }

    void set_resolved_config(json j) { resolved_ = std::move(j); }

    void write(const std::string& name, const std::string& content);
    void write_json(const std::string& name, const json& j);

    void begin_phase(const std::string& name);
    void end_phase();

    json manifest(int exit_code) const;
    void write_manifest(int exit_code);

private:
    std::string subcommand_;
    unsigned seed_ = 20240607;
    int jobs_ = 1;
    Profile profile_ = Profile::Default;
    std::filesystem::path out_;
    json config_ = json::object();
    json resolved_;
    bool has_config_ = false;
    std::vector<std::string> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
    std::string phase_;
    std::chrono::steady_clock::time_point phase_start_;
};

std::string artifact_version();

}  // namespace kblow::cli
