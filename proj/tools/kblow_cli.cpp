#include "commands.hpp"
#include "run_context.hpp"

#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"

using namespace kblow::cli;

namespace {

struct Flags {
    std::string config, out;
    std::optional<unsigned> seed;
    std::optional<int> jobs;
    std::string profile;
};

void add_common(CLI::App* sub, Flags& f, bool config_required) {
    auto* c = sub->add_option("--config", f.config, "JSON config, or a manifest from an earlier run");
    if (config_required) c->required();
    sub->add_option("--out", f.out, "output directory (default $KBLOW_OUT_DIR, then ./kblow_out)");
    sub->add_option("--seed", f.seed, "seed for sampled checks");
    sub->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--tolerance-profile", f.profile, "strict or default")->check(CLI::IsMember({"strict", "default"}));
}

int execute(const std::string& name, const Flags& f, const std::function<int(Run&)>& body) {
    RunOptions opt;
    opt.config_path = f.config;
    opt.out_dir = f.out;
    opt.seed = f.seed;
    opt.jobs = f.jobs;
    if (!f.profile.empty()) opt.profile = f.profile == "strict" ? Profile::Strict : Profile::Default;

    std::unique_ptr<Run> run;
    int rc = Success;
    auto report = [&](const char* kind, const std::exception& ex) {
        std::cerr << "kblow_cli " << name << ": " << kind << ": " << ex.what() << std::endl;
    };
    try {
        run = std::make_unique<Run>(name, opt);
        rc = body(*run);
    } catch (const SchemaError& ex) {
        report("usage error", ex);
        rc = UsageError;
    } catch (const nlohmann::json::exception& ex) {
        report("schema error", ex);
        rc = UsageError;
    } catch (const std::invalid_argument& ex) {
        report("invalid input", ex);
        rc = UsageError;
    } catch (const CheckError& ex) {
        report("check failed", ex);
        rc = CheckFailed;
    } catch (const ConvergenceError& ex) {
        report("no convergence", ex);
        rc = NonConvergence;
    } catch (const std::exception& ex) {
        report("numerical failure", ex);
        rc = NonConvergence;
    }
    if (run) {
        try {
            run->write_manifest(rc);
        } catch (const std::exception& ex) {
            report("cannot write manifest", ex);
        }
    }
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact and numerical checks for extremal metrics on blowups"};
    app.set_version_flag("--version", artifact_version());
    app.require_subcommand(1);

    Flags flags;
    VerifyFlags verify;
    struct Entry {
        const char* name;
        const char* help;
        std::function<int(Run&)> body;
    };
    const std::vector<Entry> entries = {
        {"futaki", "exact blowup Futaki invariant, its expansion and the closed-form comparison", futaki_command},
        {"stability", "exact relative polystability verdict with a sampled eps_0 and a ray sweep", stability_command},
        {"deform", "solve the perturbed moment-map problem on a diagonal torus model", deform_command},
        {"bs", "scalar-flat blowup profile: CSV of the normalised profile and asymptotic data", bs_command},
        {"glue", "glued-metric residual scaling and the extremal fixed-point iteration", glue_command},
    };
    std::vector<std::pair<CLI::App*, const Entry*>> subs;
    for (const auto& e : entries) {
        auto* sub = app.add_subcommand(e.name, e.help);
        add_common(sub, flags, true);
        subs.emplace_back(sub, &e);
    }
    auto* va = app.add_subcommand("verify-all", "run the acceptance suite");
    add_common(va, flags, false);
    va->add_option("--only", verify.only, "criterion number, repeatable");
    va->add_flag("--mutate-blowup", verify.mutate_blowup, "plant a wrong blowup coefficient; the suite must fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? Success : UsageError;
    }
    for (const auto& [sub, e] : subs)
        if (sub->parsed()) return execute(e->name, flags, e->body);
    return execute("verify-all", flags, [&](Run& run) { return verify_all_command(run, verify); });
}
