#pragma once

#include "run_context.hpp"

#include <vector>

namespace kblow::cli {

// Each returns the process exit code and leaves its outputs in run.out_dir().
int futaki_command(Run& run);
int stability_command(Run& run);
int deform_command(Run& run);
int bs_command(Run& run);
int glue_command(Run& run);

struct VerifyFlags {
    std::vector<int> only;
    bool mutate_blowup = false;
};
int verify_all_command(Run& run, const VerifyFlags& flags);

}  // namespace kblow::cli
