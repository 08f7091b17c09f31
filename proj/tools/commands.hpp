#pragma once

#include <cstdint>
#include <string>

namespace vtok::cli {

struct CommonArgs {
    std::string config_path;
    std::string out_path;  // empty writes to stdout
    std::uint64_t seed = 0;
    bool seed_overridden = false;  // --seed beats the config file's seed
    std::string format = "json";   // json | csv
};

// Each returns the process exit code: 0 when all internal assertions hold.
int run_merge_bench(const CommonArgs& args);
int run_sample_demo(const CommonArgs& args);
int run_cost_report(const CommonArgs& args);

}  // namespace vtok::cli
