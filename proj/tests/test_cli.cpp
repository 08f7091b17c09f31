#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

std::string config_path(const std::string& name) {
    return std::string(VTOK_CONFIG_DIR) + "/" + name;
}

int run_cli(const std::string& arguments) {
    const std::string command = std::string(VTOK_CLI_PATH) + " " + arguments + " 2>/dev/null";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "vtok_cli_test";
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("sample-demo passes on the shipped config and reruns byte-identically") {
    const fs::path dir = temp_dir();
    const fs::path out_a = dir / "demo_a.json";
    const fs::path out_b = dir / "demo_b.json";
    const std::string base =
        "sample-demo --config " + config_path("sample_demo.json") + " --seed 7 --out ";
    CHECK(run_cli(base + out_a.string()) == 0);
    CHECK(run_cli(base + out_b.string()) == 0);
    CHECK(slurp(out_a) == slurp(out_b));
    const std::string report = slurp(out_a);
    CHECK(report.find("\"config_hash\"") != std::string::npos);
    CHECK(report.find("\"version\"") != std::string::npos);
    CHECK(report.find("\"seed\": 7") != std::string::npos);
}

TEST_CASE("sample-demo reports identical outputs for phi=1") {
    const fs::path dir = temp_dir();
    const fs::path cfg = dir / "phi1.json";
    write_file(cfg, R"({
  "T": 1000, "N": 20, "gamma": 0.25, "phi": 1.0, "seed": 3,
  "scene": {"frames": 2, "height": 16, "width": 16, "channels": 2,
            "object": {"side": 6, "start_y": 2, "start_x": 2, "velocity_y": 1, "velocity_x": 0}}
})");
    const fs::path out = dir / "phi1_out.json";
    CHECK(run_cli("sample-demo --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(slurp(out).find("\"outputs_identical\": true") != std::string::npos);
}

TEST_CASE("merge-bench rerun is byte-identical under parallel sweeps") {
    const fs::path dir = temp_dir();
    const fs::path cfg = dir / "bench.json";
    // Small grid keeps this fast; several cells so the thread pool engages.
    write_file(cfg, R"({
  "scene": {"frames": 4, "height": 16, "width": 16, "channels": 4,
            "object": {"side": 6, "start_y": 2, "start_x": 2, "velocity_y": 1, "velocity_x": 1}},
  "sweep": {"ratio": [0.3, 0.6], "eta": [1.0, 0.3], "s_t": [1, 2], "search": ["wts", "gts"]},
  "seeds": 3
})");
    const fs::path out_a = dir / "bench_a.json";
    const fs::path out_b = dir / "bench_b.json";
    const std::string base = "merge-bench --config " + cfg.string() + " --seed 11 --out ";
    CHECK(run_cli(base + out_a.string()) == 0);
    CHECK(run_cli(base + out_b.string()) == 0);
    CHECK(slurp(out_a) == slurp(out_b));

    const fs::path out_csv = dir / "bench.csv";
    CHECK(run_cli(base + out_csv.string() + " --format csv") == 0);
    const std::string csv = slurp(out_csv);
    CHECK(csv.rfind("ratio,eta,s_t,search,", 0) == 0);
    // Header plus 16 sweep rows.
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
}

TEST_CASE("merge-bench eta sweep yields non-increasing foreground medians") {
    const fs::path dir = temp_dir();
    const fs::path cfg = dir / "eta_sweep.json";
    write_file(cfg, R"({
  "scene": {"frames": 4, "height": 16, "width": 16, "channels": 4,
            "object": {"side": 6, "start_y": 2, "start_x": 2, "velocity_y": 1, "velocity_x": 1}},
  "sweep": {"ratio": [0.5], "eta": [1.0, 0.5, 0.1], "s_t": [1], "search": ["wts"]},
  "seeds": 8
})");
    const fs::path out = dir / "eta_sweep_out.json";
    CHECK(run_cli("merge-bench --config " + cfg.string() + " --seed 4 --out " + out.string()) ==
          0);
    // Three rows in config order; pull the fg medians out in order.
    const std::string report = slurp(out);
    std::vector<double> medians;
    std::size_t at = 0;
    while ((at = report.find("\"fg_mse_median\":", at)) != std::string::npos) {
        at += 16;
        medians.push_back(std::stod(report.substr(at)));
    }
    REQUIRE(medians.size() == 3);
    CHECK(medians[0] >= medians[1]);
    CHECK(medians[1] >= medians[2]);
}

TEST_CASE("merge-bench with an empty sweep emits a header-only CSV") {
    const fs::path dir = temp_dir();
    const fs::path cfg = dir / "empty.json";
    write_file(cfg, R"({
  "scene": {"frames": 2, "height": 8, "width": 8, "channels": 2},
  "sweep": {"ratio": [], "eta": [], "s_t": [], "search": []},
  "seeds": 2
})");
    const fs::path out = dir / "empty.csv";
    CHECK(run_cli("merge-bench --config " + cfg.string() + " --format csv --out " +
                  out.string()) == 0);
    const std::string csv = slurp(out);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
    CHECK(csv.rfind("ratio,", 0) == 0);
}

TEST_CASE("cost-report passes its assertions on the shipped config") {
    const fs::path dir = temp_dir();
    const fs::path out = dir / "cost.json";
    CHECK(run_cli("cost-report --config " + config_path("cost_report.json") + " --out " +
                  out.string()) == 0);
    const std::string report = slurp(out);
    CHECK(report.find("\"ordering_strictly_decreasing\": true") != std::string::npos);
    CHECK(report.find("\"step_ratio_exact\": true") != std::string::npos);

    const fs::path out_csv = dir / "cost.csv";
    CHECK(run_cli("cost-report --config " + config_path("cost_report.json") +
                  " --format csv --out " + out_csv.string()) == 0);
    CHECK(slurp(out_csv).rfind("configuration,steps,bytes,gigabytes\n", 0) == 0);
}

TEST_CASE("sample-demo dumps latents when asked") {
    const fs::path dir = temp_dir();
    const fs::path cfg = dir / "dump.json";
    write_file(cfg, R"({
  "T": 1000, "N": 10, "gamma": 0.25, "phi": 2.0, "seed": 5,
  "scene": {"frames": 2, "height": 8, "width": 8, "channels": 2,
            "object": {"side": 4, "start_y": 1, "start_x": 1}},
  "dump_prefix": "dump_demo"
})");
    const fs::path out = dir / "dump_out.json";
    CHECK(run_cli("sample-demo --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(fs::exists(dir / "dump_demo_start.grid"));
    CHECK(fs::exists(dir / "dump_demo_standard.grid"));
    CHECK(fs::exists(dir / "dump_demo_object_centric.grid"));
    CHECK(fs::exists(dir / "dump_demo_mask.bits"));
    CHECK(fs::exists(dir / "dump_demo_frame0.pgm"));
}

TEST_CASE("bad configs exit nonzero") {
    const fs::path dir = temp_dir();
    const fs::path cfg = dir / "broken.json";
    write_file(cfg, "{ not json");
    CHECK(run_cli("merge-bench --config " + cfg.string()) != 0);
    CHECK(run_cli("sample-demo --config " + (dir / "missing.json").string()) != 0);
}
