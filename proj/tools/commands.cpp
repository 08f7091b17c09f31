#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vtok/costmodel.hpp"
#include "vtok/io.hpp"
#include "vtok/merge.hpp"
#include "vtok/rng.hpp"
#include "vtok/sampler.hpp"
#include "vtok/scene.hpp"
#include "vtok/version.hpp"

namespace vtok::cli {

namespace {

using nlohmann::json;

struct LoadedConfig {
    json data;
    std::string hash_hex;
    std::filesystem::path directory;
};

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw config_error("cannot open config file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string raw = buffer.str();

    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(raw.data(), raw.size())));
    return {json::parse(raw), hex, std::filesystem::path(path).parent_path()};
}

std::uint64_t effective_seed(const CommonArgs& args, const json& config) {
    if (args.seed_overridden) {
        return args.seed;
    }
    return config.value("seed", std::uint64_t{0});
}

void write_output(const CommonArgs& args, const std::string& text) {
    if (args.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(args.out_path, std::ios::binary);
    if (!out) {
        throw config_error("cannot open output file: " + args.out_path);
    }
    out << text;
}

json report_skeleton(const char* command, const LoadedConfig& config, std::uint64_t seed) {
    json report;
    report["command"] = command;
    report["version"] = kVersion;
    report["seed"] = seed;
    report["config_hash"] = config.hash_hex;
    return report;
}

// Shortest round-trip decimal form, stable across reruns.
std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string csv_number(const json& value) {
    if (value.is_number_float()) {
        return format_double(value.get<double>());
    }
    if (value.is_boolean()) {
        return value.get<bool>() ? "1" : "0";
    }
    if (value.is_string()) {
        return value.get<std::string>();
    }
    return value.dump();
}

// Flat CSV projection: fixed column list, one line per row object.
std::string to_csv(const std::vector<std::string>& columns, const json& rows) {
    std::string text;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        text += (i ? "," : "") + columns[i];
    }
    text += "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            text += (i ? "," : "") + csv_number(row.at(columns[i]));
        }
        text += "\n";
    }
    return text;
}

double parse_phi(const json& value) {
    if (value.is_string()) {
        const std::string s = value.get<std::string>();
        if (s == "inf" || s == "Infinity") {
            return std::numeric_limits<double>::infinity();
        }
        throw config_error("phi must be a number or \"inf\"");
    }
    return value.get<double>();
}

SceneSpec parse_scene(const json& j) {
    SceneSpec scene;
    scene.frames = j.at("frames").get<std::uint32_t>();
    scene.height = j.at("height").get<std::uint32_t>();
    scene.width = j.at("width").get<std::uint32_t>();
    scene.channels = j.at("channels").get<std::uint32_t>();
    if (j.contains("object")) {
        const json& object = j.at("object");
        scene.side = object.value("side", scene.side);
        scene.start_y = object.value("start_y", scene.start_y);
        scene.start_x = object.value("start_x", scene.start_x);
        scene.velocity_y = object.value("velocity_y", scene.velocity_y);
        scene.velocity_x = object.value("velocity_x", scene.velocity_x);
    }
    const auto parse_texture = [](const json& t, Texture& out) {
        out.base = t.value("base", out.base);
        out.grad_y = t.value("grad_y", out.grad_y);
        out.grad_x = t.value("grad_x", out.grad_x);
        out.grad_t = t.value("grad_t", out.grad_t);
        out.grad_c = t.value("grad_c", out.grad_c);
        out.noise_amp = t.value("noise_amp", out.noise_amp);
    };
    if (j.contains("foreground_texture")) {
        parse_texture(j.at("foreground_texture"), scene.foreground);
    }
    if (j.contains("background_texture")) {
        parse_texture(j.at("background_texture"), scene.background);
    }
    return scene;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

int run_merge_bench(const CommonArgs& args) {
    const LoadedConfig config = load_config(args.config_path);
    const std::uint64_t seed = effective_seed(args, config.data);

    const SceneSpec scene_template = parse_scene(config.data.at("scene"));
    const json merge_section = config.data.value("merge", json::object());
    MergeConfig merge_template;
    if (merge_section.contains("window")) {
        const json& w = merge_section.at("window");
        merge_template.window.temporal = w.value("s_t", merge_template.window.temporal);
        merge_template.window.stride_y = w.value("s_y", merge_template.window.stride_y);
        merge_template.window.stride_x = w.value("s_x", merge_template.window.stride_x);
    }
    merge_template.resample_per_window =
        merge_section.value("resample_per_window", merge_template.resample_per_window);
    merge_template.kv_only = merge_section.value("kv_only", merge_template.kv_only);
    for (const auto& cap : merge_section.value("caps", json::array())) {
        merge_template.caps.push_back({cap.at("height").get<std::uint32_t>(),
                                       cap.at("width").get<std::uint32_t>(),
                                       cap.at("min_tokens_per_frame").get<std::uint32_t>()});
    }

    const json sweep = config.data.value("sweep", json::object());
    const auto ratios = sweep.value("ratio", std::vector<double>{});
    const auto etas = sweep.value("eta", std::vector<double>{});
    const auto temporals = sweep.value("s_t", std::vector<std::uint32_t>{});
    const auto searches = sweep.value("search", std::vector<std::string>{});
    const std::uint64_t instances = config.data.value("seeds", std::uint64_t{1});

    struct Cell {
        double ratio, eta;
        std::uint32_t temporal;
        SearchMode mode;
        std::string mode_name;
    };
    std::vector<Cell> cells;
    for (const double ratio : ratios) {
        for (const double eta : etas) {
            for (const std::uint32_t s_t : temporals) {
                for (const std::string& name : searches) {
                    SearchMode mode;
                    if (name == "wts") {
                        mode = SearchMode::windowed;
                    } else if (name == "gts") {
                        mode = SearchMode::global;
                    } else {
                        throw config_error("unknown search mode: " + name);
                    }
                    cells.push_back({ratio, eta, s_t, mode, name});
                }
            }
        }
    }

    const std::uint64_t scene_stream = substream_seed(seed, "scene");
    const std::uint64_t dst_stream = substream_seed(seed, "dst-sampling");

    // Cells run in parallel; rows land in config order regardless.
    std::vector<json> rows(cells.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
            const Cell& cell = cells[i];
            std::vector<double> fg, bg, total;
            std::uint64_t merged_count = 0, dst_count = 0, tokens = 0;
            std::uint64_t min_survivors = std::numeric_limits<std::uint64_t>::max();
            for (std::uint64_t j = 0; j < instances; ++j) {
                SceneSpec scene = scene_template;
                scene.seed = mix_seed(scene_stream, j);
                const auto [grid, mask] = generate(scene);

                MergeConfig cfg = merge_template;
                cfg.ratio = cell.ratio;
                cfg.eta = cell.eta;
                cfg.window.temporal = cell.temporal;
                cfg.search = cell.mode;
                cfg.seed = mix_seed(dst_stream, j);

                const MergePlan plan = build_plan(grid, mask, cfg);
                const ReconMetrics metrics = merge_roundtrip_error(grid, mask, plan);
                fg.push_back(metrics.fg_mse);
                bg.push_back(metrics.bg_mse);
                total.push_back(metrics.total_mse);

                tokens = plan.token_count();
                dst_count = plan.dst.size();
                merged_count = plan.merges.size();
                std::vector<std::uint64_t> survivors(grid.frames, 0);
                const std::uint64_t per_frame = std::uint64_t(grid.height) * grid.width;
                for (std::uint32_t id : plan.unm) {
                    ++survivors[id / per_frame];
                }
                for (std::uint32_t id : plan.dst) {
                    ++survivors[id / per_frame];
                }
                min_survivors = std::min(
                    min_survivors, *std::min_element(survivors.begin(), survivors.end()));
            }
            json row;
            row["ratio"] = cell.ratio;
            row["eta"] = cell.eta;
            row["s_t"] = cell.temporal;
            row["search"] = cell.mode_name;
            row["instances"] = instances;
            row["fg_mse_median"] = median(fg);
            row["bg_mse_median"] = median(bg);
            row["total_mse_median"] = median(total);
            row["tokens"] = tokens;
            row["dst_tokens"] = dst_count;
            row["merged_tokens"] = merged_count;
            row["kept_tokens"] = tokens - merged_count;
            row["min_survivors_per_frame"] = instances > 0 ? min_survivors : std::uint64_t{0};
            rows[i] = std::move(row);
        }
    };
    const std::size_t thread_count = std::max<std::size_t>(
        1, std::min<std::size_t>(
               {cells.size(), std::size_t(std::max(1u, std::thread::hardware_concurrency())),
                std::size_t(8)}));
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i + 1 < thread_count; ++i) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    json report = report_skeleton("merge-bench", config, seed);
    report["rows"] = rows;

    if (args.format == "csv") {
        write_output(args,
                     to_csv({"ratio", "eta", "s_t", "search", "instances", "fg_mse_median",
                             "bg_mse_median", "total_mse_median", "tokens", "dst_tokens",
                             "merged_tokens", "kept_tokens", "min_survivors_per_frame"},
                            report["rows"]));
    } else {
        write_output(args, report.dump(2) + "\n");
    }
    return 0;
}

int run_sample_demo(const CommonArgs& args) {
    const LoadedConfig config = load_config(args.config_path);
    const std::uint64_t seed = effective_seed(args, config.data);

    SamplerConfig cfg;
    cfg.training_steps = config.data.value("T", cfg.training_steps);
    cfg.inference_steps = config.data.value("N", cfg.inference_steps);
    cfg.gamma = config.data.value("gamma", cfg.gamma);
    if (config.data.contains("phi")) {
        cfg.phi = parse_phi(config.data.at("phi"));
    }
    cfg.seed = seed;
    cfg.crop_pad = config.data.value("crop_pad", cfg.crop_pad);
    cfg.per_frame_crop = config.data.value("per_frame_crop", cfg.per_frame_crop);

    SceneSpec scene = parse_scene(config.data.at("scene"));
    scene.seed = substream_seed(seed, "scene");
    const auto [target, mask] = generate(scene);

    TokenGrid z_start = TokenGrid::zeros(scene.frames, scene.height, scene.width, scene.channels);
    Rng noise(substream_seed(seed, "noise"));
    for (double& v : z_start.data) {
        v = noise.next_normal();
    }

    const NoiseSchedule schedule = NoiseSchedule::linear(cfg.training_steps);
    const DeltaOracleDenoiser oracle(target, schedule);
    const bool use_source = config.data.value("background_from_source", false);

    const TokenGrid standard = standard_sample(oracle, z_start, cfg, schedule);
    SampleTrace trace;
    const TokenGrid object_centric = object_centric_sample(
        oracle, z_start, mask, cfg, schedule, use_source ? &target : nullptr, &trace);

    const auto recovery = [&](const TokenGrid& out) {
        double worst = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            worst = std::max(worst, std::abs(out.data[i] - target.data[i]));
        }
        return worst;
    };
    const double recovery_standard = recovery(standard);
    const double recovery_oc = recovery(object_centric);
    const bool identical = standard.data == object_centric.data;

    const TokenStepCounts counts = count_token_steps(cfg, mask);
    const bool counts_match = counts.foreground == trace.token_steps.foreground &&
                              counts.background == trace.token_steps.background &&
                              counts.blend == trace.token_steps.blend;
    const std::uint64_t baseline = std::uint64_t(cfg.inference_steps) * mask.token_count();

    bool pass = recovery_standard < 1e-6 && recovery_oc < 1e-6 && counts_match;
    if (cfg.gamma == 1.0 || cfg.phi == 1.0) {
        pass = pass && identical;
    }

    json report = report_skeleton("sample-demo", config, seed);
    report["config"] = {{"T", cfg.training_steps},
                        {"N", cfg.inference_steps},
                        {"gamma", cfg.gamma},
                        {"phi", std::isfinite(cfg.phi) ? json(cfg.phi) : json("inf")},
                        {"crop_pad", cfg.crop_pad},
                        {"per_frame_crop", cfg.per_frame_crop}};
    report["recovery_error_standard"] = recovery_standard;
    report["recovery_error_object_centric"] = recovery_oc;
    report["outputs_identical"] = identical;
    report["blend_start"] = trace.blend_start;
    report["background_landing"] = trace.background_landing;
    report["background_landing_mismatch"] = trace.background_landing != trace.blend_start;
    report["background_skipped"] = trace.background_skipped;
    report["background_from_source"] = trace.background_from_source;
    report["schedules"] = {{"foreground", trace.foreground_schedule},
                           {"background", trace.background_schedule},
                           {"blend", trace.blend_schedule}};
    report["token_steps"] = {{"foreground", counts.foreground},
                             {"background", counts.background},
                             {"blend", counts.blend},
                             {"total", counts.total()},
                             {"baseline", baseline},
                             {"fraction", double(counts.total()) / double(baseline)}};
    report["assertions"] = {{"recovery_standard_ok", recovery_standard < 1e-6},
                            {"recovery_object_centric_ok", recovery_oc < 1e-6},
                            {"token_steps_match", counts_match},
                            {"pass", pass}};

    if (config.data.contains("dump_prefix")) {
        const std::string prefix =
            (config.directory / config.data.at("dump_prefix").get<std::string>()).string();
        save_grid(z_start, prefix + "_start.grid");
        save_grid(standard, prefix + "_standard.grid");
        save_grid(object_centric, prefix + "_object_centric.grid");
        save_mask(mask, prefix + "_mask.bits");
        write_pgm(object_centric, 0, 0, prefix + "_frame0.pgm");
    }

    if (args.format == "csv") {
        json row;
        row["gamma"] = cfg.gamma;
        row["phi"] = std::isfinite(cfg.phi) ? format_double(cfg.phi) : "inf";
        row["T"] = cfg.training_steps;
        row["N"] = cfg.inference_steps;
        row["recovery_standard"] = recovery_standard;
        row["recovery_object_centric"] = recovery_oc;
        row["outputs_identical"] = identical;
        row["fg_token_steps"] = counts.foreground;
        row["bg_token_steps"] = counts.background;
        row["blend_token_steps"] = counts.blend;
        row["fraction"] = double(counts.total()) / double(baseline);
        row["pass"] = pass;
        write_output(args, to_csv({"gamma", "phi", "T", "N", "recovery_standard",
                                   "recovery_object_centric", "outputs_identical",
                                   "fg_token_steps", "bg_token_steps", "blend_token_steps",
                                   "fraction", "pass"},
                                  json::array({row})));
    } else {
        write_output(args, report.dump(2) + "\n");
    }
    return pass ? 0 : 1;
}

int run_cost_report(const CommonArgs& args) {
    const LoadedConfig config = load_config(args.config_path);
    const std::uint64_t seed = effective_seed(args, config.data);

    const std::string model_ref = config.data.at("model").get<std::string>();
    std::filesystem::path model_path(model_ref);
    if (model_path.is_relative()) {
        model_path = config.directory / model_path;
    }
    std::ifstream model_in(model_path);
    if (!model_in) {
        throw config_error("cannot open model spec: " + model_path.string());
    }
    std::stringstream model_buffer;
    model_buffer << model_in.rdbuf();
    const ModelSpec model = model_from_json(model_buffer.str());

    const std::uint64_t baseline_steps = config.data.value("baseline_steps", std::uint64_t{50});
    const std::uint64_t reduced_steps = config.data.value("reduced_steps", std::uint64_t{20});
    const json merged_section = config.data.value("merged", json::object());
    const double kv_keep = merged_section.value("kv_keep_fraction", 1.0);
    const double q_keep = merged_section.value("q_keep_fraction", 1.0);

    const json& oc = config.data.at("object_centric");
    SamplerConfig oc_cfg;
    oc_cfg.training_steps = oc.value("T", 1000);
    oc_cfg.inference_steps = oc.value("N", int(reduced_steps));
    oc_cfg.gamma = oc.value("gamma", 0.25);
    oc_cfg.phi = parse_phi(oc.at("phi"));
    const std::uint64_t delta = oc.at("delta").get<std::uint64_t>();
    const std::uint64_t total = oc.at("total").get<std::uint64_t>();

    const std::uint64_t storage_baseline = attention_map_storage(model, baseline_steps);
    const std::uint64_t storage_reduced = attention_map_storage(model, reduced_steps);
    const std::uint64_t storage_merged = merged_storage(model, reduced_steps, kv_keep, q_keep);
    const std::uint64_t storage_oc =
        object_centric_storage(model, oc_cfg, delta, total, kv_keep, q_keep);

    const bool ordering_ok = storage_baseline > storage_reduced &&
                             storage_reduced > storage_merged && storage_merged > storage_oc;
    // Linearity in steps, checked as an exact integer identity.
    const bool ratio_ok = storage_reduced * baseline_steps == storage_baseline * reduced_steps;

    std::uint64_t flops_full = 0, flops_merged = 0;
    for (const auto& layer : model.layers) {
        const std::uint64_t n_q = layer.tokens_per_frame * model.frames;
        const std::uint64_t n_kv = layer.tokens_per_frame * layer.frames_attended;
        const std::uint64_t n_kv_merged = std::uint64_t(std::llround(double(n_kv) * kv_keep));
        flops_full += layer.occurrences_per_unet_pass * attention_flops(layer, n_q, n_kv);
        flops_merged += layer.occurrences_per_unet_pass * attention_flops(layer, n_q, n_kv_merged);
    }

    const bool pass = ordering_ok && ratio_ok;

    json report = report_skeleton("cost-report", config, seed);
    report["storage_bytes"] = {{"baseline", storage_baseline},
                               {"reduced_steps", storage_reduced},
                               {"merged", storage_merged},
                               {"object_centric", storage_oc}};
    report["storage_gb"] = {{"baseline", double(storage_baseline) / 1e9},
                            {"reduced_steps", double(storage_reduced) / 1e9},
                            {"merged", double(storage_merged) / 1e9},
                            {"object_centric", double(storage_oc) / 1e9}};
    report["steps"] = {{"baseline", baseline_steps}, {"reduced", reduced_steps}};
    report["fractions"] = {{"kv_keep", kv_keep}, {"q_keep", q_keep}};
    report["attention_flops_per_pass"] = {{"full", flops_full}, {"merged_kv", flops_merged}};
    report["assertions"] = {{"ordering_strictly_decreasing", ordering_ok},
                            {"step_ratio_exact", ratio_ok},
                            {"pass", pass}};

    if (args.format == "csv") {
        json rows = json::array();
        const auto add = [&](const char* name, std::uint64_t bytes, std::uint64_t steps) {
            json row;
            row["configuration"] = name;
            row["steps"] = steps;
            row["bytes"] = bytes;
            row["gigabytes"] = double(bytes) / 1e9;
            rows.push_back(row);
        };
        add("baseline", storage_baseline, baseline_steps);
        add("reduced_steps", storage_reduced, reduced_steps);
        add("merged", storage_merged, reduced_steps);
        add("object_centric", storage_oc, reduced_steps);
        write_output(args, to_csv({"configuration", "steps", "bytes", "gigabytes"}, rows));
    } else {
        write_output(args, report.dump(2) + "\n");
    }
    return pass ? 0 : 1;
}

}  // namespace vtok::cli
