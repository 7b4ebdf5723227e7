#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomomip/convex.hpp"
#include "tomomip/core.hpp"
#include "tomomip/datasets.hpp"
#include "tomomip/edgenet.hpp"
#include "tomomip/integrated.hpp"
#include "tomomip/mipro.hpp"
#include "tomomip/projector.hpp"

namespace tomomip {

/// Invalid or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One reproducible experiment: dataset, acquisition, algorithm, outputs.
struct ExperimentConfig {
    std::string label = "experiment";
    // dataset
    std::string dataset_type = "phantom"; // phantom | image
    PhantomSpec phantom{};
    std::string image_path; // raw image stem used as ground truth
    // acquisition
    int angles = 20;
    double missing_wedge_deg = 0.0;
    int full_angles = 180; // clean sinogram resolution before subsampling
    bool noise_enabled = true;
    double noise_dose = 1e4;
    // algorithm
    std::string algorithm = "sirt"; // sirt | cs | cshm | mipro | integrated
    int sirt_iters = 1000;
    double lambda_tv = 1000.0;
    double mu = 1.0;
    double solver_tol = 1e-8;
    int solver_iters = 12000;
    // mipro
    double threshold = 800.0;
    double alpha = 1.0 / 50.0;
    double beta = 1.0 / 50.0;
    int spacing = 1;
    std::string merge = "mean";
    long window_node_limit = 200000;
    // integrated
    double phi = 1e4;
    Roi roi{24, 24, 16, 16};
    double gap_tol = 0.15;
    double time_limit_seconds = 600.0;
    std::string windows_mode = "non_overlapping";
    // plumbing
    std::string net_path;
    std::string output_dir = "out";
    std::string cache_dir; // defaults to <output_dir>/cache
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const {
        if (dataset_type != "phantom" && dataset_type != "image")
            throw ConfigError("dataset type must be phantom or image");
        if (dataset_type == "image" && image_path.empty())
            throw ConfigError("dataset type image needs image_path");
        if (angles < 1 || full_angles < angles)
            throw ConfigError("angles must satisfy 1 <= angles <= full_angles");
        if (missing_wedge_deg < 0.0 || missing_wedge_deg >= 180.0)
            throw ConfigError("missing wedge must lie in [0, 180)");
        if (algorithm != "sirt" && algorithm != "cs" && algorithm != "cshm" &&
            algorithm != "mipro" && algorithm != "integrated")
            throw ConfigError("unknown algorithm " + algorithm);
        if ((algorithm == "mipro" || algorithm == "integrated") && net_path.empty())
            throw ConfigError(algorithm + " needs a trained net (net_path)");
        if (merge != "mean" && merge != "max")
            throw ConfigError("merge must be mean or max");
        if (windows_mode != "non_overlapping" && windows_mode != "overlapping")
            throw ConfigError("windows_mode must be non_overlapping or overlapping");
    }
};

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.label = j.value("label", cfg.label);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        cfg.dataset_type = d.value("type", cfg.dataset_type);
        cfg.phantom.side = d.value("side", cfg.phantom.side);
        cfg.phantom.material_value = d.value("omega", cfg.phantom.material_value);
        cfg.image_path = d.value("path", cfg.image_path);
    }
    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        cfg.angles = g.value("angles", cfg.angles);
        cfg.missing_wedge_deg = g.value("missing_wedge_deg", cfg.missing_wedge_deg);
        cfg.full_angles = g.value("full_angles", cfg.full_angles);
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        cfg.noise_enabled = n.value("enabled", cfg.noise_enabled);
        cfg.noise_dose = n.value("dose", cfg.noise_dose);
    }
    cfg.algorithm = j.value("algorithm", cfg.algorithm);
    if (j.contains("params")) {
        const auto& p = j.at("params");
        cfg.sirt_iters = p.value("sirt_iters", cfg.sirt_iters);
        cfg.lambda_tv = p.value("lambda_tv", cfg.lambda_tv);
        cfg.mu = p.value("mu", cfg.mu);
        cfg.solver_tol = p.value("tol", cfg.solver_tol);
        cfg.solver_iters = p.value("max_iters", cfg.solver_iters);
        cfg.threshold = p.value("threshold", cfg.threshold);
        cfg.alpha = p.value("alpha", cfg.alpha);
        cfg.beta = p.value("beta", cfg.beta);
        cfg.spacing = p.value("spacing", cfg.spacing);
        cfg.merge = p.value("merge", cfg.merge);
        cfg.window_node_limit = p.value("window_node_limit", cfg.window_node_limit);
        cfg.phi = p.value("phi", cfg.phi);
        if (p.contains("roi")) {
            auto r = p.at("roi").get<std::vector<int>>();
            if (r.size() != 4)
                throw ConfigError("roi must be [row0, col0, height, width]");
            cfg.roi = {r[0], r[1], r[2], r[3]};
        }
        cfg.gap_tol = p.value("gap_tol", cfg.gap_tol);
        cfg.time_limit_seconds = p.value("time_limit", cfg.time_limit_seconds);
        cfg.windows_mode = p.value("windows_mode", cfg.windows_mode);
    }
    cfg.net_path = j.value("net", cfg.net_path);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    return cfg;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["label"] = cfg.label;
    j["dataset"] = {{"type", cfg.dataset_type},
                    {"side", cfg.phantom.side},
                    {"omega", cfg.phantom.material_value},
                    {"path", cfg.image_path}};
    j["geometry"] = {{"angles", cfg.angles},
                     {"missing_wedge_deg", cfg.missing_wedge_deg},
                     {"full_angles", cfg.full_angles}};
    j["noise"] = {{"enabled", cfg.noise_enabled}, {"dose", cfg.noise_dose}};
    j["algorithm"] = cfg.algorithm;
    j["params"] = {{"sirt_iters", cfg.sirt_iters},
                   {"lambda_tv", cfg.lambda_tv},
                   {"mu", cfg.mu},
                   {"tol", cfg.solver_tol},
                   {"max_iters", cfg.solver_iters},
                   {"threshold", cfg.threshold},
                   {"alpha", cfg.alpha},
                   {"beta", cfg.beta},
                   {"spacing", cfg.spacing},
                   {"merge", cfg.merge},
                   {"window_node_limit", cfg.window_node_limit},
                   {"phi", cfg.phi},
                   {"roi", {cfg.roi.row0, cfg.roi.col0, cfg.roi.height, cfg.roi.width}},
                   {"gap_tol", cfg.gap_tol},
                   {"time_limit", cfg.time_limit_seconds},
                   {"windows_mode", cfg.windows_mode}};
    j["net"] = cfg.net_path;
    j["output_dir"] = cfg.output_dir;
    j["cache_dir"] = cfg.cache_dir;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    return j;
}

struct PipelineResult {
    MetricReport metrics;
    Image reconstruction;
    std::string run_dir;
    bool solver_limit_hit = false; // CLI exit code 3 when set
};

namespace detail {

inline std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("file_hash: cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
        if (!in)
            break;
    }
    return h;
}

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace detail

/**
 * Generates or loads the dataset, simulates the acquisition, runs the
 * selected reconstruction and writes every artifact (raw + PNG images,
 * metrics CSV row, JSON manifest with content hashes) under
 * <output_dir>/<label>/.
 */
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::path run_dir = fs::path(cfg.output_dir) / cfg.label;
    fs::create_directories(run_dir);
    std::string cache_dir =
        cfg.cache_dir.empty() ? (fs::path(cfg.output_dir) / "cache").string()
                              : cfg.cache_dir;

    auto t_start = std::chrono::steady_clock::now();

    // dataset
    Image truth = cfg.dataset_type == "phantom" ? generate_phantom(cfg.phantom)
                                                : load_image(cfg.image_path);
    if (truth.width != truth.height)
        throw ConfigError("projection assumes square images");
    const int side = truth.width;
    save_image(truth, (run_dir / "ground_truth").string());
    export_png(truth, (run_dir / "ground_truth.png").string());

    // acquisition: full-range clean sinogram, noise, then angle subsampling
    ProjectionGeometry full_geom =
        build_geometry(cfg.full_angles, cfg.missing_wedge_deg, side);
    SparseOperator R_full = load_or_build_operator(full_geom, cache_dir, cfg.threads);
    Sinogram sino = forward_project(R_full, truth, full_geom);
    if (cfg.noise_enabled)
        sino = apply_poisson_noise(sino, {cfg.noise_dose, cfg.seed});
    ProjectionGeometry geom = build_geometry(cfg.angles, cfg.missing_wedge_deg, side);
    SparseOperator R = load_or_build_operator(geom, cache_dir, cfg.threads);
    Sinogram p = subsample_angles(sino, geom);
    save_sinogram(p, (run_dir / "sinogram").string());

    // reconstruction
    CshmConfig solver_cfg;
    solver_cfg.lambda_tv = cfg.lambda_tv;
    solver_cfg.mu = cfg.mu;
    solver_cfg.omega = cfg.phantom.material_value;
    solver_cfg.tol = cfg.solver_tol;
    solver_cfg.max_iters = cfg.solver_iters;

    PipelineResult result;
    Image recon(side, side);
    if (cfg.algorithm == "sirt") {
        recon = sirt(R, p, cfg.sirt_iters, side);
    } else if (cfg.algorithm == "cs") {
        CsConfig cs_cfg;
        cs_cfg.lambda_tv = cfg.lambda_tv;
        cs_cfg.tol = cfg.solver_tol;
        cs_cfg.max_iters = cfg.solver_iters;
        recon = solve_cs(R, p, side, cs_cfg);
    } else if (cfg.algorithm == "cshm") {
        recon = solve_cshm(R, p, side, solver_cfg).f;
    } else if (cfg.algorithm == "mipro") {
        EdgeNet net = load_edge_net(cfg.net_path);
        CshmResult cshm = solve_cshm(R, p, side, solver_cfg);
        save_image(cshm.f, (run_dir / "cshm_reference").string());
        MipRoConfig mcfg;
        mcfg.spacing = cfg.spacing;
        mcfg.threshold = cfg.threshold;
        mcfg.alpha = cfg.alpha;
        mcfg.beta = cfg.beta;
        mcfg.merge = cfg.merge == "mean" ? MipRoConfig::Merge::mean
                                         : MipRoConfig::Merge::max;
        mcfg.threads = cfg.threads;
        mcfg.window_limits.node_limit = cfg.window_node_limit;
        std::ofstream progress(run_dir / "mipro_windows.csv");
        progress << "window,row,col,nodes,gap,status\n";
        mcfg.progress = &progress;
        MipRoReport rep = sliding_window_reoptimize(cshm.f, net, mcfg);
        result.solver_limit_hit = rep.limited_windows > 0;
        recon = rep.image;
    } else { // integrated
        EdgeNet net = load_edge_net(cfg.net_path);
        CshmResult cshm = solve_cshm(R, p, side, solver_cfg);
        save_image(cshm.f, (run_dir / "cshm_reference").string());
        IntegratedConfig icfg;
        icfg.phi = cfg.phi;
        icfg.roi = cfg.roi;
        icfg.windows = cfg.windows_mode == "overlapping"
                           ? IntegratedConfig::Windows::overlapping
                           : IntegratedConfig::Windows::non_overlapping;
        icfg.gap_tol = cfg.gap_tol;
        icfg.time_limit_seconds = cfg.time_limit_seconds;
        icfg.prior = cshm.f;
        std::ofstream trace(run_dir / "integrated_trace.csv");
        trace << "node,bound,incumbent,gap\n";
        icfg.trace = &trace;
        IntegratedResult ires =
            solve_integrated(R, p, side, solver_cfg, net, cfg.threshold, icfg);
        result.solver_limit_hit = ires.status == MipStatus::time_limit;
        recon = ires.image;
    }

    double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();

    // metrics + artifacts
    MetricReport metrics;
    metrics.rme = rme(recon, truth);
    metrics.rdc = rdc(R, recon, p);
    metrics.bms = bms(recon, 10.0);
    metrics.mc = mc(recon);
    metrics.runtime_seconds = runtime;

    save_image(recon, (run_dir / "recon").string());
    export_png(recon, (run_dir / "recon.png").string());

    fs::path csv_path = fs::path(cfg.output_dir) / "metrics.csv";
    bool fresh_csv = !fs::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::app);
    if (fresh_csv)
        csv << MetricReport::csv_header() << '\n';
    std::ostringstream params;
    params << "angles=" << cfg.angles << ";wedge=" << cfg.missing_wedge_deg
           << ";seed=" << cfg.seed;
    csv << metrics.csv_row(cfg.label, cfg.algorithm, params.str()) << '\n';

    nlohmann::json manifest;
    manifest["config"] = experiment_config_to_json(cfg);
    manifest["artifacts"] = {
        {"ground_truth.img.bin",
         detail::hex64(detail::file_hash((run_dir / "ground_truth.img.bin").string()))},
        {"sinogram.sino.bin",
         detail::hex64(detail::file_hash((run_dir / "sinogram.sino.bin").string()))},
        {"recon.img.bin",
         detail::hex64(detail::file_hash((run_dir / "recon.img.bin").string()))}};
    if (!cfg.net_path.empty())
        manifest["artifacts"]["net"] = detail::hex64(detail::file_hash(cfg.net_path));
    std::ofstream mf(run_dir / "manifest.json");
    mf << manifest.dump(2) << '\n';

    result.metrics = metrics;
    result.reconstruction = std::move(recon);
    result.run_dir = run_dir.string();
    return result;
}

// ---------------------------------------------------------------------------
// Training front-end
// ---------------------------------------------------------------------------

struct TrainCommandConfig {
    int corpus_images = 48;
    int corpus_side = 48;
    double omega = 255.0;
    std::uint64_t corpus_seed = 99;
    std::string user_image; // optional extra grayscale raw image stem
    TrainConfig train;
    std::string out_path = "edge.edgenet.json";
};

struct TrainOutcome {
    double holdout_rmse = 0.0;
    double u_bar = 0.0;
    double target_scale = 0.0;
    std::string net_path;
};

/// Builds the corpus, trains, computes the exact network maximum and writes
/// the *.edgenet.json model file.
inline TrainOutcome train_command(const TrainCommandConfig& cfg) {
    auto corpus =
        generate_training_corpus(cfg.corpus_side, cfg.corpus_images, cfg.omega,
                                 cfg.corpus_seed);
    if (!cfg.user_image.empty()) {
        Image user = load_image(cfg.user_image);
        double umax = user.max_pixel();
        if (umax > 0.0)
            for (double& v : user.pixels)
                v *= cfg.omega / umax;
        corpus.push_back(std::move(user));
    }
    std::vector<TrainingSample> samples;
    for (const auto& img : corpus) {
        auto s = build_training_set(img, false);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    double max_target = 0.0;
    for (const auto& s : samples)
        max_target = std::max(max_target, s.target);
    if (max_target > 0.0)
        for (auto& s : samples)
            s.target /= max_target;

    TrainConfig train = cfg.train;
    train.omega = cfg.omega;
    train.target_scale = max_target;
    TrainReport report = train_edge_net(samples, train);

    EdgeNet net = report.net;
    max_output(net);
    save_edge_net(net, cfg.out_path);

    TrainOutcome outcome;
    outcome.holdout_rmse = report.holdout_rmse;
    outcome.u_bar = net.u_bar;
    outcome.target_scale = max_target;
    outcome.net_path = cfg.out_path;
    return outcome;
}

} // namespace tomomip
