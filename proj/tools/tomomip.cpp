// Command-line front end: phantom synthesis, projection, edge-net training,
// reconstruction runs and metric reports.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomomip/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolverLimit = 3;
constexpr int kExitInternal = 4;

using namespace tomomip;

int cmd_phantom(int side, double omega, const std::string& out) {
    PhantomSpec spec;
    spec.side = side;
    spec.material_value = omega;
    Image img = generate_phantom(spec);
    save_image(img, out);
    export_png(img, out + ".png");
    std::printf("phantom %dx%d written to %s.img.{json,bin} (mc=%lld)\n", side, side,
                out.c_str(), static_cast<long long>(mc(img)));
    return kExitOk;
}

int cmd_project(const std::string& image_stem, int angles, double wedge,
                double dose, bool noise, std::uint64_t seed,
                const std::string& out, const std::string& cache_dir, int threads) {
    Image img = load_image(image_stem);
    if (img.width != img.height)
        throw ConfigError("projection assumes square images");
    ProjectionGeometry geom = build_geometry(angles, wedge, img.width);
    SparseOperator R = cache_dir.empty()
                           ? build_radon_matrix(geom, threads)
                           : load_or_build_operator(geom, cache_dir, threads);
    Sinogram p = forward_project(R, img, geom);
    if (noise)
        p = apply_poisson_noise(p, {dose, seed});
    save_sinogram(p, out);
    std::printf("sinogram: %zu angles x %d bins written to %s.sino.{json,bin}\n",
                p.angles_deg.size(), p.detector_count, out.c_str());
    return kExitOk;
}

int cmd_train(const TrainCommandConfig& cfg, const std::string& loss_csv) {
    std::ofstream loss;
    TrainCommandConfig local = cfg;
    if (!loss_csv.empty()) {
        loss.open(loss_csv);
        loss << "epoch,mse\n";
        local.train.epoch_loss = &loss;
    }
    TrainOutcome out = train_command(local);
    std::printf("net written to %s\n", out.net_path.c_str());
    std::printf("holdout rmse: %.6f (max normalized target 1.0)\n", out.holdout_rmse);
    std::printf("target scale: %.6f, u_bar: %.6f\n", out.target_scale, out.u_bar);
    return kExitOk;
}

int cmd_reconstruct(const ExperimentConfig& cfg) {
    PipelineResult result = run_pipeline(cfg);
    std::printf("%s\n", MetricReport::csv_header().c_str());
    std::printf("%s\n",
                result.metrics
                    .csv_row(cfg.label, cfg.algorithm,
                             "angles=" + std::to_string(cfg.angles))
                    .c_str());
    std::printf("artifacts in %s\n", result.run_dir.c_str());
    return result.solver_limit_hit ? kExitSolverLimit : kExitOk;
}

int cmd_metrics(const std::string& recon_stem, const std::string& truth_stem,
                const std::string& sino_stem, int angles, double wedge) {
    Image recon = load_image(recon_stem);
    MetricReport report;
    report.bms = bms(recon, 10.0);
    report.mc = mc(recon);
    if (!truth_stem.empty())
        report.rme = rme(recon, load_image(truth_stem));
    if (!sino_stem.empty()) {
        Sinogram p = load_sinogram(sino_stem);
        ProjectionGeometry geom = build_geometry(angles, wedge, recon.width);
        SparseOperator R = build_radon_matrix(geom);
        report.rdc = rdc(R, recon, p);
    }
    std::printf("%s\n", MetricReport::csv_header().c_str());
    std::printf("%s\n", report.csv_row(recon_stem, "metrics", "").c_str());
    return kExitOk;
}

int cmd_report(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in)
        throw ConfigError("cannot open " + csv_path);
    std::string line;
    std::getline(in, line); // header
    std::printf("%-24s %-12s %-28s %10s %10s %8s %9s %9s\n", "dataset", "algorithm",
                "params", "rme", "rdc", "bms", "mc", "time[s]");
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ','))
            cells.push_back(cell);
        while (cells.size() < 8)
            cells.emplace_back();
        std::printf("%-24s %-12s %-28s %10s %10s %8s %9s %9s\n", cells[0].c_str(),
                    cells[1].c_str(), cells[2].c_str(),
                    cells[3].empty() ? "-" : cells[3].substr(0, 10).c_str(),
                    cells[4].empty() ? "-" : cells[4].substr(0, 10).c_str(),
                    cells[5].substr(0, 8).c_str(), cells[6].c_str(),
                    cells[7].substr(0, 9).c_str());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tomomip: tomographic reconstruction with learned edge models"};
    app.require_subcommand(1);

    // phantom
    auto* phantom = app.add_subcommand("phantom", "generate the elliptical test object");
    int ph_side = 64;
    double ph_omega = 255.0;
    std::string ph_out = "phantom";
    phantom->add_option("--side", ph_side, "image side in pixels");
    phantom->add_option("--omega", ph_omega, "material intensity");
    phantom->add_option("--out", ph_out, "output stem");

    // project
    auto* project = app.add_subcommand("project", "forward-project an image");
    std::string pr_image = "phantom", pr_out = "sino", pr_cache;
    int pr_angles = 180, pr_threads = 1;
    double pr_wedge = 0.0, pr_dose = 1e4;
    bool pr_noise = false;
    std::uint64_t pr_seed = 1;
    project->add_option("--image", pr_image, "input image stem");
    project->add_option("--angles", pr_angles, "number of projection angles");
    project->add_option("--wedge", pr_wedge, "missing wedge in degrees");
    project->add_flag("--noise", pr_noise, "apply shot noise");
    project->add_option("--dose", pr_dose, "expected counts at the max bin");
    project->add_option("--seed", pr_seed, "noise seed");
    project->add_option("--out", pr_out, "output sinogram stem");
    project->add_option("--cache", pr_cache, "operator cache directory");
    project->add_option("--threads", pr_threads, "matrix build threads");

    // train
    auto* train = app.add_subcommand("train", "train the Sobel edge network");
    TrainCommandConfig tc;
    std::string tr_loss_csv;
    train->add_option("--out", tc.out_path, "output net path (*.edgenet.json)");
    train->add_option("--images", tc.corpus_images, "number of corpus images");
    train->add_option("--side", tc.corpus_side, "corpus image side");
    train->add_option("--omega", tc.omega, "material intensity scale");
    train->add_option("--corpus-seed", tc.corpus_seed, "corpus generator seed");
    train->add_option("--user-image", tc.user_image, "extra grayscale image stem");
    train->add_option("--epochs", tc.train.epochs, "training epochs");
    train->add_option("--lr", tc.train.learning_rate, "learning rate");
    train->add_option("--batch", tc.train.batch_size, "mini-batch size");
    train->add_option("--seed", tc.train.seed, "training seed");
    train->add_option("--loss-csv", tr_loss_csv, "epoch loss CSV path");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "run a reconstruction experiment");
    std::string rc_config;
    ExperimentConfig overrides;
    bool has_algorithm = false;
    std::string rc_algorithm;
    rec->add_option("--config", rc_config, "experiment JSON config");
    rec->add_option("--algorithm", rc_algorithm, "sirt|cs|cshm|mipro|integrated");
    auto* rc_label = rec->add_option("--label", overrides.label, "run label");
    auto* rc_angles = rec->add_option("--angles", overrides.angles, "projection count");
    auto* rc_wedge =
        rec->add_option("--wedge", overrides.missing_wedge_deg, "missing wedge");
    auto* rc_side = rec->add_option("--side", overrides.phantom.side, "phantom side");
    auto* rc_lambda = rec->add_option("--lambda", overrides.lambda_tv, "TV weight");
    auto* rc_mu = rec->add_option("--mu", overrides.mu, "density penalty");
    auto* rc_net = rec->add_option("--net", overrides.net_path, "trained net path");
    auto* rc_out = rec->add_option("--output-dir", overrides.output_dir, "output dir");
    auto* rc_seed = rec->add_option("--seed", overrides.seed, "noise seed");
    auto* rc_threads = rec->add_option("--threads", overrides.threads,
                                       "worker threads (0 = all cores)");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "compute metrics for a raw image");
    std::string mt_recon, mt_truth, mt_sino;
    int mt_angles = 20;
    double mt_wedge = 0.0;
    metrics->add_option("--recon", mt_recon, "reconstruction stem")->required();
    metrics->add_option("--truth", mt_truth, "ground truth stem");
    metrics->add_option("--sinogram", mt_sino, "measured sinogram stem");
    metrics->add_option("--angles", mt_angles, "angles of the measurement");
    metrics->add_option("--wedge", mt_wedge, "missing wedge in degrees");

    // report
    auto* report = app.add_subcommand("report", "pretty-print a metrics CSV");
    std::string rp_csv = "out/metrics.csv";
    report->add_option("--csv", rp_csv, "metrics CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (phantom->parsed())
            return cmd_phantom(ph_side, ph_omega, ph_out);
        if (project->parsed())
            return cmd_project(pr_image, pr_angles, pr_wedge, pr_dose, pr_noise,
                               pr_seed, pr_out, pr_cache, pr_threads);
        if (train->parsed())
            return cmd_train(tc, tr_loss_csv);
        if (rec->parsed()) {
            ExperimentConfig cfg;
            if (!rc_config.empty()) {
                std::ifstream in(rc_config);
                if (!in)
                    throw ConfigError("cannot open config " + rc_config);
                cfg = experiment_config_from_json(nlohmann::json::parse(in));
            }
            // flag overrides win over config keys
            if (!rc_algorithm.empty()) {
                cfg.algorithm = rc_algorithm;
                has_algorithm = true;
            }
            (void)has_algorithm;
            if (rc_label->count())
                cfg.label = overrides.label;
            if (rc_angles->count())
                cfg.angles = overrides.angles;
            if (rc_wedge->count())
                cfg.missing_wedge_deg = overrides.missing_wedge_deg;
            if (rc_side->count())
                cfg.phantom.side = overrides.phantom.side;
            if (rc_lambda->count())
                cfg.lambda_tv = overrides.lambda_tv;
            if (rc_mu->count())
                cfg.mu = overrides.mu;
            if (rc_net->count())
                cfg.net_path = overrides.net_path;
            if (rc_out->count())
                cfg.output_dir = overrides.output_dir;
            if (rc_seed->count())
                cfg.seed = overrides.seed;
            if (rc_threads->count())
                cfg.threads = overrides.threads;
            return cmd_reconstruct(cfg);
        }
        if (metrics->parsed())
            return cmd_metrics(mt_recon, mt_truth, mt_sino, mt_angles, mt_wedge);
        if (report->parsed())
            return cmd_report(rp_csv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
    return kExitOk;
}
