#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tomomip/core.hpp"
#include "tomomip/edgenet.hpp"
#include "tomomip/relumip.hpp"

namespace tomomip {

/**
 * Sliding-window re-optimization settings. The threshold and the two
 * objective weights are given on the reference scale on which the method's
 * usual constants (T = 800, alpha, beta as reciprocals of small integers)
 * were established, where the network maximum is 550; they are mapped onto
 * the loaded net's own output scale by the factor u_bar / 550 at run time.
 */
struct MipRoConfig {
    int spacing = 1; // s in {1, 3}
    double threshold = 800.0;
    double alpha = 1.0 / 50.0;
    double beta = 1.0 / 50.0;
    enum class Merge { mean, max };
    Merge merge = Merge::mean;
    MipLimits window_limits{1e-6, kInfinity, 200000};
    int threads = 1; // 0 = all hardware threads
    bool cache_windows = true;
    std::ostream* progress = nullptr; // window CSV log

    static constexpr double kReferenceUBar = 550.0;

    void validate(const EdgeNet& net) const {
        if (spacing != 1 && spacing != 3)
            throw std::invalid_argument("MipRoConfig: spacing must be 1 or 3");
        if (alpha < 0.0 || beta < 0.0)
            throw std::invalid_argument("MipRoConfig: weights must be >= 0");
        if (net.u_bar <= 0.0)
            throw std::invalid_argument("MipRoConfig: net has no computed maximum");
        double t_net = threshold * net.u_bar / kReferenceUBar;
        if (t_net < 0.0 || t_net >= 2.0 * net.u_bar)
            throw std::invalid_argument("MipRoConfig: T outside [0, 2 u_bar)");
    }
};

/// Reference image rescaled onto the material scale: omega * f / max(f).
inline Image rescale_reference(const Image& f_star, double omega) {
    double fmax = f_star.max_pixel();
    if (fmax <= 0.0)
        throw std::invalid_argument("rescale_reference: image has no positive pixels");
    Image out = f_star;
    double scale = omega / fmax;
    for (double& v : out.pixels)
        v *= scale;
    return out;
}

/// Candidate pixel values contributed by overlapping window solutions.
struct PixelVotes {
    int width = 0;
    int height = 0;
    std::vector<std::vector<double>> votes; // row-major per pixel

    PixelVotes() = default;
    PixelVotes(int w, int h)
        : width(w), height(h), votes(static_cast<std::size_t>(w) * h) {}
};

/// Per-pixel mean (or maximum) of the accumulated votes.
inline Image merge_pixel_votes(const PixelVotes& votes,
                               MipRoConfig::Merge mode = MipRoConfig::Merge::mean) {
    Image out(votes.width, votes.height);
    for (std::size_t j = 0; j < votes.votes.size(); ++j) {
        const auto& list = votes.votes[j];
        if (list.empty())
            throw std::invalid_argument("merge_pixel_votes: pixel without votes");
        if (mode == MipRoConfig::Merge::mean) {
            double sum = 0.0;
            for (double v : list)
                sum += v;
            out.pixels[j] = sum / static_cast<double>(list.size());
        } else {
            double best = list.front();
            for (double v : list)
                best = std::max(best, v);
            out.pixels[j] = best;
        }
    }
    return out;
}

struct MipRoReport {
    Image image;
    long windows = 0;
    long cache_hits = 0;
    long limited_windows = 0; // hit a node/time limit; incumbent used
    long total_nodes = 0;
    double t_net = 0.0, alpha_net = 0.0, beta_net = 0.0; // mapped weights
};

namespace detail {

inline std::vector<int> window_starts(int extent, int spacing) {
    std::vector<int> starts;
    for (int x = 0; x + 3 <= extent; x += spacing)
        starts.push_back(x);
    // a final clamped window guarantees coverage of trailing rows/columns
    if (starts.empty() || starts.back() != extent - 3)
        starts.push_back(extent - 3);
    return starts;
}

struct WindowKey {
    std::array<double, 9> values;
    bool operator==(const WindowKey& other) const {
        return std::memcmp(values.data(), other.values.data(), sizeof(values)) == 0;
    }
};

struct WindowKeyHash {
    std::size_t operator()(const WindowKey& key) const {
        return static_cast<std::size_t>(fnv1a64(key.values.data(), sizeof(key.values)));
    }
};

} // namespace detail

/**
 * Re-optimizes every 3x3 window of the rescaled reference image through the
 * per-subregion edge MIP and merges the overlapping solutions (Algorithm:
 * sliding window, spacing s, vote merge). Window solves are independent and
 * run on a thread pool; votes are merged in window-index order, so the
 * output is identical for any thread count. Identical windows are solved
 * once (the solver is a pure function of the window content).
 */
inline MipRoReport sliding_window_reoptimize(const Image& f_star, const EdgeNet& net,
                                             const MipRoConfig& cfg) {
    cfg.validate(net);
    if (f_star.width < 3 || f_star.height < 3)
        throw std::invalid_argument("sliding_window_reoptimize: image must be >= 3x3");

    const double omega = net.omega;
    const double scale_map = net.u_bar / MipRoConfig::kReferenceUBar;
    MipRoReport report;
    report.t_net = cfg.threshold * scale_map;
    report.alpha_net = cfg.alpha * scale_map;
    report.beta_net = cfg.beta * scale_map;

    Image ref = rescale_reference(f_star, omega);

    std::vector<int> xs = detail::window_starts(f_star.height, cfg.spacing);
    std::vector<int> ys = detail::window_starts(f_star.width, cfg.spacing);
    struct Window {
        int row, col;
    };
    std::vector<Window> windows;
    windows.reserve(xs.size() * ys.size());
    for (int r : xs)
        for (int c : ys)
            windows.push_back({r, c});
    report.windows = static_cast<long>(windows.size());

    struct WindowResult {
        std::array<double, 9> pixels;
        long nodes = 0;
        double gap = 0.0;
        bool limited = false;
        bool cached = false;
    };
    std::vector<WindowResult> results(windows.size());

    std::unordered_map<detail::WindowKey, WindowResult, detail::WindowKeyHash> cache;
    std::mutex cache_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto solve_window = [&](std::size_t wi) {
        const Window& win = windows[wi];
        detail::WindowKey key;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                key.values[i * 3 + j] = ref.at(win.row + i, win.col + j);

        if (cfg.cache_windows) {
            std::lock_guard<std::mutex> lock(cache_mutex);
            auto it = cache.find(key);
            if (it != cache.end()) {
                results[wi] = it->second;
                results[wi].cached = true;
                return;
            }
        }

        Subregion window_ref;
        std::copy(key.values.begin(), key.values.end(), window_ref.begin());
        MipModel model = build_subregion_mip(net, report.t_net, report.alpha_net,
                                             report.beta_net, omega, window_ref);
        MipSolution sol = solve_mip(model, cfg.window_limits);
        if (!sol.found) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            failed = true;
            failure = "sliding_window_reoptimize: window at (" +
                      std::to_string(win.row) + "," + std::to_string(win.col) +
                      ") has no solution";
            return;
        }
        WindowResult res;
        for (int i = 0; i < 9; ++i)
            res.pixels[i] = std::clamp(sol.x[model.netmap->input_vars[i]], 0.0, omega);
        res.nodes = sol.nodes;
        res.gap = sol.gap;
        res.limited =
            sol.status == MipStatus::time_limit || sol.status == MipStatus::node_limit;
        results[wi] = res;
        if (cfg.cache_windows) {
            std::lock_guard<std::mutex> lock(cache_mutex);
            cache.emplace(key, res);
        }
    };

    int n_threads = cfg.threads > 0
                        ? cfg.threads
                        : std::max(1u, std::thread::hardware_concurrency());
    if (n_threads <= 1) {
        for (std::size_t wi = 0; wi < windows.size() && !failed; ++wi)
            solve_window(wi);
    } else {
        auto worker = [&] {
            for (;;) {
                std::size_t wi = next.fetch_add(1);
                if (wi >= windows.size() || failed)
                    return;
                solve_window(wi);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failed)
        throw std::runtime_error(failure);

    PixelVotes votes(f_star.width, f_star.height);
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const Window& win = windows[wi];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                votes.votes[static_cast<std::size_t>(win.row + i) * f_star.width +
                            (win.col + j)]
                    .push_back(results[wi].pixels[i * 3 + j]);
        report.total_nodes += results[wi].cached ? 0 : results[wi].nodes;
        report.cache_hits += results[wi].cached ? 1 : 0;
        report.limited_windows += results[wi].limited ? 1 : 0;
        if (cfg.progress)
            *cfg.progress << wi << ',' << win.row << ',' << win.col << ','
                          << results[wi].nodes << ',' << results[wi].gap << ','
                          << (results[wi].limited ? "limited" : "solved") << '\n';
    }
    report.image = merge_pixel_votes(votes, cfg.merge);
    return report;
}

} // namespace tomomip
