#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomomip/core.hpp"
#include "tomomip/rng.hpp"

namespace tomomip {

/// 3x3 pixel window, row-major, entries in [0, omega].
using Subregion = std::array<double, 9>;

/**
 * Sobel response at the center of a 3x3 window:
 * sqrt((Gx * f)^2 + (Gy * f)^2) with the standard kernels. The squared
 * magnitude is insensitive to the convolution-vs-correlation flip since
 * both kernels are antisymmetric.
 */
inline double sobel(const Subregion& a) {
    static constexpr std::array<double, 9> gx = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static constexpr std::array<double, 9> gy = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < 9; ++i) {
        sx += gx[i] * a[i];
        sy += gy[i] * a[i];
    }
    return std::sqrt(sx * sx + sy * sy);
}

/**
 * Fully connected ReLU network (ReLU on every layer including the output).
 * The trained edge model is 9-9-9-1, but the machinery accepts any layer
 * sizes so small nets can be built for exhaustive checks.
 *
 * Inputs live on [0, omega]; outputs approximate Sobel responses divided by
 * `target_scale`. `u_bar` caches the exact maximum of the network over the
 * input box once it has been computed.
 */
struct EdgeNet {
    std::vector<int> layer_sizes{9, 9, 9, 1};
    // weights[k]: layer_sizes[k+1] x layer_sizes[k], row-major
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    double omega = 255.0;
    double target_scale = 1.0;
    double u_bar = 0.0;

    int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int input_size() const { return layer_sizes.front(); }

    /// Hidden plus output neuron count (= number of ReLU units).
    int neuron_count() const {
        return std::accumulate(layer_sizes.begin() + 1, layer_sizes.end(), 0);
    }

    void validate() const {
        if (layer_sizes.size() < 2)
            throw std::invalid_argument("EdgeNet: need at least input and output layers");
        if (weights.size() != static_cast<std::size_t>(num_layers()) ||
            biases.size() != weights.size())
            throw std::invalid_argument("EdgeNet: layer count mismatch");
        for (int k = 0; k < num_layers(); ++k) {
            std::size_t rows = layer_sizes[k + 1], cols = layer_sizes[k];
            if (weights[k].size() != rows * cols || biases[k].size() != rows)
                throw std::invalid_argument("EdgeNet: weight shape mismatch");
            for (double w : weights[k])
                if (!std::isfinite(w))
                    throw std::invalid_argument("EdgeNet: non-finite weight");
            for (double b : biases[k])
                if (!std::isfinite(b))
                    throw std::invalid_argument("EdgeNet: non-finite bias");
        }
    }
};

/// Feed-forward evaluation; reference semantics for the MIP encoding.
inline double forward(const EdgeNet& net, std::span<const double> input) {
    if (input.size() != static_cast<std::size_t>(net.input_size()))
        throw std::invalid_argument("forward: input size mismatch");
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    for (int k = 0; k < net.num_layers(); ++k) {
        int rows = net.layer_sizes[k + 1], cols = net.layer_sizes[k];
        next.assign(rows, 0.0);
        for (int r = 0; r < rows; ++r) {
            double acc = net.biases[k][r];
            const double* w = net.weights[k].data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c)
                acc += w[c] * cur[c];
            next[r] = std::max(0.0, acc);
        }
        cur.swap(next);
    }
    return cur[0];
}

inline double forward(const EdgeNet& net, const Subregion& a) {
    return forward(net, std::span<const double>(a.data(), a.size()));
}

/// Product of per-layer Frobenius norms: a valid Lipschitz upper bound.
inline double lipschitz_upper_bound(const EdgeNet& net) {
    double prod = 1.0;
    for (const auto& w : net.weights) {
        double fro = 0.0;
        for (double v : w)
            fro += v * v;
        prod *= std::sqrt(fro);
    }
    return prod;
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

struct TrainingSample {
    Subregion input;
    double target;
};

/**
 * One sample per interior pixel: the 3x3 window around it and its Sobel
 * response. When `normalize` is set the targets are divided by the maximum
 * Sobel value over this call's samples.
 */
inline std::vector<TrainingSample> build_training_set(const Image& img, bool normalize) {
    if (img.width < 3 || img.height < 3)
        throw std::invalid_argument("build_training_set: image must be at least 3x3");
    std::vector<TrainingSample> samples;
    samples.reserve(static_cast<std::size_t>(img.width - 2) * (img.height - 2));
    for (int r = 1; r + 1 < img.height; ++r) {
        for (int c = 1; c + 1 < img.width; ++c) {
            TrainingSample s;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    s.input[i * 3 + j] = img.at(r - 1 + i, c - 1 + j);
            s.target = sobel(s.input);
            samples.push_back(s);
        }
    }
    if (normalize) {
        double max_target = 0.0;
        for (const auto& s : samples)
            max_target = std::max(max_target, s.target);
        if (max_target > 0.0)
            for (auto& s : samples)
                s.target /= max_target;
    }
    return samples;
}

/**
 * Procedurally generated grayscale corpus for edge training: random
 * ellipses, straight steps, linear gradients and noise textures at varied
 * orientations, all with values in [0, omega].
 */
inline std::vector<Image> generate_training_corpus(int side, int n_images, double omega,
                                                   std::uint64_t seed) {
    if (side < 3 || n_images < 1)
        throw std::invalid_argument("generate_training_corpus: bad parameters");
    std::vector<Image> corpus;
    corpus.reserve(n_images);
    for (int i = 0; i < n_images; ++i) {
        CounterRng rng(seed, 1000 + i);
        Image img(side, side);
        switch (i % 4) {
        case 0: { // filled ellipses on empty background
            int count = 1 + static_cast<int>(rng.next_double() * 3);
            std::vector<std::array<double, 5>> shapes;
            for (int s = 0; s < count; ++s)
                shapes.push_back({rng.next_double(), rng.next_double(),
                                  0.08 + 0.3 * rng.next_double(),
                                  0.08 + 0.3 * rng.next_double(),
                                  rng.next_double() * 3.14159265358979});
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c) {
                    double x = (c + 0.5) / side, y = (r + 0.5) / side;
                    for (const auto& sh : shapes) {
                        double dx = x - sh[0], dy = y - sh[1];
                        double ca = std::cos(sh[4]), sa = std::sin(sh[4]);
                        double u = (ca * dx + sa * dy) / sh[2];
                        double v = (-sa * dx + ca * dy) / sh[3];
                        if (u * u + v * v <= 1.0) {
                            img.at(r, c) = omega;
                            break;
                        }
                    }
                }
            break;
        }
        case 1: { // straight step at a random orientation and offset
            double theta = rng.next_double() * 3.14159265358979;
            double nx = std::cos(theta), ny = std::sin(theta);
            double off = rng.next_double() - 0.5;
            double lo = omega * 0.1 * rng.next_double();
            double hi = omega * (0.6 + 0.4 * rng.next_double());
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c) {
                    double x = (c + 0.5) / side - 0.5, y = (r + 0.5) / side - 0.5;
                    img.at(r, c) = (nx * x + ny * y > off * 0.5) ? hi : lo;
                }
            break;
        }
        case 2: { // linear ramp
            double theta = rng.next_double() * 3.14159265358979;
            double nx = std::cos(theta), ny = std::sin(theta);
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c) {
                    double x = (c + 0.5) / side, y = (r + 0.5) / side;
                    double t = 0.5 + (nx * (x - 0.5) + ny * (y - 0.5));
                    img.at(r, c) = omega * std::clamp(t, 0.0, 1.0);
                }
            break;
        }
        default: { // smooth-ish noise texture
            double amp = 0.3 + 0.7 * rng.next_double();
            for (int r = 0; r < side; ++r)
                for (int c = 0; c < side; ++c)
                    img.at(r, c) = omega * amp * rng.next_double();
            break;
        }
        }
        corpus.push_back(std::move(img));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::vector<int> hidden_sizes{9, 9};
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 64;
    int epochs = 200;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 42;
    double omega = 255.0;
    double target_scale = 1.0;           // stored on the net for scale bookkeeping
    std::ostream* epoch_loss = nullptr;  // epoch,mse CSV when set
};

struct TrainReport {
    EdgeNet net;
    double holdout_rmse = 0.0;
    std::vector<double> epoch_mse;
};

/**
 * Mini-batch SGD with momentum on mean squared error. Deterministic given
 * the seed: weight init, the holdout split and every shuffle come from
 * counter-based streams. Inputs are standardized to [0,1] internally; the
 * scale is folded into the first layer so the returned net consumes raw
 * [0, omega] windows.
 */
inline TrainReport train_edge_net(const std::vector<TrainingSample>& samples,
                                  const TrainConfig& cfg) {
    if (samples.empty())
        throw std::invalid_argument("train_edge_net: empty sample set");
    if (cfg.omega <= 0.0)
        throw std::invalid_argument("train_edge_net: omega must be > 0");

    std::vector<int> sizes;
    sizes.push_back(9);
    for (int h : cfg.hidden_sizes)
        sizes.push_back(h);
    sizes.push_back(1);
    const int n_layers = static_cast<int>(sizes.size()) - 1;

    EdgeNet net;
    net.layer_sizes = sizes;
    net.omega = cfg.omega;
    net.target_scale = cfg.target_scale;
    net.weights.resize(n_layers);
    net.biases.resize(n_layers);
    CounterRng init_rng(cfg.seed, 1);
    for (int k = 0; k < n_layers; ++k) {
        int rows = sizes[k + 1], cols = sizes[k];
        net.weights[k].resize(static_cast<std::size_t>(rows) * cols);
        net.biases[k].assign(rows, 0.0);
        double std_dev = std::sqrt(2.0 / cols);
        for (auto& w : net.weights[k])
            w = init_rng.normal() * std_dev;
    }

    // deterministic holdout split
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    CounterRng split_rng(cfg.seed, 2);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.next_u64() % i]);
    std::size_t holdout = std::min<std::size_t>(
        samples.size() - 1,
        static_cast<std::size_t>(cfg.holdout_fraction * samples.size()));
    std::vector<std::size_t> train_idx(order.begin(), order.end() - holdout);
    std::vector<std::size_t> hold_idx(order.end() - holdout, order.end());
    if (train_idx.empty())
        throw std::invalid_argument("train_edge_net: no training samples after split");

    const double inv_omega = 1.0 / cfg.omega;
    auto forward_backward = [&](const TrainingSample& s,
                                std::vector<std::vector<double>>& acts,
                                std::vector<std::vector<double>>& grads_w,
                                std::vector<std::vector<double>>& grads_b) {
        acts[0].assign(9, 0.0);
        for (int i = 0; i < 9; ++i)
            acts[0][i] = s.input[i] * inv_omega;
        for (int k = 0; k < n_layers; ++k) {
            int rows = sizes[k + 1], cols = sizes[k];
            acts[k + 1].assign(rows, 0.0);
            for (int r = 0; r < rows; ++r) {
                double acc = net.biases[k][r];
                const double* w = net.weights[k].data() + static_cast<std::size_t>(r) * cols;
                for (int c = 0; c < cols; ++c)
                    acc += w[c] * acts[k][c];
                acts[k + 1][r] = std::max(0.0, acc);
            }
        }
        double err = acts[n_layers][0] - s.target;
        std::vector<double> delta{2.0 * err};
        for (int k = n_layers - 1; k >= 0; --k) {
            int rows = sizes[k + 1], cols = sizes[k];
            for (int r = 0; r < rows; ++r) {
                if (acts[k + 1][r] <= 0.0)
                    delta[r] = 0.0;
                grads_b[k][r] += delta[r];
                double* gw = grads_w[k].data() + static_cast<std::size_t>(r) * cols;
                for (int c = 0; c < cols; ++c)
                    gw[c] += delta[r] * acts[k][c];
            }
            if (k > 0) {
                std::vector<double> next(cols, 0.0);
                for (int r = 0; r < rows; ++r) {
                    const double* w =
                        net.weights[k].data() + static_cast<std::size_t>(r) * cols;
                    for (int c = 0; c < cols; ++c)
                        next[c] += w[c] * delta[r];
                }
                delta.swap(next);
            }
        }
        return err * err;
    };

    std::vector<std::vector<double>> vel_w(n_layers), vel_b(n_layers);
    std::vector<std::vector<double>> grads_w(n_layers), grads_b(n_layers);
    for (int k = 0; k < n_layers; ++k) {
        vel_w[k].assign(net.weights[k].size(), 0.0);
        vel_b[k].assign(net.biases[k].size(), 0.0);
        grads_w[k].assign(net.weights[k].size(), 0.0);
        grads_b[k].assign(net.biases[k].size(), 0.0);
    }
    std::vector<std::vector<double>> acts(n_layers + 1);

    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        CounterRng shuffle_rng(cfg.seed, 100 + epoch);
        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1], train_idx[shuffle_rng.next_u64() % i]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += cfg.batch_size) {
            std::size_t end = std::min(train_idx.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            for (int k = 0; k < n_layers; ++k) {
                std::fill(grads_w[k].begin(), grads_w[k].end(), 0.0);
                std::fill(grads_b[k].begin(), grads_b[k].end(), 0.0);
            }
            for (std::size_t i = start; i < end; ++i)
                epoch_loss += forward_backward(samples[train_idx[i]], acts, grads_w, grads_b);
            double scale = cfg.learning_rate / static_cast<double>(end - start);
            for (int k = 0; k < n_layers; ++k) {
                for (std::size_t i = 0; i < net.weights[k].size(); ++i) {
                    vel_w[k][i] = cfg.momentum * vel_w[k][i] - scale * grads_w[k][i];
                    net.weights[k][i] += vel_w[k][i];
                }
                for (std::size_t i = 0; i < net.biases[k].size(); ++i) {
                    vel_b[k][i] = cfg.momentum * vel_b[k][i] - scale * grads_b[k][i];
                    net.biases[k][i] += vel_b[k][i];
                }
            }
        }
        epoch_loss /= static_cast<double>(train_idx.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("train_edge_net: loss diverged at epoch " +
                                     std::to_string(epoch));
        report.epoch_mse.push_back(epoch_loss);
        if (cfg.epoch_loss)
            *cfg.epoch_loss << epoch << ',' << epoch_loss << '\n';
    }

    // fold the input standardization into the first layer
    for (auto& w : net.weights[0])
        w *= inv_omega;

    double sq = 0.0;
    for (std::size_t i : hold_idx) {
        double out = forward(net, samples[i].input);
        sq += (out - samples[i].target) * (out - samples[i].target);
    }
    report.holdout_rmse = hold_idx.empty() ? 0.0 : std::sqrt(sq / hold_idx.size());
    net.validate();
    report.net = std::move(net);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization (*.edgenet.json)
// ---------------------------------------------------------------------------

inline void save_edge_net(const EdgeNet& net, const std::string& path) {
    nlohmann::json j{{"layer_sizes", net.layer_sizes}, {"weights", net.weights},
                     {"biases", net.biases},           {"omega", net.omega},
                     {"target_scale", net.target_scale}, {"u_bar", net.u_bar}};
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_edge_net: cannot open " + path);
    out << j.dump(2) << '\n';
}

inline EdgeNet load_edge_net(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_edge_net: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    EdgeNet net;
    net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    net.omega = j.at("omega").get<double>();
    net.target_scale = j.at("target_scale").get<double>();
    net.u_bar = j.at("u_bar").get<double>();
    net.validate();
    return net;
}

} // namespace tomomip
