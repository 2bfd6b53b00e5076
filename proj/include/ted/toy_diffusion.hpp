#pragma once

// Desk-scale conditional DDPM: 2-D Gaussian-mixture data, an MLP noise predictor and a
// text condition built from learnable layer fusion, trained with the two-step schedule
// (fusion weights train jointly, then freeze).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ted/encoder.hpp"
#include "ted/fusion.hpp"
#include "ted/numerics.hpp"

namespace ted {

struct NoiseSchedule {
    std::vector<double> betas;     // beta_t, t in [0, T)
    std::vector<double> alpha_bar; // alpha_bar_0 = 1; alpha_bar_t = prod_{s<t} (1 - beta_s)

    int steps() const { return static_cast<int>(betas.size()); }
    static NoiseSchedule linear(int T, double beta_start, double beta_end);
};

struct MixtureConfig {
    int components = 4;
    double sigma = 0.5;
    double radius = 3.0;
};

int mixture_component(std::string_view caption, const MixtureConfig& mix = {});
Eigen::Vector2d component_mean(int component, const MixtureConfig& mix = {});

/// Deterministic per (caption, seed): a draw from the caption's mixture component.
Eigen::Vector2d sample_synthetic(std::string_view caption, std::uint64_t seed, const MixtureConfig& mix = {});

struct Diffused {
    Eigen::Vector2d x_t;
    Eigen::Vector2d eps;
};

Diffused forward_diffuse(const Eigen::Vector2d& x0, int t, const NoiseSchedule& sched, std::uint64_t seed);
Diffused forward_diffuse(const Eigen::Vector2d& x0, int t, const NoiseSchedule& sched, std::mt19937_64& rng);

/// Sinusoidal embedding of an integer timestep: [sin(t f_i), cos(t f_i)], f_i = 10000^(-i/(dim/2)).
VecX<double> timestep_embedding(int t, Index dim);

template <class S>
struct DenoiserParams {
    Index cond_dim = 0;
    Index temb_dim = 32;
    std::vector<Linear<S>> layers; // (2 + temb + cond) -> width -> width -> 2

    static DenoiserParams init(Index cond_dim, Index width, Index temb_dim, std::mt19937_64& rng) {
        DenoiserParams p;
        p.cond_dim = cond_dim;
        p.temb_dim = temb_dim;
        const Index in = 2 + temb_dim + cond_dim;
        p.layers.push_back(Linear<S>::init(in, width, 1.0 / std::sqrt(double(in)), rng));
        p.layers.push_back(Linear<S>::init(width, width, 1.0 / std::sqrt(double(width)), rng));
        p.layers.push_back(Linear<S>::init(width, 2, 1.0 / std::sqrt(double(width)), rng));
        return p;
    }

    DenoiserParams zeros_like() const {
        DenoiserParams z;
        z.cond_dim = cond_dim;
        z.temb_dim = temb_dim;
        for (const auto& l : layers) z.layers.push_back(Linear<S>::zeros(l.in_dim(), l.out_dim()));
        return z;
    }

    TensorList<S> tensors() {
        TensorList<S> out;
        for (auto& l : layers) {
            auto t = l.tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }
};

template <class S>
struct DenoiseResult {
    S loss;            // mean over the batch of ||eps - eps_theta||^2
    MatX<S> grad_cond; // dL/d(condition), one row per sample
};

/// Batched squared-error noise prediction. Rows of `x_t`, `cond` and `eps` are samples,
/// `t[i]` the timestep of row i. Accumulates dL/dtheta into `grad` when non-null.
template <class S>
DenoiseResult<S> denoise_loss(const MatX<S>& x_t, const std::vector<int>& t, const MatX<S>& cond, const MatX<S>& eps,
                              const DenoiserParams<S>& p, DenoiserParams<S>* grad = nullptr) {
    const Index n = x_t.rows();
    if (n < 1 || x_t.cols() != 2 || eps.rows() != n || eps.cols() != 2 || cond.rows() != n ||
        static_cast<Index>(t.size()) != n)
        throw ArgumentError("denoise_loss: inconsistent batch shapes");
    if (cond.cols() != p.cond_dim) throw ArgumentError("denoise_loss: condition has the wrong dimension");

    MatX<S> in(n, 2 + p.temb_dim + p.cond_dim);
    for (Index i = 0; i < n; ++i)
        in.row(i) << x_t.row(i), timestep_embedding(t[static_cast<std::size_t>(i)], p.temb_dim).transpose().template cast<S>(),
            cond.row(i);

    const MatX<S> z1 = p.layers[0].forward(in);
    const MatX<S> a1 = z1.unaryExpr([](S v) { return gelu(v); });
    const MatX<S> z2 = p.layers[1].forward(a1);
    const MatX<S> a2 = z2.unaryExpr([](S v) { return gelu(v); });
    const MatX<S> diff = p.layers[2].forward(a2) - eps;

    DenoiseResult<S> r{diff.squaredNorm() / S(n), MatX<S>()};
    if (!std::isfinite(static_cast<double>(r.loss))) throw NumericError("denoise_loss: non-finite loss");

    DenoiserParams<S> local;
    DenoiserParams<S>& g = grad ? *grad : (local = p.zeros_like());
    const MatX<S> dout = (S(2) / S(n)) * diff;
    MatX<S> dz2 = p.layers[2].backward(a2, dout, g.layers[2]).array() *
                  z2.unaryExpr([](S v) { return gelu_grad(v); }).array();
    MatX<S> dz1 = p.layers[1].backward(a1, dz2, g.layers[1]).array() *
                  z1.unaryExpr([](S v) { return gelu_grad(v); }).array();
    MatX<S> din = p.layers[0].backward(in, dz1, g.layers[0]);
    r.grad_cond = din.rightCols(p.cond_dim);
    return r;
}

/// Single sample: ||eps - eps_theta(x_t, t, cond)||^2.
template <class S>
DenoiseResult<S> denoise_loss(const Eigen::Vector2d& x_t, int t, const VecX<S>& cond, const Eigen::Vector2d& eps,
                              const DenoiserParams<S>& p, DenoiserParams<S>* grad = nullptr) {
    return denoise_loss<S>(MatX<S>(x_t.transpose().template cast<S>()), std::vector<int>{t}, MatX<S>(cond.transpose()),
                           MatX<S>(eps.transpose().template cast<S>()), p, grad);
}

/// Per-caption fusion summaries: row i is the masked mean of LayerNorm(h_i). The
/// condition under weights alpha is summaries^T alpha (the masked mean of the fused tokens).
MatX<double> layer_summaries(const HiddenStates& h);

struct WeightTrajectory {
    std::vector<long> step;
    std::vector<VecX<double>> alpha;
    std::vector<bool> frozen;
    long freeze_step = kNeverFreeze;

    /// Columns: step, alpha_1..alpha_L, frozen (0/1).
    void write(const std::filesystem::path& path) const;
    static WeightTrajectory read(const std::filesystem::path& path);
};

struct ToyDiffusionConfig {
    std::uint64_t seed = 0;
    long steps = 5000;
    long freeze_step = 3000;
    Index batch = 32;
    double lr = 1e-3;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    Index width = 128;
    Index temb_dim = 32;
    MixtureConfig mixture;
    bool permute_conditions = false; // control: condition on a random other caption each sample
    std::size_t eval_samples = 4000;
    unsigned threads = 1;

    void validate() const;
};

struct ToyDiffusionResult {
    DenoiserParams<double> denoiser;
    FusionWeights fusion;
    WeightTrajectory trajectory;
    std::vector<double> loss;   // per-step training loss (batch mean)
    double eval_loss = 0;       // fixed seeded evaluation set, true conditions
};

ToyDiffusionResult train_joint(const std::vector<std::string>& captions, const HiddenStateSource& encoder,
                               FusionWeights fusion, const ToyDiffusionConfig& cfg);

/// Mean denoising loss on a fixed evaluation set drawn from `eval_seed`.
double evaluate_denoiser(const std::vector<std::string>& captions, const std::vector<MatX<double>>& summaries,
                         const DenoiserParams<double>& p, const VecX<double>& alpha, const NoiseSchedule& sched,
                         const MixtureConfig& mix, std::size_t samples, std::uint64_t eval_seed);

void save_denoiser(const DenoiserParams<double>& p, const std::filesystem::path& path);
DenoiserParams<double> load_denoiser(const std::filesystem::path& path);

} // namespace ted
