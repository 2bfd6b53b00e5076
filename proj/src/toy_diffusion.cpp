#include "ted/toy_diffusion.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "ted/util.hpp"

namespace ted {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
    if (T < 2) throw ConfigError("noise schedule: at least two timesteps are required");
    if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end))
        throw ConfigError("noise schedule: betas must satisfy 0 < start <= end < 1");
    NoiseSchedule s;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alpha_bar.resize(static_cast<std::size_t>(T));
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        s.betas[t] = beta_start + (beta_end - beta_start) * t / (T - 1);
        s.alpha_bar[t] = prod;
        prod *= 1.0 - s.betas[t];
    }
    return s;
}

int mixture_component(std::string_view caption, const MixtureConfig& mix) {
    if (mix.components < 1) throw ConfigError("mixture: at least one component is required");
    return static_cast<int>(fnv1a64(caption) % static_cast<std::uint64_t>(mix.components));
}

Eigen::Vector2d component_mean(int component, const MixtureConfig& mix) {
    const double angle = 2.0 * std::numbers::pi * component / mix.components;
    return {mix.radius * std::cos(angle), mix.radius * std::sin(angle)};
}

Eigen::Vector2d sample_synthetic(std::string_view caption, std::uint64_t seed, const MixtureConfig& mix) {
    auto rng = make_rng(seed, fnv1a64(caption));
    std::normal_distribution<double> n01;
    const double a = n01(rng), b = n01(rng);
    return component_mean(mixture_component(caption, mix), mix) + mix.sigma * Eigen::Vector2d(a, b);
}

Diffused forward_diffuse(const Eigen::Vector2d& x0, int t, const NoiseSchedule& sched, std::mt19937_64& rng) {
    if (t < 0 || t >= sched.steps())
        throw ArgumentError("forward_diffuse: timestep " + std::to_string(t) + " outside [0, " +
                            std::to_string(sched.steps()) + ")");
    std::normal_distribution<double> n01;
    const double a = n01(rng), b = n01(rng);
    Diffused d;
    d.eps = Eigen::Vector2d(a, b);
    const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
    d.x_t = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * d.eps;
    return d;
}

Diffused forward_diffuse(const Eigen::Vector2d& x0, int t, const NoiseSchedule& sched, std::uint64_t seed) {
    auto rng = make_rng(seed, 0x6e6f6973);
    return forward_diffuse(x0, t, sched, rng);
}

VecX<double> timestep_embedding(int t, Index dim) {
    if (dim < 2 || dim % 2) throw ConfigError("timestep embedding dimension must be even and positive");
    const Index half = dim / 2;
    VecX<double> e(dim);
    for (Index i = 0; i < half; ++i) {
        const double f = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        e(i) = std::sin(t * f);
        e(half + i) = std::cos(t * f);
    }
    return e;
}

MatX<double> layer_summaries(const HiddenStates& h) {
    const auto normed = normalize_layers<double>(h);
    MatX<double> out(h.num_layers(), h.dim());
    for (Index l = 0; l < h.num_layers(); ++l)
        out.row(l) = masked_mean<double>(normed.layers[static_cast<std::size_t>(l)], h.mask).transpose();
    return out;
}

void WeightTrajectory::write(const std::filesystem::path& path) const {
    if (step.empty()) throw ArgumentError("trajectory is empty");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "step";
    for (Index i = 0; i < alpha.front().size(); ++i) out << "\talpha_" << (i + 1);
    out << "\tfrozen\n";
    char buf[32];
    for (std::size_t r = 0; r < step.size(); ++r) {
        out << step[r];
        for (Index i = 0; i < alpha[r].size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", alpha[r](i));
            out << '\t' << buf;
        }
        out << '\t' << (frozen[r] ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

WeightTrajectory WeightTrajectory::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::format, "trajectory file is empty: " + path.string());
    Index cols = 0;
    {
        std::istringstream hs(line);
        std::string h;
        while (hs >> h) ++cols;
    }
    if (cols < 3) throw Error(ErrorKind::format, "trajectory header needs step, alphas and frozen columns");
    const Index layers = cols - 2;
    WeightTrajectory t;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        long s;
        VecX<double> a(layers);
        int f;
        ls >> s;
        for (Index i = 0; i < layers; ++i) ls >> a(i);
        ls >> f;
        if (!ls) throw Error(ErrorKind::format, "trajectory line " + std::to_string(lineno) + " is malformed");
        t.step.push_back(s);
        t.alpha.push_back(a);
        t.frozen.push_back(f != 0);
        if (f != 0 && t.freeze_step == kNeverFreeze) t.freeze_step = s;
    }
    return t;
}

void ToyDiffusionConfig::validate() const {
    if (steps < 0) throw ConfigError("toy diffusion: steps must be non-negative");
    if (freeze_step < 0) throw ConfigError("toy diffusion: freeze_step must be non-negative");
    if (batch < 1) throw ConfigError("toy diffusion: batch must be positive");
    if (!(lr > 0)) throw ConfigError("toy diffusion: learning rate must be positive");
    if (width < 1 || temb_dim < 2 || temb_dim % 2) throw ConfigError("toy diffusion: bad denoiser dimensions");
    if (mixture.components < 2) throw ConfigError("toy diffusion: at least two mixture components are required");
    if (!(mixture.sigma > 0)) throw ConfigError("toy diffusion: sigma must be positive");
}

namespace {

struct Batch {
    MatX<double> x_t, eps, cond;
    std::vector<int> t;
    std::vector<std::size_t> cond_caption;
};

// One seeded batch; the condition uses caption `cond_caption[i]` (the data caption
// unless `permute` redraws it).
Batch draw_batch(const std::vector<std::string>& captions, const std::vector<MatX<double>>& summaries,
                 const VecX<double>& alpha, const NoiseSchedule& sched, const MixtureConfig& mix, Index n,
                 bool permute, std::mt19937_64& rng) {
    Batch b{MatX<double>(n, 2), MatX<double>(n, 2), MatX<double>(n, summaries.front().cols()), {}, {}};
    std::uniform_int_distribution<std::size_t> pick(0, captions.size() - 1);
    std::uniform_int_distribution<int> tdist(0, sched.steps() - 1);
    for (Index i = 0; i < n; ++i) {
        const std::size_t c = pick(rng);
        const Eigen::Vector2d x0 = sample_synthetic(captions[c], rng(), mix);
        const int t = tdist(rng);
        const auto d = forward_diffuse(x0, t, sched, rng);
        const std::size_t cc = permute ? pick(rng) : c;
        b.x_t.row(i) = d.x_t.transpose();
        b.eps.row(i) = d.eps.transpose();
        b.t.push_back(t);
        b.cond_caption.push_back(cc);
        b.cond.row(i) = (summaries[cc].transpose() * alpha).transpose();
    }
    return b;
}

} // namespace

double evaluate_denoiser(const std::vector<std::string>& captions, const std::vector<MatX<double>>& summaries,
                         const DenoiserParams<double>& p, const VecX<double>& alpha, const NoiseSchedule& sched,
                         const MixtureConfig& mix, std::size_t samples, std::uint64_t eval_seed) {
    if (samples == 0) throw ArgumentError("evaluate_denoiser: no samples");
    auto rng = make_rng(eval_seed, 0x6576616c);
    const auto b = draw_batch(captions, summaries, alpha, sched, mix, static_cast<Index>(samples), false, rng);
    return denoise_loss<double>(b.x_t, b.t, b.cond, b.eps, p).loss;
}

ToyDiffusionResult train_joint(const std::vector<std::string>& captions, const HiddenStateSource& encoder,
                               FusionWeights fusion, const ToyDiffusionConfig& cfg) {
    cfg.validate();
    if (captions.empty()) throw ArgumentError("train_joint: no captions");
    {
        std::vector<bool> seen(static_cast<std::size_t>(cfg.mixture.components));
        int covered = 0;
        for (const auto& c : captions) {
            auto k = static_cast<std::size_t>(mixture_component(c, cfg.mixture));
            if (!seen[k]) seen[k] = true, ++covered;
        }
        if (covered < 2) throw ArgumentError("train_joint: captions cover fewer than two mixture components");
    }

    std::vector<MatX<double>> summaries(captions.size());
    for (std::size_t i = 0; i < captions.size(); ++i) {
        try {
            summaries[i] = layer_summaries(encoder.encode(captions[i]));
        } catch (const Error& e) {
            throw Error(e.kind(), "caption " + std::to_string(i) + ": " + e.what());
        }
        if (summaries[i].rows() != fusion.size())
            throw ArgumentError("train_joint: fusion weights have " + std::to_string(fusion.size()) +
                                " entries, encoder emits " + std::to_string(summaries[i].rows()) + " layers");
    }

    const auto sched = NoiseSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    auto init_rng = make_rng(cfg.seed, 0x646966);
    ToyDiffusionResult r;
    r.denoiser = DenoiserParams<double>::init(summaries.front().cols(), cfg.width, cfg.temb_dim, init_rng);
    r.trajectory.freeze_step = cfg.freeze_step;
    Adam<double> opt(AdamConfig{.lr = cfg.lr});
    Adam<double> fusion_opt(AdamConfig{.lr = cfg.lr});

    for (long step = 0; step < cfg.steps; ++step) {
        fusion = apply_schedule(std::move(fusion), step, cfg.freeze_step);
        const VecX<double> alpha = fusion.alphas();
        r.trajectory.step.push_back(step);
        r.trajectory.alpha.push_back(alpha);
        r.trajectory.frozen.push_back(fusion.frozen());

        auto rng = make_rng(cfg.seed, 0x7374657000000000ULL + static_cast<std::uint64_t>(step));
        const auto b = draw_batch(captions, summaries, alpha, sched, cfg.mixture, cfg.batch, cfg.permute_conditions, rng);
        auto grad = r.denoiser.zeros_like();
        const auto res = denoise_loss<double>(b.x_t, b.t, b.cond, b.eps, r.denoiser, &grad);
        r.loss.push_back(res.loss);

        opt.step(r.denoiser.tensors(), grad.tensors());
        if (!fusion.frozen()) {
            VecX<double> dalpha = VecX<double>::Zero(fusion.size());
            for (Index i = 0; i < cfg.batch; ++i)
                dalpha += summaries[b.cond_caption[static_cast<std::size_t>(i)]] * res.grad_cond.row(i).transpose();
            VecX<double> dw = softmax_backward<double>(alpha, dalpha);
            fusion_opt.step({fusion.trainable()}, {std::span<double>(dw.data(), dw.size())});
        }
    }
    r.fusion = fusion;
    r.eval_loss = evaluate_denoiser(captions, summaries, r.denoiser, fusion.alphas(), sched, cfg.mixture,
                                    cfg.eval_samples, cfg.seed);
    return r;
}

namespace {

constexpr char kDenoiserMagic[4] = {'T', 'E', 'D', 'D'};

} // namespace

void save_denoiser(const DenoiserParams<double>& p, const std::filesystem::path& path) {
    if constexpr (std::endian::native != std::endian::little)
        throw Error(ErrorKind::format, "big-endian hosts are not supported");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(kDenoiserMagic, 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(p.cond_dim), static_cast<std::uint32_t>(p.temb_dim),
                                   static_cast<std::uint32_t>(p.layers.at(0).out_dim())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    for (auto& t : const_cast<DenoiserParams<double>&>(p).tensors())
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size_bytes()));
    if (!out) throw IoError("write failed: " + path.string());
}

DenoiserParams<double> load_denoiser(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open denoiser " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kDenoiserMagic, 4) != 0)
        throw Error(ErrorKind::format, "not a denoiser checkpoint: " + path.string());
    std::uint32_t dims[3];
    std::memcpy(dims, bytes.data() + 4, sizeof dims);
    auto rng = make_rng(0);
    auto p = DenoiserParams<double>::init(dims[0], dims[2], dims[1], rng);
    std::size_t pos = 16;
    for (auto& t : p.tensors()) {
        if (bytes.size() - pos < t.size_bytes()) throw Error(ErrorKind::format, "denoiser checkpoint is truncated");
        std::memcpy(t.data(), bytes.data() + pos, t.size_bytes());
        pos += t.size_bytes();
    }
    if (pos != bytes.size()) throw Error(ErrorKind::format, "denoiser checkpoint has trailing bytes");
    return p;
}

} // namespace ted
