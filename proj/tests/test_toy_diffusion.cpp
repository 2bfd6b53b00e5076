#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "ted/toy_diffusion.hpp"

using namespace ted;

namespace {

std::vector<std::string> captions(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("caption number " + std::to_string(i) + " about thing " + std::to_string(i % 5));
    return out;
}

ToyDiffusionConfig quick(long steps, long freeze) {
    ToyDiffusionConfig c;
    c.steps = steps;
    c.freeze_step = freeze;
    c.batch = 8;
    c.width = 16;
    c.temb_dim = 8;
    c.eval_samples = 64;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("noise schedule") {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    CHECK(s.steps() == 1000);
    CHECK(s.alpha_bar[0] == 1.0);
    CHECK(s.betas.front() == doctest::Approx(1e-4));
    CHECK(s.betas.back() == doctest::Approx(0.02));
    double prod = 1;
    for (int t = 0; t < 10; ++t) prod *= 1 - s.betas[t];
    CHECK(s.alpha_bar[10] == doctest::Approx(prod).epsilon(1e-14));
    CHECK(s.alpha_bar.back() < 1e-4);
    CHECK_THROWS_AS(NoiseSchedule::linear(1, 1e-4, 0.02), ConfigError);
}

TEST_CASE("synthetic data: deterministic, separable, centred on the component") {
    const MixtureConfig mix;
    CHECK(sample_synthetic("a cat", 5, mix) == sample_synthetic("a cat", 5, mix));
    for (int a = 0; a < mix.components; ++a)
        for (int b = a + 1; b < mix.components; ++b)
            CHECK((component_mean(a, mix) - component_mean(b, mix)).norm() >= 4 * mix.sigma);

    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (std::uint64_t s = 0; s < 1000; ++s) mean += sample_synthetic("a cat", s, mix);
    mean /= 1000;
    CHECK((mean - component_mean(mixture_component("a cat", mix), mix)).norm() < 0.2);
}

TEST_CASE("forward diffusion") {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    const Eigen::Vector2d x0(1.5, -2.0);
    CHECK(forward_diffuse(x0, 0, s, 9).x_t == x0);

    const auto last = forward_diffuse(x0, 999, s, 9);
    CHECK((last.x_t - last.eps).norm() < 0.05);

    // Var(x_t) = ab Var(x0) + (1 - ab), with x0 drawn from one mixture component
    const MixtureConfig mix;
    for (int t : {50, 300, 700}) {
        std::mt19937_64 rng(t);
        const int n = 10000;
        std::vector<double> xs;
        double m = 0;
        for (int i = 0; i < n; ++i) {
            const auto d = forward_diffuse(sample_synthetic("a cat", static_cast<std::uint64_t>(i), mix), t, s, rng);
            xs.push_back(d.x_t(0));
            m += d.x_t(0);
        }
        m /= n;
        double var = 0;
        for (double x : xs) var += (x - m) * (x - m);
        var /= n - 1;
        const double ab = s.alpha_bar[t];
        const double expected = ab * mix.sigma * mix.sigma + (1 - ab);
        CHECK(std::abs(var - expected) / expected < 0.05);
    }
    CHECK_THROWS_AS(forward_diffuse(x0, 1000, s, 1), ArgumentError);
    CHECK_THROWS_AS(forward_diffuse(x0, -1, s, 1), ArgumentError);
}

TEST_CASE("denoise loss examples") {
    std::mt19937_64 rng(1);
    auto p = DenoiserParams<double>::init(3, 8, 4, rng);
    p.layers[2].weight.setZero();
    const Eigen::Vector2d eps(0.3, -1.1), x(0.5, 0.5);
    VecX<double> cond(3);
    cond << 1, 2, 3;

    p.layers[2].bias.setZero();
    CHECK(denoise_loss<double>(x, 10, cond, eps, p).loss == doctest::Approx(eps.squaredNorm()));

    p.layers[2].bias = eps;
    CHECK(denoise_loss<double>(x, 10, cond, eps, p).loss == doctest::Approx(0.0));

    CHECK_THROWS_AS(denoise_loss<double>(x, 10, VecX<double>::Zero(2), eps, p), ArgumentError);
}

TEST_CASE("timestep embedding") {
    const auto e = timestep_embedding(0, 8);
    for (Index i = 0; i < 4; ++i) {
        CHECK(e(i) == 0.0);
        CHECK(e(4 + i) == 1.0);
    }
    CHECK_THROWS_AS(timestep_embedding(3, 5), ConfigError);
}

TEST_CASE("joint training: freeze contract and trajectory table") {
    const auto caps = captions(12);
    auto enc = make_encoder("toy:seed=7,dim=16");
    const auto r = train_joint(caps, *enc, FusionWeights(4), quick(120, 60));
    const auto& tr = r.trajectory;
    REQUIRE(tr.alpha.size() == 120);
    CHECK(r.loss.size() == 120);
    for (const auto& a : tr.alpha) CHECK(a.sum() == doctest::Approx(1.0).epsilon(1e-9));

    int flips = 0;
    for (std::size_t i = 1; i < tr.frozen.size(); ++i) flips += tr.frozen[i] != tr.frozen[i - 1];
    CHECK(flips == 1);
    CHECK_FALSE(tr.frozen[59]);
    CHECK(tr.frozen[60]);
    for (std::size_t i = 61; i < tr.alpha.size(); ++i) CHECK(tr.alpha[i] == tr.alpha[60]);
    CHECK(r.fusion.frozen());
    CHECK(r.fusion.alphas() == tr.alpha.back());

    const auto path = std::filesystem::temp_directory_path() / "ted_test_trajectory.tsv";
    tr.write(path);
    const auto back = WeightTrajectory::read(path);
    CHECK(back.step == tr.step);
    CHECK(back.frozen == tr.frozen);
    CHECK(back.alpha == tr.alpha);

    const auto again = train_joint(caps, *enc, FusionWeights(4), quick(120, 60));
    CHECK(again.loss == r.loss);
    CHECK(again.eval_loss == r.eval_loss);
}

TEST_CASE("joint training: freeze at 0 keeps the uniform weights") {
    auto enc = make_encoder("toy:seed=7,dim=16");
    const auto r = train_joint(captions(8), *enc, FusionWeights(4), quick(30, 0));
    for (const auto& a : r.trajectory.alpha) CHECK((a.array() == 0.25).all());
    for (bool f : r.trajectory.frozen) CHECK(f);
}

TEST_CASE("denoiser checkpoint round trip") {
    std::mt19937_64 rng(2);
    const auto p = DenoiserParams<double>::init(5, 12, 6, rng);
    const auto path = std::filesystem::temp_directory_path() / "ted_test_denoiser.bin";
    save_denoiser(p, path);
    const auto q = load_denoiser(path);
    REQUIRE(q.layers.size() == 3);
    CHECK(q.cond_dim == 5);
    CHECK(q.temb_dim == 6);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(q.layers[i].weight == p.layers[i].weight);
        CHECK(q.layers[i].bias == p.layers[i].bias);
    }
}
