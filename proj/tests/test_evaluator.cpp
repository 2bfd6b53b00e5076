#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ted/evaluator.hpp"
#include "ted/stats.hpp"
#include "ted/toyworld.hpp"

using namespace ted;
namespace fs = std::filesystem;

namespace {

VecX<double> v2(double a, double b) {
    VecX<double> v(2);
    v << a, b;
    return v;
}

/// Unit vector at angle acos(s) from e1, so that cos(e1, v) = s.
VecX<double> at_cos(double s) { return v2(s, std::sqrt(1 - s * s)); }

class TableEmbedder final : public Embedder<double> {
public:
    std::map<std::string, VecX<double>> table;
    double scale = 1.0;
    VecX<double> embed(const std::string& t) const override {
        auto it = table.find(t);
        if (it == table.end()) throw ArgumentError("no embedding for '" + t + "'");
        return scale * it->second;
    }
};

/// Independent Gaussian vector per text.
class RandomEmbedder final : public Embedder<double> {
public:
    VecX<double> embed(const std::string& t) const override {
        auto rng = make_rng(fnv1a64(t), 99);
        VecX<double> v(16);
        fill_normal<double>(v, 1.0, rng);
        return v;
    }
};

Ted6kInstance inst(std::string id, Category c, std::string cap, std::string pos, std::vector<std::string> negs) {
    return {std::move(id), std::move(cap), std::move(pos), std::move(negs), c};
}

std::vector<Ted6kInstance> random_bench(std::size_t n) {
    std::vector<Ted6kInstance> b;
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = std::to_string(i);
        b.push_back(inst("i" + s, kAllCategories[i % 9], "cap " + s, "pos " + s, {"n1 " + s, "n2 " + s, "n3 " + s}));
    }
    return b;
}

// Oracle: two-sided Student-t tail by Simpson integration of the density over [0, |t|].
double t_two_sided_by_quadrature(double t, double dof) {
    const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * M_PI);
    auto pdf = [&](double x) { return c * std::pow(1 + x * x / dof, -(dof + 1) / 2); };
    const int n = 200000;
    const double h = std::abs(t) / n;
    double s = pdf(0) + pdf(std::abs(t));
    for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 ? 4 : 2);
    return 1 - 2 * (s * h / 3);
}

// Oracle: Pearson r from centered sums.
double r_by_sums(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= x.size(), my /= y.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_CASE("score_instance examples") {
    const auto cap = v2(1, 0);
    auto r = score_instance<double>(cap, at_cos(0.9), {at_cos(0.2), at_cos(0.3), at_cos(0.1)});
    CHECK(r.correct);
    CHECK(r.margin == doctest::Approx(0.6));

    r = score_instance<double>(cap, at_cos(0.5), {at_cos(0.5), at_cos(0.1), at_cos(0.2)});
    CHECK_FALSE(r.correct);
    CHECK(r.margin == doctest::Approx(0.0));

    r = score_instance<double>(cap, v2(1, 0), {v2(0, 1)});
    CHECK(r.correct);
    CHECK(r.margin == doctest::Approx(1.0));

    CHECK_THROWS_AS(score_instance<double>(cap, cap, {}), ArgumentError);
    CHECK_THROWS_AS(score_instance<double>(cap, v2(0, 0), {cap}), NumericError);
}

TEST_CASE("evaluate: accuracy and per-category breakdown") {
    TableEmbedder e;
    e.table = {{"c1", v2(1, 0)}, {"p1", v2(1, 0.1)}, {"n1", v2(0, 1)},    // cos 0.995 vs 0
               {"c2", v2(1, 0)}, {"p2", v2(1, 0.2)}, {"n2", v2(1, -0.5)}, // cos 0.981 vs 0.894
               {"c3", v2(1, 0)}, {"p3", v2(0, 1)},   {"n3", v2(1, 0)}};   // cos 0 vs 1
    const std::vector<Ted6kInstance> bench = {inst("a", Category::ocr, "c1", "p1", {"n1"}),
                                              inst("b", Category::ocr, "c2", "p2", {"n2", "n1"}),
                                              inst("c", Category::action, "c3", "p3", {"n3"})};
    const auto rep = evaluate<double>(bench, e);
    CHECK(rep.n_instances == 3);
    CHECK(rep.n_correct == 2);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", rep.overall_accuracy);
    CHECK(std::string(buf) == "66.67");
    CHECK(rep.per_category.at(Category::ocr).count == 2);
    CHECK(rep.per_category.at(Category::ocr).accuracy() == 100.0);
    CHECK(rep.per_category.at(Category::action).accuracy() == 0.0);

    std::size_t total = 0;
    for (const auto& [c, sc] : rep.per_category) total += sc.count;
    CHECK(total == rep.n_instances);

    const auto tsv = rep.to_tsv();
    CHECK(tsv.rfind("category\tn\taccuracy\n", 0) == 0);
    CHECK(tsv.find("overall\t3\t66.67") != std::string::npos);
}

TEST_CASE("all-correct benchmark scores 100 in every category") {
    std::vector<Ted6kInstance> bench;
    TableEmbedder e;
    for (int i = 0; i < 18; ++i) {
        const auto s = std::to_string(i);
        e.table["c" + s] = v2(1, 0);
        e.table["p" + s] = v2(1, 0);
        e.table["n" + s] = v2(0, 1);
        bench.push_back(inst(s, kAllCategories[i % 9], "c" + s, "p" + s, {"n" + s}));
    }
    const auto rep = evaluate<double>(bench, e);
    CHECK(rep.overall_accuracy == 100.0);
    for (auto c : kAllCategories) CHECK(rep.per_category.at(c).accuracy() == 100.0);
}

TEST_CASE("rigged toy benchmark: positive = caption verbatim") {
    auto world = make_toy_world({.instances = 45});
    for (auto& i : world.bench) i.positive = i.caption;
    auto enc = make_encoder("toy:seed=7,dim=32");
    AggregatorConfig cfg;
    cfg.dim = cfg.out_dim = 32;
    cfg.heads = 4;
    TextEmbedder<double> e(*enc, NormAvg{}, init_params<double>(0, cfg));
    CHECK(evaluate<double>(world.bench, e).overall_accuracy == 100.0);
}

TEST_CASE("cosine scoring is invariant to rescaling embeddings") {
    const auto bench = random_bench(200);
    RandomEmbedder r;
    TableEmbedder e;
    for (const auto& i : bench) {
        e.table[i.caption] = r.embed(i.caption).head(2);
        e.table[i.positive] = r.embed(i.positive).head(2);
        for (const auto& n : i.negatives) e.table[n] = r.embed(n).head(2);
    }
    const auto a = evaluate<double>(bench, e);
    e.scale = 37.5;
    const auto b = evaluate<double>(bench, e);
    CHECK(a.n_correct == b.n_correct);
    CHECK(a.to_tsv() == b.to_tsv());
    CHECK_FALSE(evaluate<double>(bench, e, {.similarity = SimilarityKind::dot}).to_text().empty());
}

TEST_CASE("encoding failures abort unless skipped") {
    TableEmbedder e;
    e.table = {{"c", v2(1, 0)}, {"p", v2(1, 0)}, {"n", v2(0, 1)}};
    const std::vector<Ted6kInstance> bench = {inst("ok", Category::ocr, "c", "p", {"n"}),
                                              inst("broken", Category::ocr, "c", "p", {"missing"})};
    try {
        evaluate<double>(bench, e);
        FAIL("no throw");
    } catch (const Error& err) {
        CHECK(std::string(err.what()).find("broken") != std::string::npos);
    }
    const auto rep = evaluate<double>(bench, e, {.skip_errors = true});
    CHECK(rep.n_instances == 1);
    CHECK(rep.excluded == std::vector<std::string>{"broken"});
}

TEST_CASE("shuffle baseline with random embeddings sits at chance") {
    const auto bench = random_bench(2000);
    RandomEmbedder e;
    const auto rep = shuffle_baseline<double>(bench, e, 3);
    // 3-sigma binomial band around 25% at n = 2000
    const double sd = 100 * std::sqrt(0.25 * 0.75 / 2000);
    CHECK(std::abs(rep.overall_accuracy - 25.0) < 3 * sd);
    CHECK(shuffle_baseline<double>(bench, e, 3).to_tsv() == rep.to_tsv());
    CHECK_THROWS_AS(shuffle_baseline<double>(random_bench(1), e, 3), ArgumentError);
}

TEST_CASE("derangement has no fixed points and is seeded") {
    for (std::size_t n : {2u, 3u, 10u, 401u}) {
        const auto d = derangement(n, 7);
        std::set<std::size_t> seen(d.begin(), d.end());
        CHECK(seen.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(d[i] != i);
        CHECK(derangement(n, 7) == d);
    }
    CHECK(derangement(50, 1) != derangement(50, 2));
}

TEST_CASE("report files and pairing check") {
    TableEmbedder e;
    e.table = {{"c", v2(1, 0)}, {"p", v2(1, 0)}, {"n", v2(0, 1)}};
    const auto rep = evaluate<double>({inst("a", Category::adverb, "c", "p", {"n"})}, e, {}, {{"seed", "3"}});
    const auto dir = fs::temp_directory_path() / "ted_test_report";
    fs::create_directories(dir);
    rep.write(dir);
    CHECK(fs::exists(dir / "report.txt"));
    CHECK(fs::exists(dir / "report.tsv"));
    CHECK(rep.to_text().find("seed") != std::string::npos);

    const Metadata meta{{"encoder", "toy:seed=7"}, {"fusion", "norm_avg"}};
    CHECK_FALSE(pairing_mismatch(meta, "toy:seed=7", "norm_avg"));
    CHECK(pairing_mismatch(meta, "toy:seed=8", "norm_avg"));
    CHECK(pairing_mismatch(meta, "toy:seed=7", "last"));
}

TEST_CASE("stability runs with repeated seeds do not vary") {
    ToyWorldConfig wc;
    wc.pairs = 64;
    wc.instances = 27;
    const auto world = make_toy_world(wc);
    auto enc = make_encoder("toy:seed=7,dim=32");
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 16;
    cfg.aggregator.dim = cfg.aggregator.out_dim = 32;
    cfg.aggregator.heads = 4;
    const auto same = stability_runs<double>(world.pairs, world.bench, *enc, NormAvg{}, cfg, {5, 5});
    CHECK(same.scores.size() == 2);
    CHECK(same.max_variation == 0.0);

    const auto three = stability_runs<double>(world.pairs, world.bench, *enc, NormAvg{}, cfg, {1, 2, 3});
    CHECK(three.scores.size() == 3);
    const auto [lo, hi] = std::minmax_element(three.scores.begin(), three.scores.end());
    CHECK(three.max_variation == *hi - *lo);

    CHECK_THROWS_AS(stability_runs<double>(world.pairs, world.bench, *enc, NormAvg{}, cfg, {1}), ArgumentError);
    cfg.tau = -1;
    try {
        stability_runs<double>(world.pairs, world.bench, *enc, NormAvg{}, cfg, {4, 9});
        FAIL("no throw");
    } catch (const Error& err) {
        CHECK(std::string(err.what()).rfind("seed 4:", 0) == 0);
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("pearson: four-point table") {
    const std::vector<double> x{53.62, 55.37, 55.31, 56.81}, y{65.13, 70.59, 68.70, 77.94};
    const auto r = pearson(x, y);
    CHECK(r.r == doctest::Approx(r_by_sums(x, y)).epsilon(1e-12));
    CHECK(r.r == doctest::Approx(0.9587).epsilon(0.0005 / 0.9587));
    CHECK(r.p == doctest::Approx(0.04129).epsilon(0.05));
    CHECK(r.n == 4);
}

TEST_CASE("pearson p-value against quadrature") {
    const double rr = 0.9914, dof = 4;
    const double t = rr * std::sqrt(dof / (1 - rr * rr));
    const double oracle = t_two_sided_by_quadrature(t, dof);
    CHECK(student_t_two_sided_p(t, dof) == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(oracle == doctest::Approx(1.09e-4).epsilon(0.05));

    for (double tt : {0.1, 0.7, 1.5, 2.2, 4.0})
        for (double d : {1.0, 2.0, 5.0, 17.0})
            CHECK(student_t_two_sided_p(tt, d) == doctest::Approx(t_two_sided_by_quadrature(tt, d)).epsilon(1e-6));
    CHECK(student_t_two_sided_p(0.0, 3.0) == doctest::Approx(1.0));
}

TEST_CASE("pearson edge cases") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    const auto r = pearson(x, y);
    CHECK(r.r == doctest::Approx(1.0));
    CHECK(r.p == 0.0);

    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(pearson(x, neg).r == doctest::Approx(-1.0));

    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ArgumentError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2, 3}), ArgumentError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>(5, 2.0)), NumericError);

    CHECK(r.to_record().rfind("r 1.000000\n", 0) == 0);
}
