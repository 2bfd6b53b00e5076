// End-to-end acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "grad_cases.hpp"
#include "random_states.hpp"
#include "ted/cli.hpp"
#include "ted/corpus.hpp"
#include "ted/fusion.hpp"
#include "ted/stats.hpp"
#include "ted/tedh.hpp"
#include "ted/toy_diffusion.hpp"

using namespace ted;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [fail]");
    }
};

std::string f(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

fs::path out_root() {
    static const fs::path p = [] {
        auto r = fs::temp_directory_path() / "ted_acceptance";
        fs::remove_all(r);
        fs::create_directories(r);
        return r;
    }();
    return p;
}

/// Runs the CLI in-process; returns the key/value lines it printed. Throws on non-zero exit.
std::map<std::string, std::string> cli(std::vector<std::string> args) {
    args.insert(args.begin() + 1, {"--out", out_root().string()});
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) throw std::runtime_error("ted " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
    std::map<std::string, std::string> kv;
    std::istringstream in(out.str());
    for (std::string line; std::getline(in, line);) {
        const auto sp = line.find(' ');
        if (sp != std::string::npos) kv[line.substr(0, sp)] = line.substr(sp + 1);
    }
    return kv;
}

double accuracy_of(const fs::path& run_dir) {
    std::ifstream in(run_dir / "report.tsv");
    for (std::string line; std::getline(in, line);)
        if (line.rfind("overall\t", 0) == 0) return std::stod(line.substr(line.rfind('\t') + 1));
    throw std::runtime_error("no overall row in " + (run_dir / "report.tsv").string());
}

// ---------------------------------------------------------------------------

Verdict pearson_tables() {
    Verdict v;
    const std::vector<double> x3{44.60, 53.05, 53.62, 55.31, 55.99, 56.81}, y3{54.67, 71.15, 71.15, 74.46, 75.51, 76.17};
    const std::vector<double> x4{53.62, 55.37, 55.31, 56.81}, y4{65.13, 70.59, 68.70, 77.94};
    const auto t3 = pearson(x3, y3), t4 = pearson(x4, y4);
    v.require(std::abs(t3.r - 0.9914) <= 5e-4, "six-pair r=" + f("%.4f", t3.r) + " (want 0.9914)");
    v.require(std::abs(t3.p - 1.09e-4) <= 0.05 * 1.09e-4, "p=" + f("%.3g", t3.p) + " (want 1.09e-4)");
    v.require(std::abs(t4.r - 0.9587) <= 5e-4, "four-pair r=" + f("%.4f", t4.r) + " (want 0.9587)");
    v.require(std::abs(t4.p - 0.04129) <= 0.05 * 0.04129, "p=" + f("%.4g", t4.p) + " (want 0.04129)");
    return v;
}

Verdict gradient_suite() {
    Verdict v;
    const std::vector<std::pair<const char*, std::function<double()>>> cases = {
        {"layer_norm", [] { return gradcheck::layer_norm(100, 101); }},
        {"softmax", [] { return gradcheck::softmax_cross_entropy(100, 102); }},
        {"gelu", [] { return gradcheck::gelu(100, 103); }},
        {"attention_block", [] { return gradcheck::attention_block(100, 104); }},
        {"fuse_grad_w", [] { return gradcheck::fuse_grad_w(100, 105); }},
        {"aggregate", [] { return gradcheck::aggregate(100, 106); }},
        {"info_nce_loss", [] { return gradcheck::info_nce(100, 107); }},
        {"denoise_loss", [] { return gradcheck::denoise(100, 108); }},
    };
    for (const auto& [name, run] : cases) {
        const double err = run();
        v.require(err < 1e-4, std::string(name) + " " + f("%.1e", err));
    }
    return v;
}

Verdict fusion_equivalence() {
    std::mt19937_64 rng(4);
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
        const auto h = testutil::random_states(rng, 6, 12, 16);
        const auto a = fuse<double>(h, NormAvg{}).tokens;
        const auto b = fuse<double>(h, Learnable{FusionWeights(h.num_layers())}).tokens;
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    Verdict v;
    v.require(worst <= 1e-6, "max |learnable(w=0) - norm_avg| = " + f("%.1e", worst) + " over 50 cases");
    return v;
}

const std::string kEncoder = "toy:seed=7";

struct ToyRun {
    fs::path gen, trained;
};

ToyRun& toy_run() {
    static ToyRun r;
    return r;
}

Verdict end_to_end() {
    Verdict v;
    auto& r = toy_run();
    r.gen = cli({"toygen", "--seed", "0", "--n-pairs", "512", "--n-instances", "400"}).at("run_dir");
    const auto pairs = (r.gen / "pairs.jsonl").string(), bench = (r.gen / "bench.jsonl").string();
    v.require(load_pairs(pairs).size() == 512 && load_ted6k(bench).size() == 400, "512 pairs, 400 instances");

    auto train = [&](const std::string& epochs) {
        return fs::path(cli({"train", "--pairs", pairs, "--encoder", kEncoder, "--fusion", "norm_avg", "--lr", "1e-3",
                             "--batch", "32", "--tau", "0.07", "--epochs", epochs})
                            .at("run_dir"));
    };
    auto eval = [&](const fs::path& dir) {
        return accuracy_of(cli({"eval", "--bench", bench, "--encoder", kEncoder, "--fusion", "norm_avg", "--ckpt",
                                (dir / "aggregator.bin").string()})
                               .at("run_dir"));
    };
    const double before = eval(train("0"));
    v.require(before >= 15 && before <= 35, "untrained " + f("%.2f", before) + "% (want [15, 35])");
    r.trained = train("1");
    const double after = eval(r.trained);
    v.require(after >= 90, "after 1 epoch " + f("%.2f", after) + "% (want >= 90)");
    return v;
}

Verdict shuffle_robustness() {
    Verdict v;
    const auto& r = toy_run();
    if (r.trained.empty()) throw std::runtime_error("needs the trained aggregator from the end-to-end criterion");
    const double acc = accuracy_of(cli({"shuffle", "--seed", "0", "--bench", (r.gen / "bench.jsonl").string(),
                                        "--encoder", kEncoder, "--fusion", "norm_avg", "--ckpt",
                                        (r.trained / "aggregator.bin").string()})
                                       .at("run_dir"));
    v.require(acc >= 18 && acc <= 32, "shuffled " + f("%.2f", acc) + "% (want [18, 32])");
    return v;
}

Verdict stability() {
    Verdict v;
    const auto& r = toy_run();
    if (r.gen.empty()) throw std::runtime_error("needs the toy corpus from the end-to-end criterion");
    const auto kv = cli({"stability", "--seed", "0", "--runs", "5", "--pairs", (r.gen / "pairs.jsonl").string(),
                         "--bench", (r.gen / "bench.jsonl").string(), "--encoder", kEncoder, "--fusion",
                         "norm_avg,last", "--lr", "1e-3"});
    std::ifstream in(fs::path(kv.at("run_dir")) / "stability.tsv");
    std::string line, scores;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        scores += (scores.empty() ? "" : " ") + line.substr(line.rfind('\t') + 1);
    }
    v.require(rows == 10, "10 runs completed (" + scores + ")");
    v.require(kv.count("ranking_consistent") && kv.at("ranking_consistent") == "1", "norm_avg vs last ranking identical across 5 seeds");
    return v;
}

Verdict two_step_schedule() {
    Verdict v;
    const auto& r = toy_run();
    if (r.gen.empty()) throw std::runtime_error("needs the toy corpus from the end-to-end criterion");
    const auto caps_path = out_root() / "captions.txt";
    {
        std::set<std::string> seen;
        std::ofstream out(caps_path);
        for (const auto& p : load_pairs(r.gen / "pairs.jsonl"))
            if (seen.size() < 32 && seen.insert(p.caption_a).second) out << p.caption_a << '\n';
    }
    auto run = [&](std::vector<std::string> extra) {
        std::vector<std::string> args{"toydiff", "--seed", "1", "--captions", caps_path.string(), "--encoder", kEncoder,
                                      "--steps", "5000"};
        args.insert(args.end(), extra.begin(), extra.end());
        const fs::path dir = cli(args).at("run_dir");
        double eval_loss = 0;
        std::ifstream in(dir / "summary.txt");
        std::string key;
        in >> key >> eval_loss;
        return std::pair{WeightTrajectory::read(dir / "trajectory.tsv"), eval_loss};
    };

    const auto [frozen, loss_true] = run({"--freeze-step", "3000"});
    bool identical = frozen.alpha.size() == 5000;
    for (std::size_t i = 3001; identical && i < frozen.alpha.size(); ++i) identical = frozen.alpha[i] == frozen.alpha[3000];
    v.require(identical, "rows after step 3000 bit-identical");

    const auto [free, unused] = run({"--freeze-step", "none"});
    const double moved = (free.alpha.back() - free.alpha.front()).cwiseAbs().maxCoeff();
    v.require(moved > 1e-3, "unfrozen max |delta alpha| = " + f("%.4f", moved) + " (want > 1e-3)");

    const auto [perm, loss_perm] = run({"--freeze-step", "3000", "--permute"});
    const double gap = (loss_perm - loss_true) / loss_perm;
    v.require(gap >= 0.10, "eval loss " + f("%.4f", loss_true) + " vs permuted " + f("%.4f", loss_perm) + ", gap " +
                               f("%.1f", 100 * gap) + "% (want >= 10%)");
    return v;
}

template <class F>
bool throws_code(F&& fn, TedhErrc want) {
    try {
        fn();
    } catch (const TedhError& e) {
        return e.code() == want;
    } catch (...) {
        return false;
    }
    return false;
}

Verdict format_conformance() {
    Verdict v;
    std::mt19937_64 rng(8);
    int exact = 0;
    for (int k = 0; k < 200; ++k) {
        auto h = testutil::random_states(rng, 6, 20, 16);
        h.meta = {{"text_hash", hex64(rng())}};
        const auto path = out_root() / "rt.tedh";
        write_tedh(h, path);
        exact += read_tedh(path) == h && encode_tedh(read_tedh(path)) == encode_tedh(h);
    }
    v.require(exact == 200, std::to_string(exact) + "/200 bit-exact round trips");

    HiddenStates h;
    h.layers = {MatX<float>::Ones(3, 4), MatX<float>::Zero(3, 4)};
    h.mask = {1, 1, 0};
    const auto good = encode_tedh(h);
    auto mutate = [&](auto edit) {
        auto b = good;
        edit(b);
        return b;
    };
    const std::vector<std::pair<TedhErrc, std::vector<std::uint8_t>>> cases = {
        {TedhErrc::bad_magic, mutate([](auto& b) { b[1] = 'x'; })},
        {TedhErrc::unsupported_version, mutate([](auto& b) { b[4] = 7; })},
        {TedhErrc::truncated, mutate([](auto& b) { b.resize(b.size() - 5); })},
        {TedhErrc::length_mismatch, mutate([](auto& b) { b.push_back(1); })},
        {TedhErrc::bad_dtype, mutate([](auto& b) { b[20] = 1; })},
        {TedhErrc::bad_header, mutate([](auto& b) { b[12] = b[13] = b[14] = b[15] = 0; })},
        {TedhErrc::bad_mask, mutate([](auto& b) { b[26] = 5; })},
    };
    int ok = 0;
    for (const auto& [code, bytes] : cases) ok += throws_code([&] { decode_tedh(bytes); }, code);
    v.require(ok == static_cast<int>(cases.size()), std::to_string(ok) + "/" + std::to_string(cases.size()) +
                                                         " corrupted headers give their designated code");

    int crashes = 0;
    for (int k = 0; k < 5000; ++k) {
        auto b = good;
        b.resize(rng() % (good.size() + 8), 0);
        for (int j = 0; j < 3 && !b.empty(); ++j) b[rng() % b.size()] ^= static_cast<std::uint8_t>(rng());
        try {
            decode_tedh(b);
        } catch (const TedhError&) {
        } catch (...) {
            ++crashes;
        }
    }
    v.require(crashes == 0, "5000 fuzzed files, only format errors");
    return v;
}

} // namespace

int main() {
    const std::vector<std::tuple<int, const char*, double, std::function<Verdict()>>> criteria = {
        {1, "pearson reproduction", 1, pearson_tables},
        {2, "gradient suite", 120, gradient_suite},
        {3, "fusion equivalence", 10, fusion_equivalence},
        {4, "end-to-end toy learning", 600, end_to_end},
        {5, "shuffle robustness", 60, shuffle_robustness},
        {6, "stability", 3000, stability},
        {7, "two-step schedule", 900, two_step_schedule},
        {8, "format conformance", 30, format_conformance},
    };
    int failed = 0;
    for (const auto& [id, name, budget, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > budget) v.require(false, "runtime " + f("%.1f", secs) + "s over " + f("%.0f", budget) + "s budget");
        failed += !v.pass;
        std::printf("criterion %d %-24s %s  %.1fs  %s\n", id, name, v.pass ? "PASS" : "FAIL", secs, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
