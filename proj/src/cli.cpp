#include "ted/cli.hpp"

#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ted/evaluator.hpp"
#include "ted/stats.hpp"
#include "ted/toy_diffusion.hpp"
#include "ted/toyworld.hpp"

namespace ted {

namespace {

namespace fs = std::filesystem;

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::numeric: return 3;
    case ErrorKind::io:
    case ErrorKind::format:
    case ErrorKind::validation:
    case ErrorKind::argument: return 2;
    case ErrorKind::config:
    case ErrorKind::state: return 1;
    }
    return 1;
}

void error_line(std::ostream& err, std::string_view kind, int code, const std::string& message) {
    nlohmann::json j{{"kind", kind}, {"exit", code}, {"message", message}};
    err << "error: " << j.dump() << '\n';
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hash_file(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << body;
    if (!out) throw IoError("write failed: " + path.string());
}

long parse_freeze_step(const std::string& s) {
    if (s == "none" || s == "inf" || s == "never") return kNeverFreeze;
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("--freeze-step must be a non-negative integer or 'none', got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": '" + item + "' is not a number");
        }
    }
    return out;
}

/// Effective configuration of one command; hashed with the input contents and the
/// code version into the fingerprint that names the run directory.
struct Run {
    std::string command;
    std::map<std::string, std::string> config;
    std::vector<fs::path> inputs;
    std::string fingerprint;
    fs::path dir;

    void open(const fs::path& root) {
        std::string blob = "version=" + std::string(kCodeVersion) + "\ncommand=" + command + "\n";
        for (const auto& [k, v] : config) blob += k + "=" + v + "\n";
        for (const auto& p : inputs) blob += "input=" + hash_file(p) + "\n";
        fingerprint = hex64(fnv1a64(blob));
        dir = root / (command + "-" + fingerprint.substr(0, 12));
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
        write_text(dir / "config.txt", blob + "fingerprint=" + fingerprint + "\n");
    }
};

struct Common {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out = "runs";
    std::string precision = "run";

    void add(CLI::App* app) {
        app->add_option("--seed", seed, "seed for every stochastic choice")->capture_default_str();
        app->add_option("--threads", threads, "worker cap")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--out", out, "root directory for run directories")->capture_default_str();
        app->add_option("--precision", precision, "test = fp64, run = fp32")
            ->capture_default_str()
            ->check(CLI::IsMember({"test", "run"}));
    }
    void record(Run& r) const {
        r.config["seed"] = std::to_string(seed);
        r.config["precision"] = precision;
    }
    bool fp64() const { return precision == "test"; }
};

struct AggregatorFlags {
    double lr = 1e-5;
    int epochs = 1;
    long batch = 32;
    double tau = 0.07;
    std::string freeze_step = "none";
    long heads = 8;
    long blocks = 2;
    long out_dim = 0;
    double init_std = 0;

    void add(CLI::App* app) {
        app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        app->add_option("--epochs", epochs)->capture_default_str();
        app->add_option("--batch", batch, "pairs per batch (last partial batch dropped)")->capture_default_str();
        app->add_option("--tau", tau, "InfoNCE temperature")->capture_default_str();
        app->add_option("--freeze-step", freeze_step, "freeze learnable fusion weights at this step, or 'none'")
            ->capture_default_str();
        app->add_option("--heads", heads, "aggregator attention heads")->capture_default_str();
        app->add_option("--blocks", blocks, "aggregator attention blocks")->capture_default_str();
        app->add_option("--out-dim", out_dim, "embedding size (0 = encoder width)")->capture_default_str();
        app->add_option("--init-std", init_std, "weight init std (0 = 0.02 scaled to the encoder width)")
            ->capture_default_str();
    }
    void record(Run& r) const {
        r.config["lr"] = fmt(lr);
        r.config["epochs"] = std::to_string(epochs);
        r.config["batch"] = std::to_string(batch);
        r.config["tau"] = fmt(tau);
        r.config["freeze_step"] = freeze_step;
        r.config["heads"] = std::to_string(heads);
        r.config["blocks"] = std::to_string(blocks);
        r.config["out_dim"] = std::to_string(out_dim);
        r.config["init_std"] = fmt(init_std);
    }
    TrainConfig config(Index dim, const Common& c) const {
        TrainConfig t;
        t.lr = lr;
        t.epochs = epochs;
        t.batch_size = batch;
        t.tau = tau;
        t.seed = c.seed;
        t.freeze_step = parse_freeze_step(freeze_step);
        t.threads = c.threads;
        t.aggregator.dim = dim;
        t.aggregator.out_dim = out_dim > 0 ? out_dim : dim;
        t.aggregator.heads = heads;
        t.aggregator.blocks = blocks;
        t.aggregator.init_std = init_std > 0 ? init_std : scaled_init_std(dim);
        return t;
    }
};

struct EvalFlags {
    std::string bench, encoder, fusion, ckpt, fusion_weights, similarity = "cosine";
    bool skip_errors = false, allow_mismatch = false;

    void add(CLI::App* app) {
        app->add_option("--bench", bench, "benchmark JSONL")->required();
        app->add_option("--encoder", encoder, "toy:seed=<n>[,...] or tedh:<dir>")->required();
        app->add_option("--fusion", fusion, "last|penult|layer:<i>|avg|norm_avg|learnable")->required();
        app->add_option("--ckpt", ckpt, "aggregator checkpoint")->required();
        app->add_option("--fusion-weights", fusion_weights, "learnable weights (default: fusion.txt beside --ckpt)");
        app->add_option("--similarity", similarity)->capture_default_str()->check(CLI::IsMember({"cosine", "dot"}));
        app->add_flag("--skip-errors", skip_errors, "exclude instances whose texts fail to encode");
        app->add_flag("--allow-mismatch", allow_mismatch, "warn instead of failing on an encoder/fusion mismatch");
    }
    void record(Run& r) const {
        r.config["encoder"] = encoder;
        r.config["fusion"] = fusion;
        r.config["similarity"] = similarity;
        r.config["skip_errors"] = skip_errors ? "1" : "0";
        r.config["allow_mismatch"] = allow_mismatch ? "1" : "0";
        r.inputs = {bench, ckpt};
        if (!fusion_weights.empty()) r.inputs.push_back(fusion_weights);
    }
    EvalOptions options(const Common& c) const {
        return {similarity == "dot" ? SimilarityKind::dot : SimilarityKind::cosine, skip_errors, c.threads};
    }
};

Index encoder_layers(const HiddenStateSource& enc, const std::string& probe, Index* dim = nullptr) {
    const auto h = enc.encode(probe);
    if (dim) *dim = h.dim();
    return h.num_layers();
}

FusionStrategy resolve_fusion(const std::string& name, Index layers, const std::string& weights_path,
                              const std::string& ckpt) {
    auto strategy = parse_fusion(name, layers);
    if (std::holds_alternative<Learnable>(strategy)) {
        fs::path p = weights_path.empty() ? fs::path(ckpt).parent_path() / "fusion.txt" : fs::path(weights_path);
        if (!fs::exists(p)) throw IoError("learnable fusion needs weights; not found: " + p.string());
        auto w = FusionWeights::load(p);
        if (w.size() != layers)
            throw Error(ErrorKind::validation, "fusion weights in " + p.string() + " have " +
                                                   std::to_string(w.size()) + " layers, encoder emits " +
                                                   std::to_string(layers));
        strategy = Learnable{std::move(w)};
    }
    return strategy;
}

struct Loaded {
    std::vector<Ted6kInstance> bench;
    std::unique_ptr<HiddenStateSource> encoder;
    AggregatorCheckpoint ckpt;
    FusionStrategy strategy;
};

Loaded load_for_eval(const EvalFlags& f, std::ostream& err) {
    Loaded l;
    if (!fs::exists(f.ckpt)) throw IoError("checkpoint not found: " + f.ckpt);
    l.bench = load_ted6k(f.bench);
    l.encoder = make_encoder(f.encoder);
    l.ckpt = load_aggregator(f.ckpt);
    l.strategy = resolve_fusion(f.fusion, encoder_layers(*l.encoder, l.bench.front().caption), f.fusion_weights, f.ckpt);
    if (auto m = pairing_mismatch(l.ckpt.meta, l.encoder->id(), to_string(l.strategy))) {
        if (!f.allow_mismatch) throw Error(ErrorKind::validation, "checkpoint pairing mismatch: " + *m);
        err << "warning: checkpoint pairing mismatch: " << *m << '\n';
    }
    return l;
}

Metadata eval_fingerprint(const Loaded& l, const EvalFlags& f, const Run& run) {
    return {{"encoder", l.encoder->id()},
            {"fusion", to_string(l.strategy)},
            {"checkpoint", hash_file(f.ckpt)},
            {"seed", run.config.at("seed")},
            {"fingerprint", run.fingerprint}};
}

// ---------------------------------------------------------------------------

template <class S>
void cmd_train(const Common& c, const std::string& pairs_path, const std::string& enc_uri, const std::string& fusion,
               const AggregatorFlags& a, Run& run, std::ostream& out) {
    const auto pairs = load_pairs(pairs_path);
    const auto encoder = make_encoder(enc_uri);
    Index dim = 0;
    const Index layers = encoder_layers(*encoder, pairs.front().caption_a, &dim);
    const auto strategy = parse_fusion(fusion, layers);
    const auto cfg = a.config(dim, c);
    auto result = train_aggregator<S>(pairs, *encoder, strategy, cfg);

    const Metadata meta{{"encoder", encoder->id()},      {"fusion", to_string(strategy)},
                        {"seed", std::to_string(c.seed)}, {"fingerprint", run.fingerprint},
                        {"precision", c.precision},        {"version", kCodeVersion}};
    save_aggregator(result.params.template cast<float>(), meta, run.dir / "aggregator.bin");
    if (result.fusion) result.fusion->save(run.dir / "fusion.txt");
    result.history.write_tsv(run.dir / "history.tsv");

    const auto& h = result.history;
    std::string summary = "steps " + std::to_string(h.loss.size()) + "\n";
    if (!h.loss.empty()) summary += "first_loss " + fmt(h.loss.front(), "%.6f") + "\nfinal_loss " + fmt(h.loss.back(), "%.6f") + "\n";
    write_text(run.dir / "summary.txt", summary);
    out << "run_dir " << run.dir.string() << '\n' << summary;
}

template <class S>
void cmd_eval(const Common& c, const EvalFlags& f, bool shuffled, Run& run, std::ostream& out, std::ostream& err) {
    const auto l = load_for_eval(f, err);
    TextEmbedder<S> embedder(*l.encoder, l.strategy, l.ckpt.params.template cast<S>());
    const auto fp = eval_fingerprint(l, f, run);
    const auto report = shuffled ? shuffle_baseline<S>(l.bench, embedder, c.seed, f.options(c), fp)
                                 : evaluate<S>(l.bench, embedder, f.options(c), fp);
    report.write(run.dir);
    out << "run_dir " << run.dir.string() << '\n' << "accuracy " << fmt(report.overall_accuracy, "%.2f") << '\n';
}

template <class S>
void cmd_stability(const Common& c, const std::string& pairs_path, const EvalFlags& f,
                   const std::vector<std::string>& fusions, int runs, const AggregatorFlags& a, Run& run,
                   std::ostream& out) {
    if (runs < 2) throw ConfigError("--runs must be at least 2");
    const auto pairs = load_pairs(pairs_path);
    const auto bench = load_ted6k(f.bench);
    const auto encoder = make_encoder(f.encoder);
    Index dim = 0;
    const Index layers = encoder_layers(*encoder, pairs.front().caption_a, &dim);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < runs; ++i) seeds.push_back(c.seed + static_cast<std::uint64_t>(i));

    std::vector<StabilityResult> results;
    std::string tsv = "fusion\tseed\taccuracy\n", summary;
    for (const auto& name : fusions) {
        const auto strategy = parse_fusion(name, layers);
        results.push_back(stability_runs<S>(pairs, bench, *encoder, strategy, a.config(dim, c), seeds, f.options(c)));
        for (std::size_t i = 0; i < seeds.size(); ++i)
            tsv += name + "\t" + std::to_string(seeds[i]) + "\t" + fmt(results.back().scores[i], "%.2f") + "\n";
        summary += "max_variation " + name + " " + fmt(results.back().max_variation, "%.2f") + "\n";
    }
    if (fusions.size() >= 2) {
        std::string first;
        bool consistent = true;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            std::vector<std::size_t> order(fusions.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t x, std::size_t y) { return results[x].scores[i] > results[y].scores[i]; });
            std::string ranking;
            for (std::size_t k = 0; k < order.size(); ++k) {
                if (k) ranking += results[order[k - 1]].scores[i] == results[order[k]].scores[i] ? "=" : ">";
                ranking += fusions[order[k]];
            }
            summary += "ranking seed=" + std::to_string(seeds[i]) + " " + ranking + "\n";
            if (i == 0) first = ranking;
            consistent = consistent && ranking == first;
        }
        summary += std::string("ranking_consistent ") + (consistent ? "1" : "0") + "\n";
    }
    write_text(run.dir / "stability.tsv", tsv);
    write_text(run.dir / "summary.txt", summary);
    out << "run_dir " << run.dir.string() << '\n' << summary;
}

// ---------------------------------------------------------------------------

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Layer-fusion and context-aggregator harness for text-encoder evaluation", "ted"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read flags from an INI/TOML file (flags on the command line win)");
    app.set_version_flag("--version", kCodeVersion);

    Common common;
    AggregatorFlags agg;
    EvalFlags evalf;
    std::string pairs, encoder, fusion, captions, table, xs, ys, fusions = "norm_avg,last";
    int runs = 5;
    ToyDiffusionConfig diff;
    std::string diff_freeze = "3000";
    ToyWorldConfig world;

    auto* train = app.add_subcommand("train", "contrastive training of the context aggregator");
    common.add(train);
    agg.add(train);
    train->add_option("--pairs", pairs, "caption-pair JSONL")->required();
    train->add_option("--encoder", encoder, "toy:seed=<n>[,...] or tedh:<dir>")->required();
    train->add_option("--fusion", fusion, "last|penult|layer:<i>|avg|norm_avg|learnable")->required();

    auto* eval = app.add_subcommand("eval", "score a benchmark; writes report.txt and report.tsv");
    common.add(eval);
    evalf.add(eval);

    auto* shuffle = app.add_subcommand("shuffle", "score with captions deranged against statement sets");
    common.add(shuffle);
    evalf.add(shuffle);

    auto* stability = app.add_subcommand("stability", "train and score once per seed, per fusion strategy");
    common.add(stability);
    agg.add(stability);
    stability->add_option("--pairs", pairs, "caption-pair JSONL")->required();
    stability->add_option("--bench", evalf.bench, "benchmark JSONL")->required();
    stability->add_option("--encoder", evalf.encoder)->required();
    stability->add_option("--fusion", fusions, "comma-separated strategies")->capture_default_str();
    stability->add_option("--runs", runs, "seeds: seed, seed+1, ...")->capture_default_str();
    stability->add_option("--similarity", evalf.similarity)->capture_default_str()->check(CLI::IsMember({"cosine", "dot"}));

    auto* correlate = app.add_subcommand("correlate", "Pearson r with a two-sided p-value");
    common.add(correlate);
    correlate->add_option("--xs", xs, "comma-separated values");
    correlate->add_option("--ys", ys, "comma-separated values");
    correlate->add_option("--table", table, "two whitespace-separated columns per line")->excludes("--xs", "--ys");

    auto* toydiff = app.add_subcommand("toydiff", "toy conditional diffusion with learnable, then frozen, fusion");
    common.add(toydiff);
    toydiff->add_option("--captions", captions, "one caption per line")->required();
    toydiff->add_option("--encoder", encoder)->required();
    toydiff->add_option("--steps", diff.steps)->capture_default_str();
    toydiff->add_option("--freeze-step", diff_freeze, "step at which fusion weights freeze, or 'none'")->capture_default_str();
    toydiff->add_option("--batch", diff.batch)->capture_default_str();
    toydiff->add_option("--lr", diff.lr)->capture_default_str();
    toydiff->add_option("--eval-samples", diff.eval_samples)->capture_default_str();
    toydiff->add_flag("--permute", diff.permute_conditions, "control run: condition on random captions");

    auto* toygen = app.add_subcommand("toygen", "synthetic caption pairs and benchmark");
    common.add(toygen);
    toygen->add_option("--n-pairs", world.pairs)->capture_default_str();
    toygen->add_option("--n-instances", world.instances)->capture_default_str();
    toygen->add_option("--concepts", world.concepts)->capture_default_str();
    toygen->add_option("--synonyms", world.synonyms)->capture_default_str();
    toygen->add_option("--negatives", world.negatives)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::Success&) {
        out << kCodeVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        error_line(err, "usage", 1, e.what());
        return 1;
    }

    Run run;
    run.command = app.get_subcommands().front()->get_name();
    common.record(run);

    if (train->parsed()) {
        agg.record(run);
        run.config["encoder"] = encoder;
        run.config["fusion"] = fusion;
        run.inputs = {pairs};
        run.open(common.out);
        common.fp64() ? cmd_train<double>(common, pairs, encoder, fusion, agg, run, out)
                      : cmd_train<float>(common, pairs, encoder, fusion, agg, run, out);
    } else if (eval->parsed() || shuffle->parsed()) {
        evalf.record(run);
        run.open(common.out);
        const bool shuffled = shuffle->parsed();
        common.fp64() ? cmd_eval<double>(common, evalf, shuffled, run, out, err)
                      : cmd_eval<float>(common, evalf, shuffled, run, out, err);
    } else if (stability->parsed()) {
        agg.record(run);
        run.config["encoder"] = evalf.encoder;
        run.config["fusion"] = fusions;
        run.config["runs"] = std::to_string(runs);
        run.config["similarity"] = evalf.similarity;
        run.inputs = {pairs, evalf.bench};
        run.open(common.out);
        std::vector<std::string> names;
        std::stringstream ss(fusions);
        for (std::string n; std::getline(ss, n, ',');)
            if (!n.empty()) names.push_back(n);
        if (names.empty()) throw ConfigError("--fusion lists no strategies");
        common.fp64() ? cmd_stability<double>(common, pairs, evalf, names, runs, agg, run, out)
                      : cmd_stability<float>(common, pairs, evalf, names, runs, agg, run, out);
    } else if (correlate->parsed()) {
        std::vector<double> x, y;
        if (!table.empty()) {
            std::istringstream in(read_file(table));
            std::string line;
            int lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
                std::istringstream ls(line);
                double a, b;
                if (!(ls >> a >> b)) throw ValidationError("correlate: malformed row", lineno, "");
                x.push_back(a), y.push_back(b);
            }
            run.inputs = {table};
        } else {
            if (xs.empty() || ys.empty()) throw ConfigError("correlate needs --table or both --xs and --ys");
            x = parse_list(xs, "--xs");
            y = parse_list(ys, "--ys");
            run.config["xs"] = xs;
            run.config["ys"] = ys;
        }
        run.open(common.out);
        const auto r = pearson(x, y);
        write_text(run.dir / "correlation.txt", r.to_record());
        out << "run_dir " << run.dir.string() << '\n' << r.to_record();
    } else if (toydiff->parsed()) {
        diff.seed = common.seed;
        diff.freeze_step = parse_freeze_step(diff_freeze);
        diff.threads = common.threads;
        run.config["encoder"] = encoder;
        run.config["steps"] = std::to_string(diff.steps);
        run.config["freeze_step"] = diff_freeze;
        run.config["batch"] = std::to_string(diff.batch);
        run.config["lr"] = fmt(diff.lr);
        run.config["eval_samples"] = std::to_string(diff.eval_samples);
        run.config["permute"] = diff.permute_conditions ? "1" : "0";
        run.inputs = {captions};
        run.open(common.out);
        std::vector<std::string> caps;
        {
            std::istringstream in(read_file(captions));
            for (std::string line; std::getline(in, line);)
                if (line.find_first_not_of(" \t\r") != std::string::npos) caps.push_back(line);
        }
        if (caps.empty()) throw ArgumentError("no captions in " + captions);
        const auto enc = make_encoder(encoder);
        const auto r = train_joint(caps, *enc, FusionWeights(encoder_layers(*enc, caps.front())), diff);
        r.trajectory.write(run.dir / "trajectory.tsv");
        r.fusion.save(run.dir / "fusion.txt");
        save_denoiser(r.denoiser, run.dir / "denoiser.bin");
        std::string loss = "step\tloss\n";
        for (std::size_t i = 0; i < r.loss.size(); ++i) loss += std::to_string(i) + "\t" + fmt(r.loss[i], "%.9g") + "\n";
        write_text(run.dir / "loss.tsv", loss);
        std::string summary = "eval_loss " + fmt(r.eval_loss, "%.6f") + "\nalpha";
        const auto alpha = r.fusion.alphas();
        for (Index i = 0; i < alpha.size(); ++i) summary += " " + fmt(alpha(i), "%.6f");
        summary += "\n";
        write_text(run.dir / "summary.txt", summary);
        out << "run_dir " << run.dir.string() << '\n' << summary;
    } else if (toygen->parsed()) {
        world.seed = common.seed;
        run.config["n_pairs"] = std::to_string(world.pairs);
        run.config["n_instances"] = std::to_string(world.instances);
        run.config["concepts"] = std::to_string(world.concepts);
        run.config["synonyms"] = std::to_string(world.synonyms);
        run.config["negatives"] = std::to_string(world.negatives);
        run.open(common.out);
        const auto w = make_toy_world(world);
        write_pairs(w.pairs, run.dir / "pairs.jsonl");
        write_ted6k(w.bench, run.dir / "bench.jsonl");
        std::string lex = "concept\tsynonyms\n";
        for (std::size_t i = 0; i < w.lexicon.size(); ++i) {
            lex += std::to_string(i) + "\t";
            for (std::size_t j = 0; j < w.lexicon[i].size(); ++j) lex += (j ? "," : "") + w.lexicon[i][j];
            lex += "\n";
        }
        write_text(run.dir / "lexicon.tsv", lex);
        out << "run_dir " << run.dir.string() << '\n'
            << "pairs " << w.pairs.size() << '\n'
            << "instances " << w.bench.size() << '\n';
    }
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(argc, argv, out, err);
    } catch (const Error& e) {
        const int code = exit_code(e.kind());
        error_line(err, to_string(e.kind()), code, e.what());
        return code;
    } catch (const std::bad_alloc&) {
        error_line(err, "resource", 3, "out of memory");
        return 3;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"ted"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace ted
