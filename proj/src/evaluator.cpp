#include "ted/evaluator.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ted {

EvalReport summarize(const std::vector<Ted6kInstance>& bench, const std::vector<InstanceScore>& scores,
                     Metadata fingerprint) {
    if (bench.size() != scores.size()) throw ArgumentError("summarize: one score per instance is required");
    EvalReport r;
    r.fingerprint = std::move(fingerprint);
    r.n_instances = bench.size();
    for (std::size_t i = 0; i < bench.size(); ++i) {
        auto& c = r.per_category[bench[i].category];
        ++c.count;
        if (scores[i].correct) ++c.correct, ++r.n_correct;
    }
    r.overall_accuracy =
        r.n_instances ? 100.0 * static_cast<double>(r.n_correct) / static_cast<double>(r.n_instances) : 0.0;
    return r;
}

namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

std::string EvalReport::to_text() const {
    std::ostringstream out;
    out << "overall accuracy: " << fmt2(overall_accuracy) << "% (" << n_correct << "/" << n_instances << ")\n";
    if (!excluded.empty()) out << "excluded after encoding errors: " << excluded.size() << "\n";
    out << "\nper category:\n";
    for (Category c : kAllCategories) {
        auto it = per_category.find(c);
        if (it == per_category.end()) continue;
        char line[96];
        std::snprintf(line, sizeof line, "  %-24s %7s%%  (n=%zu)\n", std::string(to_string(c)).c_str(),
                      fmt2(it->second.accuracy()).c_str(), it->second.count);
        out << line;
    }
    if (!fingerprint.empty()) {
        out << "\nfingerprint:\n";
        for (const auto& [k, v] : fingerprint) out << "  " << k << " = " << v << "\n";
    }
    return out.str();
}

std::string EvalReport::to_tsv() const {
    std::ostringstream out;
    out << "category\tn\taccuracy\n";
    for (Category c : kAllCategories) {
        auto it = per_category.find(c);
        if (it == per_category.end()) continue;
        out << to_string(c) << '\t' << it->second.count << '\t' << fmt2(it->second.accuracy()) << '\n';
    }
    out << "overall\t" << n_instances << '\t' << fmt2(overall_accuracy) << '\n';
    return out.str();
}

void EvalReport::write(const std::filesystem::path& dir) const {
    for (const auto& [name, body] : {std::pair{"report.txt", to_text()}, std::pair{"report.tsv", to_tsv()}}) {
        std::ofstream out(dir / name, std::ios::trunc);
        if (!out) throw IoError("cannot open " + (dir / name).string() + " for writing");
        out << body;
        if (!out) throw IoError("write failed: " + (dir / name).string());
    }
}

std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ArgumentError("derangement: at least two elements are required");
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    auto rng = make_rng(seed, 0x736875);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(p[i], p[pick(rng)]);
    }
    return p;
}

std::optional<std::string> pairing_mismatch(const Metadata& meta, const std::string& encoder_id,
                                            const std::string& fusion_name) {
    std::string msg;
    auto check = [&](const char* key, const std::string& want) {
        auto it = meta.find(key);
        if (it == meta.end())
            msg += std::string(msg.empty() ? "" : "; ") + "checkpoint has no " + key;
        else if (it->second != want)
            msg += std::string(msg.empty() ? "" : "; ") + "checkpoint " + key + "=" + it->second + ", run uses " + want;
    };
    check("encoder", encoder_id);
    check("fusion", fusion_name);
    if (msg.empty()) return std::nullopt;
    return msg;
}

} // namespace ted
