#include "ted/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <map>

namespace ted {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 2) throw ConfigError("batch size must be at least 2 for a contrastive loss");
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    if (freeze_step < 0) throw ConfigError("freeze_step must be non-negative");
    aggregator.validate();
}

std::vector<double> TrainHistory::epoch_mean_losses() const {
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < loss.size(); ++i) {
        acc[epoch[i]].first += loss[i];
        acc[epoch[i]].second += 1;
    }
    std::vector<double> out;
    for (const auto& [e, s] : acc) out.push_back(s.first / s.second);
    return out;
}

void TrainHistory::write_tsv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const Index layers = alpha.empty() ? 0 : alpha.front().size();
    out << "step\tepoch\tloss";
    for (Index i = 0; i < layers; ++i) out << "\talpha_" << (i + 1);
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < loss.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.9g", loss[r]);
        out << step[r] << '\t' << epoch[r] << '\t' << buf;
        for (Index i = 0; i < alpha[r].size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", alpha[r](i));
            out << '\t' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace ted
