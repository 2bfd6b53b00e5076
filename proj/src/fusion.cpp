#include "ted/fusion.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ted {

void FusionWeights::set_values(const VecX<double>& w) {
    if (frozen_) throw StateError("fusion weights are frozen");
    if (w.size() != w_.size()) throw ArgumentError("fusion weights: size mismatch");
    require_finite(w, "fusion weights");
    w_ = w;
}

std::span<double> FusionWeights::trainable() {
    if (frozen_) throw StateError("fusion weights are frozen");
    return {w_.data(), static_cast<std::size_t>(w_.size())};
}

void FusionWeights::freeze(long step) {
    if (frozen_) return;
    frozen_ = true;
    step_frozen_at_ = step;
}

void FusionWeights::unfreeze() {
    if (frozen_) throw StateError("fusion weights were frozen at step " + std::to_string(*step_frozen_at_) +
                                  " and cannot be unfrozen");
}

std::string FusionWeights::to_record() const {
    std::string out = "layers " + std::to_string(w_.size()) + "\nw";
    char buf[40];
    for (Index i = 0; i < w_.size(); ++i) {
        std::snprintf(buf, sizeof buf, " %.17g", w_(i));
        out += buf;
    }
    out += "\nfrozen ";
    out += frozen_ ? "1" : "0";
    out += "\nstep_frozen_at ";
    out += step_frozen_at_ ? std::to_string(*step_frozen_at_) : "-";
    out += "\n";
    return out;
}

FusionWeights FusionWeights::from_record(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string key;
    Index layers = -1;
    VecX<double> w;
    std::optional<bool> frozen;
    std::optional<long> at;
    bool have_at = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ls >> key;
        if (key == "layers") {
            ls >> layers;
        } else if (key == "w") {
            if (layers < 0) throw ValidationError("fusion record: 'w' before 'layers'");
            w.resize(layers);
            for (Index i = 0; i < layers; ++i) {
                std::string tok;
                if (!(ls >> tok)) throw ValidationError("fusion record: expected " + std::to_string(layers) + " weights");
                w(i) = std::stod(tok);
            }
        } else if (key == "frozen") {
            int f = -1;
            ls >> f;
            if (f != 0 && f != 1) throw ValidationError("fusion record: frozen must be 0 or 1");
            frozen = f == 1;
        } else if (key == "step_frozen_at") {
            std::string tok;
            ls >> tok;
            have_at = true;
            if (tok != "-") at = std::stol(tok);
        } else {
            throw ValidationError("fusion record: unknown key '" + key + "'");
        }
        if (ls.fail()) throw ValidationError("fusion record: malformed line '" + line + "'");
    }
    if (layers < 1 || w.size() != layers || !frozen || !have_at)
        throw ValidationError("fusion record: missing fields");
    if (*frozen != at.has_value()) throw ValidationError("fusion record: frozen flag and step_frozen_at disagree");
    FusionWeights out(w);
    if (*frozen) out.freeze(*at);
    return out;
}

void FusionWeights::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << to_record();
}

FusionWeights FusionWeights::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_record(ss.str());
}

FusionWeights apply_schedule(FusionWeights weights, long step, long freeze_step) {
    if (step < 0) throw ArgumentError("apply_schedule: negative step");
    if (step >= freeze_step) weights.freeze(step);
    return weights;
}

long default_freeze_step(long total_steps, double fraction) {
    return std::lround(fraction * static_cast<double>(total_steps));
}

FusionStrategy parse_fusion(std::string_view name, Index num_layers) {
    if (name == "last") return SingleLayer{-1};
    if (name == "penult") return SingleLayer{-2};
    if (name == "avg") return Avg{};
    if (name == "norm_avg") return NormAvg{};
    if (name == "learnable") return Learnable{FusionWeights(num_layers)};
    if (name.starts_with("layer:")) {
        const int idx = std::stoi(std::string(name.substr(6)));
        resolve_layer_index(idx, num_layers);
        return SingleLayer{idx};
    }
    throw ArgumentError("unknown fusion strategy '" + std::string(name) + "'");
}

std::string to_string(const FusionStrategy& s) {
    if (const auto* single = std::get_if<SingleLayer>(&s)) {
        if (single->index == -1) return "last";
        if (single->index == -2) return "penult";
        return "layer:" + std::to_string(single->index);
    }
    if (std::holds_alternative<Avg>(s)) return "avg";
    if (std::holds_alternative<NormAvg>(s)) return "norm_avg";
    return "learnable";
}

} // namespace ted
