#include "ted/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

#include "ted/error.hpp"

namespace ted {

namespace {

using nlohmann::json;

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open field mapping " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("field mapping line is not key=value: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

void assign_known(std::map<std::string, std::string>& kv, std::string& slot, const std::string& key) {
    if (auto it = kv.find(key); it != kv.end()) {
        slot = it->second;
        kv.erase(it);
    }
}

std::string string_field(const json& rec, const std::string& name, std::size_t line, const std::string& id) {
    auto it = rec.find(name);
    if (it == rec.end() || !it->is_string())
        throw ValidationError("line " + std::to_string(line) + ": missing string field '" + name + "'", line, id);
    return it->get<std::string>();
}

template <class Record, class ParseFn>
std::vector<Record> parse_lines(std::istream& in, const char* what, ParseFn&& parse) {
    std::vector<Record> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": malformed record: " + e.what(), lineno);
        }
        if (!rec.is_object())
            throw ValidationError("line " + std::to_string(lineno) + ": record is not an object", lineno);
        Record r = parse(rec, lineno);
        try {
            validate(r);
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno) + " (id " + r.id + "): " + e.what(), lineno, r.id);
        }
        if (!ids.insert(r.id).second)
            throw ValidationError("line " + std::to_string(lineno) + ": duplicate id '" + r.id + "'", lineno, r.id);
        out.push_back(std::move(r));
    }
    if (out.empty()) throw ArgumentError(std::string(what) + ": no records");
    return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

void write_lines(const std::vector<json>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

std::string_view to_string(Category c) noexcept {
    switch (c) {
    case Category::quantity: return "quantity";
    case Category::adjective: return "adjective";
    case Category::coreference: return "coreference";
    case Category::basic_event: return "basic_event";
    case Category::adverb: return "adverb";
    case Category::spatial_relationship: return "spatial_relationship";
    case Category::ocr: return "ocr";
    case Category::temporal_relationship: return "temporal_relationship";
    case Category::action: return "action";
    }
    return "unknown";
}

std::optional<Category> parse_category(std::string_view name) {
    std::string norm;
    for (char c : name) {
        if (c == ' ' || c == '-') c = '_';
        norm += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (norm == "adjectives") norm = "adjective";
    if (norm == "adverbs") norm = "adverb";
    if (norm == "actions") norm = "action";
    for (auto c : kAllCategories)
        if (to_string(c) == norm) return c;
    return std::nullopt;
}

Ted6kFields Ted6kFields::from_file(const std::filesystem::path& path) {
    auto kv = read_key_values(path);
    Ted6kFields f;
    assign_known(kv, f.id, "id");
    assign_known(kv, f.caption, "caption");
    assign_known(kv, f.positive, "positive");
    assign_known(kv, f.negatives, "negatives");
    assign_known(kv, f.category, "category");
    if (!kv.empty()) throw ValidationError("unknown field mapping key '" + kv.begin()->first + "'");
    return f;
}

PairFields PairFields::from_file(const std::filesystem::path& path) {
    auto kv = read_key_values(path);
    PairFields f;
    assign_known(kv, f.id, "id");
    assign_known(kv, f.caption_a, "caption_a");
    assign_known(kv, f.caption_b, "caption_b");
    assign_known(kv, f.source, "source");
    if (!kv.empty()) throw ValidationError("unknown field mapping key '" + kv.begin()->first + "'");
    return f;
}

void validate(const Ted6kInstance& inst) {
    if (inst.id.empty()) throw ValidationError("empty id");
    if (inst.caption.empty()) throw ValidationError("empty caption", 0, inst.id);
    if (inst.positive.empty()) throw ValidationError("empty positive statement", 0, inst.id);
    if (inst.negatives.empty()) throw ValidationError("no negative statements", 0, inst.id);
    for (const auto& n : inst.negatives) {
        if (n.empty()) throw ValidationError("empty negative statement", 0, inst.id);
        if (n == inst.positive) throw ValidationError("positive statement also listed as a negative", 0, inst.id);
    }
}

void validate(const CaptionPair& pair) {
    if (pair.id.empty()) throw ValidationError("empty id");
    if (pair.caption_a.empty() || pair.caption_b.empty()) throw ValidationError("empty caption", 0, pair.id);
    if (pair.caption_a == pair.caption_b) throw ValidationError("caption_a equals caption_b", 0, pair.id);
    if (pair.source.empty()) throw ValidationError("empty source id", 0, pair.id);
}

std::vector<Ted6kInstance> parse_ted6k(std::istream& in, const Ted6kFields& f) {
    return parse_lines<Ted6kInstance>(in, "benchmark", [&](const json& rec, std::size_t line) {
        Ted6kInstance inst;
        inst.id = string_field(rec, f.id, line, {});
        inst.caption = string_field(rec, f.caption, line, inst.id);
        inst.positive = string_field(rec, f.positive, line, inst.id);
        auto negs = rec.find(f.negatives);
        if (negs == rec.end() || !negs->is_array())
            throw ValidationError("line " + std::to_string(line) + ": field '" + f.negatives + "' must be an array",
                                  line, inst.id);
        for (const auto& n : *negs) {
            if (!n.is_string())
                throw ValidationError("line " + std::to_string(line) + ": negative statement is not a string", line,
                                      inst.id);
            inst.negatives.push_back(n.get<std::string>());
        }
        const auto cat = string_field(rec, f.category, line, inst.id);
        auto parsed = parse_category(cat);
        if (!parsed)
            throw ValidationError("line " + std::to_string(line) + " (id " + inst.id + "): unknown category '" + cat +
                                      "'",
                                  line, inst.id);
        inst.category = *parsed;
        return inst;
    });
}

std::vector<Ted6kInstance> load_ted6k(const std::filesystem::path& path, const Ted6kFields& fields) {
    auto in = open_or_throw(path);
    return parse_ted6k(in, fields);
}

void write_ted6k(const std::vector<Ted6kInstance>& bench, const std::filesystem::path& path) {
    std::vector<json> recs;
    for (const auto& b : bench)
        recs.push_back(json{{"id", b.id},
                            {"caption", b.caption},
                            {"positive", b.positive},
                            {"negatives", b.negatives},
                            {"category", std::string(to_string(b.category))}});
    write_lines(recs, path);
}

std::vector<CaptionPair> parse_pairs(std::istream& in, const PairFields& f) {
    return parse_lines<CaptionPair>(in, "pairs", [&](const json& rec, std::size_t line) {
        CaptionPair p;
        p.id = string_field(rec, f.id, line, {});
        p.caption_a = string_field(rec, f.caption_a, line, p.id);
        p.caption_b = string_field(rec, f.caption_b, line, p.id);
        p.source = string_field(rec, f.source, line, p.id);
        return p;
    });
}

std::vector<CaptionPair> load_pairs(const std::filesystem::path& path, const PairFields& fields) {
    auto in = open_or_throw(path);
    return parse_pairs(in, fields);
}

void write_pairs(const std::vector<CaptionPair>& pairs, const std::filesystem::path& path) {
    std::vector<json> recs;
    for (const auto& p : pairs)
        recs.push_back(json{{"id", p.id}, {"caption_a", p.caption_a}, {"caption_b", p.caption_b}, {"source", p.source}});
    write_lines(recs, path);
}

} // namespace ted
