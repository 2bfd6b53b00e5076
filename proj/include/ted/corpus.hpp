#pragma once

// Line-delimited JSON corpora: TED-6K style benchmark instances and caption pairs.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ted {

enum class Category {
    quantity,
    adjective,
    coreference,
    basic_event,
    adverb,
    spatial_relationship,
    ocr,
    temporal_relationship,
    action,
};

inline constexpr std::array<Category, 9> kAllCategories = {
    Category::quantity,    Category::adjective,            Category::coreference,
    Category::basic_event, Category::adverb,               Category::spatial_relationship,
    Category::ocr,         Category::temporal_relationship, Category::action,
};

std::string_view to_string(Category c) noexcept;

/// Accepts the canonical names plus spaced/plural spellings ("spatial relationship", "adjectives").
std::optional<Category> parse_category(std::string_view name);

struct Ted6kInstance {
    std::string id;
    std::string caption;
    std::string positive;
    std::vector<std::string> negatives;
    Category category = Category::action;
};

struct CaptionPair {
    std::string id;
    std::string caption_a;
    std::string caption_b;
    std::string source;
};

/// Field names used in the benchmark file. Released dumps may use other names;
/// load a mapping with `from_file` rather than renaming the data.
struct Ted6kFields {
    std::string id = "id";
    std::string caption = "caption";
    std::string positive = "positive";
    std::string negatives = "negatives";
    std::string category = "category";

    /// key=value lines, e.g. "positive=pos_statement".
    static Ted6kFields from_file(const std::filesystem::path& path);
};

struct PairFields {
    std::string id = "id";
    std::string caption_a = "caption_a";
    std::string caption_b = "caption_b";
    std::string source = "source";

    static PairFields from_file(const std::filesystem::path& path);
};

void validate(const Ted6kInstance& inst);
void validate(const CaptionPair& pair);

std::vector<Ted6kInstance> parse_ted6k(std::istream& in, const Ted6kFields& fields = {});
std::vector<Ted6kInstance> load_ted6k(const std::filesystem::path& path, const Ted6kFields& fields = {});
void write_ted6k(const std::vector<Ted6kInstance>& bench, const std::filesystem::path& path);

std::vector<CaptionPair> parse_pairs(std::istream& in, const PairFields& fields = {});
std::vector<CaptionPair> load_pairs(const std::filesystem::path& path, const PairFields& fields = {});
void write_pairs(const std::vector<CaptionPair>& pairs, const std::filesystem::path& path);

} // namespace ted
