#ifndef SARTRACK_IDENTITY_HPP
#define SARTRACK_IDENTITY_HPP

// Face identity: 128-d embeddings, a labeled template registry and
// nearest-template matching under a strict Euclidean threshold.

#include "sartrack/errors.hpp"
#include "sartrack/geometry.hpp"
#include "sartrack/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace sartrack::identity {

/// Two embeddings belong to the same person when their distance is strictly below this.
inline constexpr double match_threshold = 0.6;

class Embedding {
public:
    Embedding() = default;

    explicit Embedding(const EmbeddingValues& values) : values_(values)
    {
        for (double x : values_) {
            if (!std::isfinite(x)) {
                throw Error("embedding components must be finite");
            }
        }
    }

    static Embedding from(std::span<const double> values)
    {
        if (values.size() != embedding_dim) {
            throw Error("embedding must have 128 components, got " + std::to_string(values.size()));
        }
        EmbeddingValues v{};
        std::copy(values.begin(), values.end(), v.begin());
        return Embedding(v);
    }

    const EmbeddingValues& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const Embedding&) const = default;

private:
    EmbeddingValues values_{};
};

inline double euclidean_distance(const Embedding& a, const Embedding& b)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < embedding_dim; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

struct Template {
    std::string label;
    Embedding embedding;
    double captured_at = 0.0;
};

struct MatchResult {
    std::string label;
    double distance = 0.0;
    bool matched = false;
};

/// Nearest template by Euclidean distance; ties go to the earliest capture.
/// Empty for an empty registry.
inline std::optional<MatchResult> match(const Embedding& query, std::span<const Template> templates)
{
    const Template* best = nullptr;
    double best_distance = 0.0;
    for (const auto& t : templates) {
        const double d = euclidean_distance(query, t.embedding);
        if (best == nullptr || d < best_distance || (d == best_distance && t.captured_at < best->captured_at)) {
            best = &t;
            best_distance = d;
        }
    }
    if (best == nullptr) {
        return std::nullopt;
    }
    return MatchResult{best->label, best_distance, best_distance < match_threshold};
}

/// Labeled templates, unique by label.
class Registry {
public:
    Registry() = default;
    explicit Registry(std::vector<Template> templates)
    {
        for (auto& t : templates) {
            capture(std::move(t.label), t.embedding, t.captured_at);
        }
    }

    /// Stores a template, replacing any existing one with the same label.
    void capture(std::string label, const Embedding& embedding, double captured_at)
    {
        if (label.empty()) {
            throw Error("template label must be non-empty");
        }
        if (label.find_first_of(",\n\r#") != std::string::npos) {
            throw Error("template label must not contain ',', '#' or line breaks");
        }
        for (auto& t : templates_) {
            if (t.label == label) {
                t.embedding = embedding;
                t.captured_at = captured_at;
                return;
            }
        }
        templates_.push_back({std::move(label), embedding, captured_at});
    }

    std::optional<MatchResult> match(const Embedding& query) const { return identity::match(query, templates_); }

    const Template* find(const std::string& label) const
    {
        for (const auto& t : templates_) {
            if (t.label == label) {
                return &t;
            }
        }
        return nullptr;
    }

    std::span<const Template> templates() const { return templates_; }
    std::size_t size() const { return templates_.size(); }
    bool empty() const { return templates_.empty(); }

private:
    std::vector<Template> templates_;
};

inline constexpr std::string_view registry_header = "# sartrack-registry v1";

/// One line per template: label, 128 components, capture time; all comma separated.
inline std::string format_registry(const Registry& registry)
{
    std::string out(registry_header);
    out += '\n';
    for (const auto& t : registry.templates()) {
        out += t.label;
        for (double x : t.embedding.values()) {
            out += ',';
            out += io::exact(x);
        }
        out += ',';
        out += io::exact(t.captured_at);
        out += '\n';
    }
    return out;
}

inline Registry parse_registry(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line) || line != registry_header) {
        throw ParseError(1, "expected header '" + std::string(registry_header) + "'");
    }
    ++lineno;

    auto parse_number = [](std::string_view field, std::size_t ln) {
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
            throw ParseError(ln, "invalid number '" + std::string(field) + "'");
        }
        return value;
    };

    Registry registry;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != embedding_dim + 2) {
            throw ParseError(lineno, "expected label, 128 components and a timestamp (" +
                                         std::to_string(embedding_dim + 2) + " fields), got " +
                                         std::to_string(fields.size()));
        }
        EmbeddingValues values{};
        for (std::size_t i = 0; i < embedding_dim; ++i) {
            values[i] = parse_number(fields[i + 1], lineno);
        }
        const std::string label(fields.front());
        if (label.empty()) {
            throw ParseError(lineno, "empty label");
        }
        if (registry.find(label) != nullptr) {
            throw ParseError(lineno, "duplicate label '" + label + "'");
        }
        registry.capture(label, Embedding(values), parse_number(fields.back(), lineno));
    }
    return registry;
}

inline void save_registry(const std::filesystem::path& path, const Registry& registry)
{
    io::write_file_atomic(path, format_registry(registry));
}

inline Registry load_registry(const std::filesystem::path& path) { return parse_registry(io::read_file(path)); }

} // namespace sartrack::identity

#endif // SARTRACK_IDENTITY_HPP
