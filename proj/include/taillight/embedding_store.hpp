#pragma once
// Frozen-embedding persistence: per-class f32le matrices described by a JSON
// manifest, a text-embedding store keyed by normalized phrase, and the
// synthetic/long-tail generators used for desk-scale experiments.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "taillight/numerics.hpp"

namespace taillight {

namespace fs = std::filesystem;

struct ClassRecord {
    ClassId id = 0;
    std::string label;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::string train_file;
    std::string test_file;

    friend bool operator==(const ClassRecord&, const ClassRecord&) = default;
};

/// Per-class visual features, stored exactly as read from disk (float32).
struct ClassMatrices {
    std::vector<float> train;
    std::vector<float> test;

    friend bool operator==(const ClassMatrices&, const ClassMatrices&) = default;
};

struct EmbeddingBundle {
    std::size_t dim = 0;
    bool normalized = false;
    std::vector<ClassRecord> classes;
    std::vector<ClassMatrices> data;  // indexed by class id

    std::size_t class_count() const noexcept { return classes.size(); }
    const ClassRecord& record(ClassId id) const;
    Matrix train_features(ClassId id) const;
    Matrix test_features(ClassId id) const;

    /// Throws on any violated manifest invariant.
    void validate() const;

    friend bool operator==(const EmbeddingBundle&, const EmbeddingBundle&) = default;
};

void save_bundle(const EmbeddingBundle& bundle, const fs::path& directory);
EmbeddingBundle load_bundle(const fs::path& directory);

/// Trim surrounding whitespace and apply Unicode NFC.
std::string normalize_text(std::string_view text);

/// Exact-match phrase -> vector map (keys are normalized on insert and lookup).
class TextEmbeddingStore {
public:
    TextEmbeddingStore() = default;
    explicit TextEmbeddingStore(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(std::string_view text) const;

    void insert(std::string_view text, Vector vector);
    const Vector& lookup(std::string_view text) const;

    const std::map<std::string, Vector>& entries() const noexcept { return entries_; }

    static TextEmbeddingStore load_jsonl(const fs::path& path);
    void save_jsonl(const fs::path& path) const;

private:
    std::size_t dim_ = 0;
    std::map<std::string, Vector> entries_;
};

/// Free-function form of TextEmbeddingStore::lookup.
const Vector& lookup_text(const TextEmbeddingStore& store, std::string_view text);

/// DimMismatch unless the bundle and the store agree on dimension.
void check_joinable(const EmbeddingBundle& bundle, const TextEmbeddingStore& store);

/// Stands in for the frozen text encoder E_t.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual std::size_t dim() const = 0;
    virtual Vector encode(std::string_view text) const = 0;
};

class StoreTextEncoder final : public TextEncoder {
public:
    explicit StoreTextEncoder(const TextEmbeddingStore& store) : store_(&store) {}
    std::size_t dim() const override { return store_->dim(); }
    Vector encode(std::string_view text) const override { return store_->lookup(text); }

private:
    const TextEmbeddingStore* store_;
};

/// Deterministic unit vector derived from a hash of the normalized text.
Vector pseudo_text_encoder(std::string_view text, std::size_t dim, std::uint64_t seed);

class PseudoTextEncoder final : public TextEncoder {
public:
    PseudoTextEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
    std::size_t dim() const override { return dim_; }
    Vector encode(std::string_view text) const override {
        return pseudo_text_encoder(text, dim_, seed_);
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// n_c = round(n_max * rho^(c/(C-1))), clamped to >= 1.
std::vector<std::size_t> make_longtail_counts(std::size_t n_max, double rho, std::size_t class_count);

struct SyntheticSpec {
    std::size_t class_count = 0;
    std::size_t dim = 0;
    std::vector<std::size_t> train_counts;
    std::size_t test_count = 0;
    double separation = 0.3;  // max pairwise cosine between class means
    double noise = 0.1;       // per-coordinate standard deviation
    std::uint64_t seed = 0;
};

struct SyntheticData {
    EmbeddingBundle bundle;
    Matrix class_means;                // class_count x dim, unit rows
    std::vector<ClassId> test_labels;  // ground truth in bundle test order
};

SyntheticData generate_synthetic_bundle(const SyntheticSpec& spec);

struct TaskSplit {
    std::vector<std::vector<ClassId>> tasks;

    std::size_t task_count() const noexcept { return tasks.size(); }
    std::size_t task_of(ClassId id) const;
    void validate(std::size_t class_count) const;
};

/// Seeded shuffle then contiguous partition; the last task takes any remainder.
TaskSplit make_task_split(std::span<const ClassId> class_ids, std::size_t task_count, std::uint64_t seed);

/// Stack the listed classes' rows; labels follow the same order.
struct LabeledFeatures {
    Matrix features;
    std::vector<ClassId> labels;
};
LabeledFeatures stack_train(const EmbeddingBundle& bundle, std::span<const ClassId> classes);
LabeledFeatures stack_test(const EmbeddingBundle& bundle, std::span<const ClassId> classes);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 1469598103934665603ULL);

}  // namespace taillight
