#pragma once
// Gaussian class statistics for replay, balanced batches, batch similarity
// matrices in the visual and semantic spaces, and the alignment/distillation
// losses built on them.

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "taillight/adapter.hpp"
#include "taillight/adaptive_guidance.hpp"
#include "taillight/numerics.hpp"

namespace taillight {

inline constexpr double kShrinkage = 1e-4;

struct ClassStatistics {
    ClassId id = 0;
    Vector mean;
    CovarianceFactor factor;
    std::size_t count = 0;
};

/// Unbiased sample covariance (1/(n-1)) (X - mean)^T (X - mean); zero for n = 1.
Matrix sample_covariance(const Matrix& features, std::span<const double> mean);

/// Mean, covariance shrunk by beta * trace/d (or beta when that is zero), and its Cholesky factor.
ClassStatistics update_statistics(ClassId id, const Matrix& features, double beta = kShrinkage);

class MemoryBank {
public:
    bool empty() const noexcept { return stats_.empty(); }
    std::size_t size() const noexcept { return stats_.size(); }
    bool contains(ClassId id) const { return stats_.count(id) > 0; }
    const ClassStatistics& at(ClassId id) const;
    const std::map<ClassId, ClassStatistics>& entries() const noexcept { return stats_; }

    void store(ClassStatistics stats);

    /// memory.bin (per class: mean then lower factor, f32le) + memory.json index.
    void save(const std::filesystem::path& directory) const;
    static MemoryBank load(const std::filesystem::path& directory);

private:
    std::map<ClassId, ClassStatistics> stats_;
};

struct BalancedBatch {
    Matrix features;              // raw features: original rows first, then replay
    std::vector<ClassId> labels;
    std::vector<bool> synthetic;
    std::size_t original_count = 0;
    std::size_t replay_per_class = 0;  // r

    std::size_t size() const noexcept { return labels.size(); }
};

BalancedBatch plain_batch(const Matrix& features, std::span<const ClassId> labels);

/// Append r rows per remembered class, r = most frequent label count in the batch
/// (optionally capped; 0 means no cap).
BalancedBatch build_balanced_batch(const Matrix& features, std::span<const ClassId> labels,
                                   const MemoryBank& memory, Rng& rng, std::size_t replay_cap = 0);

/// Psi(f(B)) Psi(f(B))^T on already-adapted rows.
Matrix visual_similarity(const Matrix& adapted);

/// Cosine similarity of the alpha-fused text vectors of each row's class.
Matrix semantic_similarity(std::span<const ClassId> labels, const LayerFeatures& text,
                           const LayerWeights& weights);

/// Row-softmax both matrices at the shared temperature, then the symmetric KL.
double alignment_loss(const Matrix& s_visual, const Matrix& s_semantic, double temperature);

/// mean_i ||f_old(x_i) - f_new(x_i)||; zero without an old adapter.
double distillation_loss(const Adapter* old_adapter, const Adapter& new_adapter, const Matrix& features);

}  // namespace taillight
