#pragma once
// Margin-based prediction over per-class layer weights and the continual
// learning metrics computed from it.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "taillight/adaptive_guidance.hpp"
#include "taillight/numerics.hpp"

namespace taillight {

/// Largest minus second-largest value.
double decision_margin(std::span<const double> logits);

struct Prediction {
    ClassId label = 0;         // argmax of the winning row's logits
    ClassId margin_class = 0;  // c*: the class whose alpha row gave the widest margin
    double margin = 0.0;
};

/// Logits under every seen class's alpha row; keep the row with the widest
/// margin (smaller class id on ties) and return its argmax.
Prediction predict_detail(std::span<const double> feature, const LayerFeatures& text, const LayerWeights& weights);
ClassId predict(std::span<const double> feature, const LayerFeatures& text, const LayerWeights& weights);

namespace serial {
std::vector<Prediction> predict_rows(const Matrix& adapted, const LayerFeatures& text, const LayerWeights& weights);
}
namespace parallel {
std::vector<Prediction> predict_rows(const Matrix& adapted, const LayerFeatures& text, const LayerWeights& weights);
}
using parallel::predict_rows;

/// a[t][i] for t >= i, kept as counts so the micro average is exact.
class AccuracyMatrix {
public:
    explicit AccuracyMatrix(std::size_t task_count = 0);

    std::size_t task_count() const noexcept { return correct_.size(); }
    void set(std::size_t after_task, std::size_t task, std::size_t correct, std::size_t total);
    bool has(std::size_t after_task, std::size_t task) const;
    double at(std::size_t after_task, std::size_t task) const;
    std::size_t correct(std::size_t after_task, std::size_t task) const;
    std::size_t total(std::size_t after_task, std::size_t task) const;

    /// Rows of accuracies; entries above the diagonal are absent.
    std::vector<std::vector<double>> rows() const;

private:
    std::vector<std::vector<std::size_t>> correct_;
    std::vector<std::vector<std::size_t>> total_;
};

/// Micro-averaged accuracy over all test samples after the final task.
double a_last(const AccuracyMatrix& m);

/// Mean over i < T of max(0, max_{i <= t < T} a[t][i] - a[T][i]).
double f_avg(const AccuracyMatrix& m);

struct ClassDelta {
    ClassId id = 0;
    std::size_t count = 0;
    bool tail = false;
    double acc = 0.0;
    double delta = 0.0;
};

struct HeadTailBreakdown {
    std::optional<double> head_acc;
    std::optional<double> tail_acc;
    std::optional<double> head_delta;
    std::optional<double> tail_delta;
    std::vector<ClassDelta> classes;
};

/// Tail = train count below threshold. Means are over classes.
HeadTailBreakdown head_tail_breakdown(const std::map<ClassId, double>& accuracy,
                                      const std::map<ClassId, std::size_t>& train_counts,
                                      std::size_t tail_threshold, const std::map<ClassId, double>& baseline);

}  // namespace taillight
