#include "taillight/evaluation.hpp"

#include <algorithm>

namespace taillight {

double decision_margin(std::span<const double> logits) {
    if (logits.size() < 2) throw Error(ErrorCode::TooFewClasses, "margin needs at least two logits");
    double first = logits[0], second = logits[1];
    if (second > first) std::swap(first, second);
    for (std::size_t i = 2; i < logits.size(); ++i) {
        if (logits[i] > first) {
            second = first;
            first = logits[i];
        } else if (logits[i] > second) {
            second = logits[i];
        }
    }
    return first - second;
}

namespace {

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Prediction predict_one(std::span<const double> feature, const LayerFeatures& text, const LayerWeights& weights,
                       Matrix& per_layer, Vector& logits) {
    const std::size_t classes = text.class_count();
    const std::size_t layers = text.layer_count();
    if (classes == 0) throw Error(ErrorCode::NoClasses, "no seen classes to predict from");
    if (feature.size() != text.dim()) throw Error(ErrorCode::DimensionMismatch, "feature dim != text dim");
    if (weights.layer_count() != layers) throw Error(ErrorCode::DimensionMismatch, "alpha length != layer count");
    if (classes == 1) return Prediction{text.classes[0], text.classes[0], 0.0};

    for (std::size_t l = 0; l < layers; ++l)
        for (std::size_t c = 0; c < classes; ++c) per_layer(l, c) = dot(feature, text.layers[l].row(c));

    Prediction best;
    bool first = true;
    for (ClassId row_class : text.classes) {  // ascending, so strict > keeps the smaller id on ties
        const auto& alpha = weights.row(row_class);
        std::fill(logits.begin(), logits.end(), 0.0);
        for (std::size_t l = 0; l < layers; ++l) {
            if (alpha[l] == 0.0) continue;
            for (std::size_t c = 0; c < classes; ++c) logits[c] += alpha[l] * per_layer(l, c);
        }
        const double m = decision_margin(logits);
        if (first || m > best.margin) {
            best = Prediction{text.classes[argmax(logits)], row_class, m};
            first = false;
        }
    }
    return best;
}

}  // namespace

Prediction predict_detail(std::span<const double> feature, const LayerFeatures& text, const LayerWeights& weights) {
    Matrix per_layer(text.layer_count(), text.class_count());
    Vector logits(text.class_count());
    return predict_one(feature, text, weights, per_layer, logits);
}

ClassId predict(std::span<const double> feature, const LayerFeatures& text, const LayerWeights& weights) {
    return predict_detail(feature, text, weights).label;
}

namespace serial {
std::vector<Prediction> predict_rows(const Matrix& adapted, const LayerFeatures& text, const LayerWeights& weights) {
    std::vector<Prediction> out(adapted.rows());
    Matrix per_layer(text.layer_count(), text.class_count());
    Vector logits(text.class_count());
    for (std::size_t i = 0; i < adapted.rows(); ++i)
        out[i] = predict_one(adapted.row(i), text, weights, per_layer, logits);
    return out;
}
}  // namespace serial

namespace parallel {
std::vector<Prediction> predict_rows(const Matrix& adapted, const LayerFeatures& text, const LayerWeights& weights) {
    if (text.class_count() == 0) throw Error(ErrorCode::NoClasses, "no seen classes to predict from");
    std::vector<Prediction> out(adapted.rows());
    const auto n = static_cast<std::ptrdiff_t>(adapted.rows());
    bool failed = false;
#pragma omp parallel
    {
        Matrix per_layer(text.layer_count(), text.class_count());
        Vector logits(text.class_count());
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            try {
                out[static_cast<std::size_t>(i)] =
                    predict_one(adapted.row(static_cast<std::size_t>(i)), text, weights, per_layer, logits);
            } catch (...) {
#pragma omp atomic write
                failed = true;
            }
        }
    }
    // Rerun serially to surface the original exception.
    if (failed) return serial::predict_rows(adapted, text, weights);
    return out;
}
}  // namespace parallel

AccuracyMatrix::AccuracyMatrix(std::size_t task_count)
    : correct_(task_count, std::vector<std::size_t>(task_count, 0)),
      total_(task_count, std::vector<std::size_t>(task_count, 0)) {}

void AccuracyMatrix::set(std::size_t after_task, std::size_t task, std::size_t correct, std::size_t total) {
    if (after_task >= task_count() || task > after_task)
        throw Error(ErrorCode::ShapeMismatch, "accuracy entry outside the lower triangle");
    if (total == 0 || correct > total) throw Error(ErrorCode::InvalidConfig, "accuracy counts out of range");
    correct_[after_task][task] = correct;
    total_[after_task][task] = total;
}

bool AccuracyMatrix::has(std::size_t after_task, std::size_t task) const {
    return after_task < task_count() && task <= after_task && total_[after_task][task] > 0;
}

double AccuracyMatrix::at(std::size_t after_task, std::size_t task) const {
    if (!has(after_task, task)) throw Error(ErrorCode::IncompleteMatrix, "accuracy entry missing");
    return static_cast<double>(correct_[after_task][task]) / static_cast<double>(total_[after_task][task]);
}

std::size_t AccuracyMatrix::correct(std::size_t after_task, std::size_t task) const {
    if (!has(after_task, task)) throw Error(ErrorCode::IncompleteMatrix, "accuracy entry missing");
    return correct_[after_task][task];
}

std::size_t AccuracyMatrix::total(std::size_t after_task, std::size_t task) const {
    if (!has(after_task, task)) throw Error(ErrorCode::IncompleteMatrix, "accuracy entry missing");
    return total_[after_task][task];
}

std::vector<std::vector<double>> AccuracyMatrix::rows() const {
    std::vector<std::vector<double>> out(task_count());
    for (std::size_t t = 0; t < task_count(); ++t)
        for (std::size_t i = 0; i <= t; ++i)
            if (has(t, i)) out[t].push_back(at(t, i));
    return out;
}

double a_last(const AccuracyMatrix& m) {
    if (m.task_count() == 0) throw Error(ErrorCode::IncompleteMatrix, "empty accuracy matrix");
    const std::size_t last = m.task_count() - 1;
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i <= last; ++i) {
        if (!m.has(last, i)) throw Error(ErrorCode::IncompleteMatrix, "final row incomplete");
        correct += m.correct(last, i);
        total += m.total(last, i);
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

double f_avg(const AccuracyMatrix& m) {
    if (m.task_count() < 2) throw Error(ErrorCode::SingleTask, "forgetting needs at least two tasks");
    const std::size_t last = m.task_count() - 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < last; ++i) {
        double best = m.at(i, i);
        for (std::size_t t = i + 1; t < last; ++t) best = std::max(best, m.at(t, i));
        sum += std::max(0.0, best - m.at(last, i));
    }
    return sum / static_cast<double>(last);
}

HeadTailBreakdown head_tail_breakdown(const std::map<ClassId, double>& accuracy,
                                      const std::map<ClassId, std::size_t>& train_counts,
                                      std::size_t tail_threshold, const std::map<ClassId, double>& baseline) {
    HeadTailBreakdown out;
    double head = 0.0, tail = 0.0, head_d = 0.0, tail_d = 0.0;
    std::size_t n_head = 0, n_tail = 0;
    for (const auto& [id, acc] : accuracy) {
        auto cnt = train_counts.find(id);
        if (cnt == train_counts.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no count");
        auto base = baseline.find(id);
        if (base == baseline.end())
            throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " missing from baseline");
        ClassDelta cd{id, cnt->second, cnt->second < tail_threshold, acc, acc - base->second};
        if (cd.tail) {
            tail += acc;
            tail_d += cd.delta;
            ++n_tail;
        } else {
            head += acc;
            head_d += cd.delta;
            ++n_head;
        }
        out.classes.push_back(cd);
    }
    if (n_head) {
        out.head_acc = head / static_cast<double>(n_head);
        out.head_delta = head_d / static_cast<double>(n_head);
    }
    if (n_tail) {
        out.tail_acc = tail / static_cast<double>(n_tail);
        out.tail_delta = tail_d / static_cast<double>(n_tail);
    }
    return out;
}

}  // namespace taillight
