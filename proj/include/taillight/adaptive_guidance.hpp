#pragma once
// Per-class layer weights over the SL-Tree: logit aggregation, the entropy and
// frequency-prior regularizers, and projected-gradient updates on the simplex.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "taillight/numerics.hpp"
#include "taillight/sltree.hpp"

namespace taillight {

inline constexpr double kWeightEpsilon = 1e-8;

/// Text features g^l_c for a fixed, sorted set of classes.
struct LayerFeatures {
    std::vector<ClassId> classes;
    std::vector<Matrix> layers;  // layer_count x (class_count x dim)

    std::size_t layer_count() const noexcept { return layers.size(); }
    std::size_t class_count() const noexcept { return classes.size(); }
    std::size_t dim() const noexcept { return layers.empty() ? 0 : layers.front().cols(); }
    std::size_t index_of(ClassId id) const;

    /// sum_l alpha_l g^l_c for one class.
    Vector fused(ClassId id, std::span<const double> alpha) const;
    /// sum_l alpha_l g^l for every class (class_count x dim).
    Matrix fused_all(std::span<const double> alpha) const;
};

LayerFeatures make_layer_features(const SLTree& tree, std::span<const ClassId> classes,
                                  const TextEncoder& encoder);

class LayerWeights {
public:
    LayerWeights() = default;
    explicit LayerWeights(std::size_t layer_count) : layer_count_(layer_count) {}

    std::size_t layer_count() const noexcept { return layer_count_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool contains(ClassId id) const { return rows_.count(id) > 0; }
    std::vector<ClassId> classes() const;

    /// Zero-pads every row; rows stay on the simplex.
    void resize_layers(std::size_t layer_count);

    void add_class(ClassId id, std::size_t task, Vector row);
    void add_uniform(ClassId id, std::size_t task);

    const Vector& row(ClassId id) const;
    void set_row(ClassId id, Vector row);
    /// Skips the simplex and frozen checks; derivative probes step off the simplex.
    void set_row_unchecked(ClassId id, Vector row);

    std::size_t task_of(ClassId id) const;
    void freeze(ClassId id) { frozen_.insert(id); }
    bool frozen(ClassId id) const { return frozen_.count(id) > 0; }

    std::string to_json() const;
    static LayerWeights from_json(std::string_view text);

    friend bool operator==(const LayerWeights&, const LayerWeights&) = default;

private:
    std::size_t layer_count_ = 0;
    std::map<ClassId, Vector> rows_;
    std::map<ClassId, std::size_t> tasks_;
    std::set<ClassId> frozen_;
};

/// logits[i] = sum_l w_l (feature . g^l_i), in LayerFeatures class order.
Vector aggregate_logits(std::span<const double> feature, const LayerFeatures& text,
                        std::span<const double> weights);

struct RegularizerValue {
    double value = 0.0;
    Vector gradient;
};

/// sum_l w_l log(w_l + eps) and its gradient.
RegularizerValue entropy_regularizer(std::span<const double> weights);

/// phi_l = (l - 1) / (L - 1) with L = layer_count - 1, clamped at 0.
Vector layer_positions(std::size_t layer_count);

/// log of softmax(kappa * phi), the normalized prior row in log space.
Vector log_prior_row(double kappa, std::span<const double> phi);
Vector prior_row(double kappa, std::span<const double> phi);

struct FrequencyPrior {
    double mean_count = 0.0;
    Vector phi;
    std::map<ClassId, double> kappa;
    std::map<ClassId, Vector> log_prior;

    Vector prior(ClassId id) const;
};

/// With a depth for a class, its positions come from its own layer span
/// (layer_positions(depth)) and padding layers past that depth get phi = 0.
FrequencyPrior frequency_prior(const std::map<ClassId, std::size_t>& counts, std::size_t layer_count,
                               const std::map<ClassId, std::size_t>& depths = {});

/// One past the last layer holding a nonzero feature for the class (at least 3).
std::size_t class_depth(const LayerFeatures& text, ClassId id);

/// KL(w || pi) with eps smoothing on w; gradient is exact in w.
RegularizerValue freq_regularizer(std::span<const double> weights, std::span<const double> log_prior);

/// Pi_simplex(w - eta * grad).
Vector update_alpha(std::span<const double> weights, std::span<const double> gradient, double eta);

/// sum_l phi_l w_l.
double weight_center(std::span<const double> weights, std::span<const double> phi);

}  // namespace taillight
