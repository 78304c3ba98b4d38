#include "taillight/adaptive_guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace taillight {

using json = nlohmann::json;

std::size_t LayerFeatures::index_of(ClassId id) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), id);
    if (it == classes.end() || *it != id)
        throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no text features");
    return static_cast<std::size_t>(it - classes.begin());
}

Vector LayerFeatures::fused(ClassId id, std::span<const double> alpha) const {
    if (alpha.size() != layers.size()) throw Error(ErrorCode::DimensionMismatch, "alpha length != layer count");
    const std::size_t r = index_of(id);
    Vector out(dim(), 0.0);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto g = layers[l].row(r);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += alpha[l] * g[k];
    }
    return out;
}

Matrix LayerFeatures::fused_all(std::span<const double> alpha) const {
    if (alpha.size() != layers.size()) throw Error(ErrorCode::DimensionMismatch, "alpha length != layer count");
    Matrix out(class_count(), dim());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const double a = alpha[l];
        auto src = layers[l].data();
        auto dst = out.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += a * src[k];
    }
    return out;
}

LayerFeatures make_layer_features(const SLTree& tree, std::span<const ClassId> classes,
                                  const TextEncoder& encoder) {
    LayerFeatures out;
    out.classes.assign(classes.begin(), classes.end());
    std::sort(out.classes.begin(), out.classes.end());
    out.layers = layer_text_features(tree, out.classes, encoder);
    return out;
}

std::vector<ClassId> LayerWeights::classes() const {
    std::vector<ClassId> ids;
    for (const auto& [id, _] : rows_) ids.push_back(id);
    return ids;
}

void LayerWeights::resize_layers(std::size_t layer_count) {
    if (layer_count < layer_count_) throw Error(ErrorCode::DegenerateTree, "layer count cannot shrink");
    layer_count_ = layer_count;
    for (auto& [_, row] : rows_) row.resize(layer_count_, 0.0);
}

void LayerWeights::add_class(ClassId id, std::size_t task, Vector row) {
    if (rows_.count(id)) throw Error(ErrorCode::ClassCollision, "class " + std::to_string(id) + " already weighted");
    if (row.size() != layer_count_) throw Error(ErrorCode::DimensionMismatch, "weight row length != layer count");
    if (!on_simplex(row)) throw Error(ErrorCode::NonFiniteInput, "weight row is not on the simplex");
    rows_.emplace(id, std::move(row));
    tasks_[id] = task;
}

void LayerWeights::add_uniform(ClassId id, std::size_t task) {
    add_class(id, task, Vector(layer_count_, 1.0 / static_cast<double>(layer_count_)));
}

const Vector& LayerWeights::row(ClassId id) const {
    auto it = rows_.find(id);
    if (it == rows_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no weights");
    return it->second;
}

void LayerWeights::set_row(ClassId id, Vector row) {
    auto it = rows_.find(id);
    if (it == rows_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no weights");
    if (frozen_.count(id)) throw Error(ErrorCode::InvalidConfig, "class " + std::to_string(id) + " weights are frozen");
    if (row.size() != layer_count_) throw Error(ErrorCode::DimensionMismatch, "weight row length != layer count");
    if (!on_simplex(row)) throw Error(ErrorCode::NonFiniteInput, "weight row is not on the simplex");
    it->second = std::move(row);
}

void LayerWeights::set_row_unchecked(ClassId id, Vector row) {
    auto it = rows_.find(id);
    if (it == rows_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no weights");
    if (row.size() != layer_count_) throw Error(ErrorCode::DimensionMismatch, "weight row length != layer count");
    it->second = std::move(row);
}

std::size_t LayerWeights::task_of(ClassId id) const {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no weights");
    return it->second;
}

std::string LayerWeights::to_json() const {
    json rows = json::array();
    for (const auto& [id, row] : rows_)
        rows.push_back({{"class", id}, {"task", tasks_.at(id)}, {"frozen", frozen_.count(id) > 0}, {"alpha", row}});
    json doc = {{"version", 1}, {"layer_count", layer_count_}, {"rows", rows}};
    return doc.dump(2) + "\n";
}

LayerWeights LayerWeights::from_json(std::string_view text) {
    try {
        auto doc = json::parse(text);
        LayerWeights w(doc.at("layer_count").get<std::size_t>());
        for (const auto& r : doc.at("rows")) {
            const auto id = r.at("class").get<ClassId>();
            w.add_class(id, r.at("task").get<std::size_t>(), r.at("alpha").get<Vector>());
            if (r.at("frozen").get<bool>()) w.freeze(id);
        }
        return w;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("alpha checkpoint: ") + e.what());
    }
}

Vector aggregate_logits(std::span<const double> feature, const LayerFeatures& text,
                        std::span<const double> weights) {
    if (feature.size() != text.dim()) throw Error(ErrorCode::DimensionMismatch, "feature dim != text dim");
    if (weights.size() != text.layer_count()) throw Error(ErrorCode::DimensionMismatch, "weights != layer count");
    Vector logits(text.class_count(), 0.0);
    for (std::size_t l = 0; l < text.layer_count(); ++l) {
        if (weights[l] == 0.0) continue;
        for (std::size_t i = 0; i < text.class_count(); ++i)
            logits[i] += weights[l] * dot(feature, text.layers[l].row(i));
    }
    return logits;
}

RegularizerValue entropy_regularizer(std::span<const double> weights) {
    RegularizerValue out{0.0, Vector(weights.size())};
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const double a = weights[l];
        const double lg = std::log(a + kWeightEpsilon);
        out.value += a * lg;
        out.gradient[l] = lg + a / (a + kWeightEpsilon);
    }
    return out;
}

Vector layer_positions(std::size_t layer_count) {
    if (layer_count < 3) throw Error(ErrorCode::DegenerateTree, "frequency prior needs at least 3 layers");
    const double top = static_cast<double>(layer_count - 1);  // L
    Vector phi(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l)
        phi[l] = std::max(0.0, (static_cast<double>(l) - 1.0) / (top - 1.0));
    return phi;
}

Vector log_prior_row(double kappa, std::span<const double> phi) {
    Vector out(phi.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < phi.size(); ++l) mx = std::max(mx, kappa * phi[l]);
    double s = 0.0;
    for (std::size_t l = 0; l < phi.size(); ++l) s += std::exp(kappa * phi[l] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t l = 0; l < phi.size(); ++l) out[l] = kappa * phi[l] - lse;
    return out;
}

Vector prior_row(double kappa, std::span<const double> phi) {
    Vector out = log_prior_row(kappa, phi);
    for (double& x : out) x = std::exp(x);
    return out;
}

Vector FrequencyPrior::prior(ClassId id) const {
    auto it = log_prior.find(id);
    if (it == log_prior.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " has no prior");
    Vector out = it->second;
    for (double& x : out) x = std::exp(x);
    return out;
}

FrequencyPrior frequency_prior(const std::map<ClassId, std::size_t>& counts, std::size_t layer_count,
                               const std::map<ClassId, std::size_t>& depths) {
    FrequencyPrior out;
    out.phi = layer_positions(layer_count);
    if (counts.empty()) return out;
    double total = 0.0;
    for (const auto& [_, n] : counts) {
        if (n < 1) throw Error(ErrorCode::InvalidConfig, "class counts must be >= 1");
        total += static_cast<double>(n);
    }
    out.mean_count = total / static_cast<double>(counts.size());
    for (const auto& [id, n] : counts) {
        const double kappa = out.mean_count / static_cast<double>(n);
        out.kappa[id] = kappa;
        Vector phi = out.phi;
        if (auto it = depths.find(id); it != depths.end() && it->second < layer_count) {
            const Vector own = layer_positions(it->second);
            std::fill(phi.begin(), phi.end(), 0.0);
            std::copy(own.begin(), own.end(), phi.begin());
        }
        out.log_prior[id] = log_prior_row(kappa, phi);
    }
    return out;
}

std::size_t class_depth(const LayerFeatures& text, ClassId id) {
    const std::size_t r = text.index_of(id);
    std::size_t depth = 0;
    for (std::size_t l = 0; l < text.layer_count(); ++l) {
        const auto row = text.layers[l].row(r);
        if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) depth = l + 1;
    }
    return std::max<std::size_t>(depth, 3);
}

RegularizerValue freq_regularizer(std::span<const double> weights, std::span<const double> log_prior) {
    if (weights.size() != log_prior.size()) throw Error(ErrorCode::DimensionMismatch, "prior length mismatch");
    RegularizerValue out{0.0, Vector(weights.size())};
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const double a = weights[l];
        const double lg = std::log(a + kWeightEpsilon);
        out.value += a * (lg - log_prior[l]);
        out.gradient[l] = lg - log_prior[l] + a / (a + kWeightEpsilon);
    }
    return out;
}

Vector update_alpha(std::span<const double> weights, std::span<const double> gradient, double eta) {
    if (weights.size() != gradient.size()) throw Error(ErrorCode::DimensionMismatch, "gradient length mismatch");
    require_finite(gradient, "alpha gradient");
    Vector v(weights.size());
    for (std::size_t l = 0; l < v.size(); ++l) v[l] = weights[l] - eta * gradient[l];
    return project_to_simplex(v);
}

double weight_center(std::span<const double> weights, std::span<const double> phi) {
    return dot(weights, phi);
}

}  // namespace taillight
