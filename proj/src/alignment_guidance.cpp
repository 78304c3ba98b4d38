#include "taillight/alignment_guidance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "taillight/kernels.hpp"

namespace taillight {

Matrix sample_covariance(const Matrix& features, std::span<const double> mean) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    Matrix cov(d, d);
    if (n < 2) return cov;
    for (std::size_t s = 0; s < n; ++s) {
        auto x = features.row(s);
        for (std::size_t i = 0; i < d; ++i) {
            const double di = x[i] - mean[i];
            for (std::size_t j = 0; j <= i; ++j) cov(i, j) += di * (x[j] - mean[j]);
        }
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            cov(i, j) *= inv;
            cov(j, i) = cov(i, j);
        }
    return cov;
}

ClassStatistics update_statistics(ClassId id, const Matrix& features, double beta) {
    if (features.rows() == 0) throw Error(ErrorCode::InvalidConfig, "statistics need at least one sample");
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    Vector mean(d, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        auto x = features.row(s);
        for (std::size_t k = 0; k < d; ++k) mean[k] += x[k];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    require_finite(mean, "class prototype");

    Matrix cov = sample_covariance(features, mean);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
    const double ridge = trace > 0.0 ? beta * trace / static_cast<double>(d) : beta;
    for (std::size_t i = 0; i < d; ++i) cov(i, i) += ridge;
    return ClassStatistics{id, std::move(mean), cholesky(cov), n};
}

const ClassStatistics& MemoryBank::at(ClassId id) const {
    auto it = stats_.find(id);
    if (it == stats_.end()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " not in memory");
    return it->second;
}

void MemoryBank::store(ClassStatistics stats) {
    const ClassId id = stats.id;
    stats_.insert_or_assign(id, std::move(stats));
}

void MemoryBank::save(const std::filesystem::path& directory) const {
    std::filesystem::create_directories(directory);
    std::vector<float> block;
    nlohmann::json classes = nlohmann::json::array();
    std::size_t dim = 0;
    for (const auto& [id, s] : stats_) {
        dim = s.mean.size();
        const std::size_t offset = block.size();
        for (double x : s.mean) block.push_back(static_cast<float>(x));
        for (double x : s.factor.lower.data()) block.push_back(static_cast<float>(x));
        classes.push_back({{"id", id}, {"count", s.count}, {"offset", offset}});
    }
    std::ofstream bin(directory / "memory.bin", std::ios::binary | std::ios::trunc);
    if (!bin) throw Error(ErrorCode::IoError, "cannot write memory.bin", (directory / "memory.bin").string());
    bin.write(reinterpret_cast<const char*>(block.data()), static_cast<std::streamsize>(block.size() * sizeof(float)));
    std::ofstream idx(directory / "memory.json", std::ios::trunc);
    idx << nlohmann::json{{"version", 1}, {"dtype", "f32le"}, {"dim", dim}, {"classes", classes}}.dump(2) << '\n';
}

MemoryBank MemoryBank::load(const std::filesystem::path& directory) {
    std::ifstream idx(directory / "memory.json");
    if (!idx) throw Error(ErrorCode::IoError, "missing memory.json", (directory / "memory.json").string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(idx);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what(), (directory / "memory.json").string());
    }
    const auto dim = doc.at("dim").get<std::size_t>();
    const auto bin_path = directory / "memory.bin";
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(bin_path, ec);
    if (ec) throw Error(ErrorCode::IoError, "missing memory.bin", bin_path.string());
    std::vector<float> block(bytes / sizeof(float));
    std::ifstream bin(bin_path, std::ios::binary);
    bin.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(block.size() * sizeof(float)));

    MemoryBank bank;
    const std::size_t per_class = dim + dim * dim;
    for (const auto& c : doc.at("classes")) {
        const auto offset = c.at("offset").get<std::size_t>();
        if (offset + per_class > block.size())
            throw Error(ErrorCode::TruncatedMatrix, "memory.bin too short", bin_path.string());
        ClassStatistics s;
        s.id = c.at("id").get<ClassId>();
        s.count = c.at("count").get<std::size_t>();
        s.mean.assign(block.begin() + static_cast<std::ptrdiff_t>(offset),
                      block.begin() + static_cast<std::ptrdiff_t>(offset + dim));
        s.factor.lower = Matrix(dim, dim);
        auto dst = s.factor.lower.data();
        for (std::size_t i = 0; i < dim * dim; ++i) dst[i] = block[offset + dim + i];
        bank.store(std::move(s));
    }
    return bank;
}

BalancedBatch plain_batch(const Matrix& features, std::span<const ClassId> labels) {
    if (features.rows() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "features/labels length mismatch");
    BalancedBatch b;
    b.features = features;
    b.labels.assign(labels.begin(), labels.end());
    b.synthetic.assign(labels.size(), false);
    b.original_count = labels.size();
    return b;
}

BalancedBatch build_balanced_batch(const Matrix& features, std::span<const ClassId> labels,
                                   const MemoryBank& memory, Rng& rng, std::size_t replay_cap) {
    BalancedBatch b = plain_batch(features, labels);
    if (memory.empty() || labels.empty()) return b;

    std::map<ClassId, std::size_t> freq;
    for (ClassId y : labels) ++freq[y];
    std::size_t r = 0;
    for (const auto& [_, n] : freq) r = std::max(r, n);
    if (replay_cap > 0) r = std::min(r, replay_cap);
    b.replay_per_class = r;

    const std::size_t d = features.cols();
    Matrix all(features.rows() + r * memory.size(), d);
    std::copy(features.data().begin(), features.data().end(), all.data().begin());
    std::size_t row = features.rows();
    for (const auto& [id, stats] : memory.entries()) {
        if (stats.mean.size() != d) throw Error(ErrorCode::DimensionMismatch, "memory dim != feature dim");
        const Matrix drawn = sample_gaussian(stats.mean, stats.factor, r, rng);
        for (std::size_t s = 0; s < r; ++s, ++row) {
            std::copy(drawn.row(s).begin(), drawn.row(s).end(), all.row(row).begin());
            b.labels.push_back(id);
            b.synthetic.push_back(true);
        }
    }
    b.features = std::move(all);
    return b;
}

Matrix visual_similarity(const Matrix& adapted) {
    Matrix u(adapted.rows(), adapted.cols());
    for (std::size_t i = 0; i < adapted.rows(); ++i) {
        const Vector n = normalize(adapted.row(i));
        std::copy(n.begin(), n.end(), u.row(i).begin());
    }
    return kernels::gram(u);
}

Matrix semantic_similarity(std::span<const ClassId> labels, const LayerFeatures& text, const LayerWeights& weights) {
    std::map<ClassId, Vector> fused;
    for (ClassId y : labels) {
        if (fused.count(y)) continue;
        if (!weights.contains(y)) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(y) + " has no weights");
        fused[y] = normalize(text.fused(y, weights.row(y)));
    }
    Matrix u(labels.size(), text.dim());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& v = fused.at(labels[i]);
        std::copy(v.begin(), v.end(), u.row(i).begin());
    }
    return kernels::gram(u);
}

double alignment_loss(const Matrix& s_visual, const Matrix& s_semantic, double temperature) {
    if (s_visual.rows() != s_semantic.rows() || s_visual.cols() != s_semantic.cols())
        throw Error(ErrorCode::ShapeMismatch, "similarity matrices differ in shape");
    return symmetric_kl(row_softmax(s_visual, temperature), row_softmax(s_semantic, temperature));
}

double distillation_loss(const Adapter* old_adapter, const Adapter& new_adapter, const Matrix& features) {
    if (old_adapter == nullptr || features.rows() == 0) return 0.0;
    const Matrix a = old_adapter->apply_rows(features);
    const Matrix b = new_adapter.apply_rows(features);
    double total = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double diff = a(i, k) - b(i, k);
            sq += diff * diff;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(features.rows());
}

}  // namespace taillight
