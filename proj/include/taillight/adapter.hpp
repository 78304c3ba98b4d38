#pragma once

#include <filesystem>
#include <span>

#include "taillight/numerics.hpp"

namespace taillight {

/// Linear map f(x) = W x + b on frozen visual features.
struct Adapter {
    Matrix weight;
    Vector bias;

    static Adapter identity(std::size_t dim);

    std::size_t dim() const noexcept { return bias.size(); }
    Vector apply(std::span<const double> feature) const;
    Matrix apply_rows(const Matrix& features) const;

    /// f32le block [W row-major, b] plus a JSON sidecar with the shape.
    void save(const std::filesystem::path& bin_path) const;
    static Adapter load(const std::filesystem::path& bin_path);

    friend bool operator==(const Adapter&, const Adapter&) = default;
};

inline Vector apply_adapter(const Adapter& adapter, std::span<const double> feature) {
    return adapter.apply(feature);
}

}  // namespace taillight
