#include "taillight/adapter.hpp"

#include <fstream>

#include <json.hpp>

#include "taillight/kernels.hpp"

namespace taillight {

Adapter Adapter::identity(std::size_t dim) { return Adapter{Matrix::identity(dim), Vector(dim, 0.0)}; }

Vector Adapter::apply(std::span<const double> feature) const {
    if (feature.size() != weight.cols())
        throw Error(ErrorCode::DimensionMismatch, "feature dim " + std::to_string(feature.size()) +
                                                      " vs adapter dim " + std::to_string(weight.cols()));
    Vector out(weight.rows());
    for (std::size_t r = 0; r < weight.rows(); ++r) out[r] = bias[r] + dot(weight.row(r), feature);
    return out;
}

Matrix Adapter::apply_rows(const Matrix& features) const { return kernels::affine_rows(weight, bias, features); }

void Adapter::save(const std::filesystem::path& bin_path) const {
    if (bin_path.has_parent_path()) std::filesystem::create_directories(bin_path.parent_path());
    std::vector<float> block;
    block.reserve(weight.data().size() + bias.size());
    for (double x : weight.data()) block.push_back(static_cast<float>(x));
    for (double x : bias) block.push_back(static_cast<float>(x));
    {
        std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + bin_path.string(), bin_path.string());
        out.write(reinterpret_cast<const char*>(block.data()),
                  static_cast<std::streamsize>(block.size() * sizeof(float)));
    }
    auto meta_path = bin_path;
    meta_path.replace_extension(".json");
    std::ofstream meta(meta_path, std::ios::trunc);
    meta << nlohmann::json{{"version", 1},
                           {"dtype", "f32le"},
                           {"dim", dim()},
                           {"layout", "weight row-major then bias"},
                           {"file", bin_path.filename().string()}}
                .dump(2)
         << '\n';
}

Adapter Adapter::load(const std::filesystem::path& bin_path) {
    auto meta_path = bin_path;
    meta_path.replace_extension(".json");
    std::ifstream meta(meta_path);
    if (!meta) throw Error(ErrorCode::IoError, "missing adapter metadata " + meta_path.string(), meta_path.string());
    std::size_t dim = 0;
    try {
        dim = nlohmann::json::parse(meta).at("dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what(), meta_path.string());
    }
    const std::size_t values = dim * dim + dim;
    std::error_code ec;
    if (std::filesystem::file_size(bin_path, ec) != values * sizeof(float) || ec)
        throw Error(ErrorCode::TruncatedMatrix, "adapter block has the wrong size", bin_path.string());
    std::vector<float> block(values);
    std::ifstream in(bin_path, std::ios::binary);
    in.read(reinterpret_cast<char*>(block.data()), static_cast<std::streamsize>(values * sizeof(float)));
    Adapter a{Matrix(dim, dim), Vector(dim)};
    auto w = a.weight.data();
    for (std::size_t i = 0; i < dim * dim; ++i) w[i] = block[i];
    for (std::size_t i = 0; i < dim; ++i) a.bias[i] = block[dim * dim + i];
    return a;
}

}  // namespace taillight
