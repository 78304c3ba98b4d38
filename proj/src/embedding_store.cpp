#include "taillight/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

namespace taillight {

using json = nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";

std::vector<float> read_f32le(const fs::path& path, std::size_t expected_values) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot stat " + path.string(), path.string());
    const auto expected_bytes = expected_values * sizeof(float);
    if (size != expected_bytes)
        throw Error(ErrorCode::TruncatedMatrix,
                    path.string() + " holds " + std::to_string(size) + " bytes, expected " +
                        std::to_string(expected_bytes),
                    path.string());
    std::vector<float> out(expected_values);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected_bytes));
    if constexpr (std::endian::native == std::endian::big) {
        for (float& f : out) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            bits = __builtin_bswap32(bits);
            f = std::bit_cast<float>(bits);
        }
    }
    return out;
}

void write_f32le(const fs::path& path, const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    if constexpr (std::endian::native == std::endian::big) {
        for (float f : values) {
            auto bits = __builtin_bswap32(std::bit_cast<std::uint32_t>(f));
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    } else {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    }
}

Matrix to_matrix(const std::vector<float>& values, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    auto d = m.data();
    for (std::size_t i = 0; i < values.size(); ++i) d[i] = static_cast<double>(values[i]);
    return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

const ClassRecord& EmbeddingBundle::record(ClassId id) const {
    if (id >= classes.size()) throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id));
    return classes[id];
}

Matrix EmbeddingBundle::train_features(ClassId id) const {
    return to_matrix(data.at(id).train, record(id).train_count, dim);
}

Matrix EmbeddingBundle::test_features(ClassId id) const {
    return to_matrix(data.at(id).test, record(id).test_count, dim);
}

void EmbeddingBundle::validate() const {
    if (dim == 0) throw Error(ErrorCode::InvalidManifest, "dim must be positive");
    if (data.size() != classes.size())
        throw Error(ErrorCode::InvalidManifest, "class data count does not match manifest");
    std::set<ClassId> seen;
    for (const auto& rec : classes) {
        if (!seen.insert(rec.id).second)
            throw Error(ErrorCode::DuplicateClassId, "class id " + std::to_string(rec.id) + " repeated");
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& rec = classes[i];
        if (rec.id != i)
            throw Error(ErrorCode::InvalidManifest, "class ids must be contiguous from 0");
        if (rec.label.empty())
            throw Error(ErrorCode::InvalidManifest, "class " + std::to_string(i) + " has an empty label");
        if (rec.train_count < 1)
            throw Error(ErrorCode::InvalidManifest, "class " + std::to_string(i) + " has no training rows");
        if (data[i].train.size() != rec.train_count * dim || data[i].test.size() != rec.test_count * dim)
            throw Error(ErrorCode::TruncatedMatrix, "class " + std::to_string(i) + " matrix size mismatch");
    }
}

void save_bundle(const EmbeddingBundle& bundle, const fs::path& directory) {
    bundle.validate();
    fs::create_directories(directory);
    json classes = json::array();
    for (const auto& rec : bundle.classes) {
        classes.push_back({{"id", rec.id},
                           {"label", rec.label},
                           {"train_count", rec.train_count},
                           {"test_count", rec.test_count},
                           {"train_file", rec.train_file},
                           {"test_file", rec.test_file}});
        write_f32le(directory / rec.train_file, bundle.data[rec.id].train);
        write_f32le(directory / rec.test_file, bundle.data[rec.id].test);
    }
    json manifest = {{"version", 1},
                     {"dim", bundle.dim},
                     {"dtype", "f32le"},
                     {"normalized", bundle.normalized},
                     {"classes", classes}};
    std::ofstream out(directory / kManifestName, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest", (directory / kManifestName).string());
    out << manifest.dump(2) << '\n';
}

EmbeddingBundle load_bundle(const fs::path& directory) {
    const auto manifest_path = directory / kManifestName;
    if (!fs::exists(manifest_path))
        throw Error(ErrorCode::ManifestMissing, "no manifest in " + directory.string(), manifest_path.string());
    json manifest;
    try {
        std::ifstream in(manifest_path);
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidManifest, e.what(), manifest_path.string());
    }

    EmbeddingBundle bundle;
    try {
        if (manifest.at("version").get<int>() != 1)
            throw Error(ErrorCode::InvalidManifest, "unsupported manifest version", manifest_path.string());
        if (manifest.at("dtype").get<std::string>() != "f32le")
            throw Error(ErrorCode::InvalidManifest, "dtype must be f32le", manifest_path.string());
        bundle.dim = manifest.at("dim").get<std::size_t>();
        bundle.normalized = manifest.at("normalized").get<bool>();
        for (const auto& c : manifest.at("classes")) {
            ClassRecord rec;
            rec.id = c.at("id").get<ClassId>();
            rec.label = c.at("label").get<std::string>();
            rec.train_count = c.at("train_count").get<std::size_t>();
            rec.test_count = c.at("test_count").get<std::size_t>();
            rec.train_file = c.at("train_file").get<std::string>();
            rec.test_file = c.at("test_file").get<std::string>();
            bundle.classes.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidManifest, e.what(), manifest_path.string());
    }

    std::set<ClassId> seen;
    for (const auto& rec : bundle.classes)
        if (!seen.insert(rec.id).second)
            throw Error(ErrorCode::DuplicateClassId, "class id " + std::to_string(rec.id) + " repeated",
                        manifest_path.string());
    std::sort(bundle.classes.begin(), bundle.classes.end(),
              [](const ClassRecord& a, const ClassRecord& b) { return a.id < b.id; });

    bundle.data.resize(bundle.classes.size());
    for (std::size_t i = 0; i < bundle.classes.size(); ++i) {
        const auto& rec = bundle.classes[i];
        if (rec.id != i)
            throw Error(ErrorCode::InvalidManifest, "class ids must be contiguous from 0", manifest_path.string());
        bundle.data[i].train = read_f32le(directory / rec.train_file, rec.train_count * bundle.dim);
        bundle.data[i].test = read_f32le(directory / rec.test_file, rec.test_count * bundle.dim);
    }
    bundle.validate();
    return bundle;
}

std::string normalize_text(std::string_view text) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t begin = 0, end = text.size();
    while (begin < end && is_space(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
    std::string_view trimmed = text.substr(begin, end - begin);

    const bool ascii = std::all_of(trimmed.begin(), trimmed.end(),
                                   [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    if (ascii) return std::string(trimmed);

    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) return std::string(trimmed);
    icu::UnicodeString src = icu::UnicodeString::fromUTF8(
        icu::StringPiece(trimmed.data(), static_cast<int32_t>(trimmed.size())));
    icu::UnicodeString dst = nfc->normalize(src, status);
    if (U_FAILURE(status)) return std::string(trimmed);
    std::string out;
    dst.toUTF8String(out);
    return out;
}

bool TextEmbeddingStore::contains(std::string_view text) const {
    return entries_.count(normalize_text(text)) > 0;
}

void TextEmbeddingStore::insert(std::string_view text, Vector vector) {
    if (dim_ == 0) dim_ = vector.size();
    if (vector.size() != dim_)
        throw Error(ErrorCode::DimMismatch, "text vector of dim " + std::to_string(vector.size()) +
                                                " in a store of dim " + std::to_string(dim_));
    require_finite(vector, "text vector");
    entries_[normalize_text(text)] = std::move(vector);
}

const Vector& TextEmbeddingStore::lookup(std::string_view text) const {
    auto key = normalize_text(text);
    auto it = entries_.find(key);
    if (it == entries_.end()) throw Error(ErrorCode::TextNotFound, "no embedding for \"" + key + "\"");
    return it->second;
}

const Vector& lookup_text(const TextEmbeddingStore& store, std::string_view text) {
    return store.lookup(text);
}

TextEmbeddingStore TextEmbeddingStore::load_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
    TextEmbeddingStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (normalize_text(line).empty()) continue;
        try {
            auto obj = json::parse(line);
            store.insert(obj.at("text").get<std::string>(), obj.at("vector").get<Vector>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidManifest,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what(), path.string());
        }
    }
    return store;
}

void TextEmbeddingStore::save_jsonl(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    for (const auto& [text, vec] : entries_) out << json{{"text", text}, {"vector", vec}}.dump() << '\n';
}

void check_joinable(const EmbeddingBundle& bundle, const TextEmbeddingStore& store) {
    if (store.size() > 0 && store.dim() != bundle.dim)
        throw Error(ErrorCode::DimMismatch, "bundle dim " + std::to_string(bundle.dim) +
                                                " vs text store dim " + std::to_string(store.dim()));
}

Vector pseudo_text_encoder(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw Error(ErrorCode::DimensionMismatch, "pseudo encoder needs dim >= 2");
    const auto key = normalize_text(text);
    Rng rng(splitmix64(fnv1a64(key) ^ splitmix64(seed)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (double& x : v) x = normal(rng);
    return normalize(v);
}

std::vector<std::size_t> make_longtail_counts(std::size_t n_max, double rho, std::size_t class_count) {
    if (!(rho > 0.0) || rho > 1.0) throw Error(ErrorCode::InvalidRho, "rho must lie in (0, 1]");
    if (n_max < 1) throw Error(ErrorCode::InvalidConfig, "n_max must be at least 1");
    std::vector<std::size_t> counts(class_count);
    for (std::size_t c = 0; c < class_count; ++c) {
        const double frac = class_count > 1 ? static_cast<double>(c) / static_cast<double>(class_count - 1) : 0.0;
        const double n = std::round(static_cast<double>(n_max) * std::pow(rho, frac));
        counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(n));
    }
    return counts;
}

SyntheticData generate_synthetic_bundle(const SyntheticSpec& spec) {
    if (spec.dim < 2) throw Error(ErrorCode::InvalidConfig, "synthetic dim must be >= 2");
    if (spec.train_counts.size() != spec.class_count)
        throw Error(ErrorCode::InvalidConfig, "train_counts length must equal class_count");

    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Rejection-sample unit means until every pair is within the cosine bound.
    Matrix means(spec.class_count, spec.dim);
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100000)
                throw Error(ErrorCode::InvalidConfig, "separation too tight for dim/class_count");
            Vector v(spec.dim);
            for (double& x : v) x = normal(rng);
            v = normalize(v);
            bool ok = true;
            for (std::size_t k = 0; k < c && ok; ++k) ok = dot(v, means.row(k)) <= spec.separation;
            if (ok) {
                std::copy(v.begin(), v.end(), means.row(c).begin());
                break;
            }
        }
    }

    SyntheticData out;
    out.class_means = means;
    auto& bundle = out.bundle;
    bundle.dim = spec.dim;
    bundle.normalized = false;
    auto draw = [&](std::size_t c, std::size_t count) {
        std::vector<float> rows(count * spec.dim);
        for (std::size_t s = 0; s < count; ++s)
            for (std::size_t k = 0; k < spec.dim; ++k)
                rows[s * spec.dim + k] = static_cast<float>(means(c, k) + spec.noise * normal(rng));
        return rows;
    };
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        char label[32];
        std::snprintf(label, sizeof label, "class_%02zu", c);
        ClassRecord rec{static_cast<ClassId>(c), label, spec.train_counts[c], spec.test_count,
                        std::string(label) + "_train.bin", std::string(label) + "_test.bin"};
        bundle.classes.push_back(rec);
        ClassMatrices m;
        m.train = draw(c, rec.train_count);
        m.test = draw(c, rec.test_count);
        bundle.data.push_back(std::move(m));
        for (std::size_t s = 0; s < rec.test_count; ++s) out.test_labels.push_back(rec.id);
    }
    bundle.validate();
    return out;
}

std::size_t TaskSplit::task_of(ClassId id) const {
    for (std::size_t t = 0; t < tasks.size(); ++t)
        if (std::find(tasks[t].begin(), tasks[t].end(), id) != tasks[t].end()) return t;
    throw Error(ErrorCode::UnknownClass, "class " + std::to_string(id) + " is in no task");
}

void TaskSplit::validate(std::size_t class_count) const {
    std::vector<int> hits(class_count, 0);
    for (const auto& task : tasks) {
        if (task.empty()) throw Error(ErrorCode::InvalidConfig, "empty task in split");
        for (ClassId id : task) {
            if (id >= class_count) throw Error(ErrorCode::UnknownClass, "split names unknown class");
            if (++hits[id] > 1) throw Error(ErrorCode::InvalidConfig, "class appears in two tasks");
        }
    }
    for (std::size_t c = 0; c < class_count; ++c)
        if (hits[c] == 0) throw Error(ErrorCode::InvalidConfig, "class " + std::to_string(c) + " not covered");
}

TaskSplit make_task_split(std::span<const ClassId> class_ids, std::size_t task_count, std::uint64_t seed) {
    if (task_count == 0 || task_count > class_ids.size())
        throw Error(ErrorCode::TooManyTasks, std::to_string(task_count) + " tasks for " +
                                                 std::to_string(class_ids.size()) + " classes");
    std::vector<ClassId> order(class_ids.begin(), class_ids.end());
    Rng rng(seed);
    // Fisher-Yates with our own index draw so the split is stable across standard libraries.
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    const std::size_t per_task = order.size() / task_count;
    TaskSplit split;
    for (std::size_t t = 0; t < task_count; ++t) {
        const auto begin = order.begin() + static_cast<std::ptrdiff_t>(t * per_task);
        const auto end = t + 1 == task_count ? order.end() : begin + static_cast<std::ptrdiff_t>(per_task);
        std::vector<ClassId> task(begin, end);
        std::sort(task.begin(), task.end());
        split.tasks.push_back(std::move(task));
    }
    return split;
}

namespace {
LabeledFeatures stack(const EmbeddingBundle& bundle, std::span<const ClassId> classes, bool train) {
    std::size_t rows = 0;
    for (ClassId c : classes) rows += train ? bundle.record(c).train_count : bundle.record(c).test_count;
    LabeledFeatures out{Matrix(rows, bundle.dim), {}};
    out.labels.reserve(rows);
    std::size_t r = 0;
    for (ClassId c : classes) {
        const auto& src = train ? bundle.data.at(c).train : bundle.data.at(c).test;
        const std::size_t n = src.size() / bundle.dim;
        for (std::size_t s = 0; s < n; ++s, ++r) {
            auto dst = out.features.row(r);
            for (std::size_t k = 0; k < bundle.dim; ++k) dst[k] = src[s * bundle.dim + k];
            out.labels.push_back(c);
        }
    }
    return out;
}
}  // namespace

LabeledFeatures stack_train(const EmbeddingBundle& bundle, std::span<const ClassId> classes) {
    return stack(bundle, classes, true);
}

LabeledFeatures stack_test(const EmbeddingBundle& bundle, std::span<const ClassId> classes) {
    return stack(bundle, classes, false);
}

}  // namespace taillight
