#include <doctest.h>

#include <random>

#include "taillight/evaluation.hpp"

using namespace taillight;
using doctest::Approx;

namespace {
template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

// Accuracies given in tenths, every cell over 10 samples.
AccuracyMatrix tenths(std::initializer_list<std::initializer_list<std::size_t>> rows) {
    AccuracyMatrix m(rows.size());
    std::size_t t = 0;
    for (const auto& row : rows) {
        std::size_t i = 0;
        for (std::size_t c : row) m.set(t, i++, c, 10);
        ++t;
    }
    return m;
}

struct RandomWorld {
    LayerFeatures text;
    LayerWeights weights;
    Matrix x;
};

RandomWorld random_world(std::uint64_t seed, std::size_t classes, std::size_t layers, std::size_t d, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::exponential_distribution<double> e;
    RandomWorld w;
    for (std::size_t c = 0; c < classes; ++c) w.text.classes.push_back(static_cast<ClassId>(3 * c + 1));
    w.text.layers.assign(layers, Matrix(classes, d));
    for (auto& m : w.text.layers)
        for (double& v : m.data()) v = g(rng);
    w.weights = LayerWeights(layers);
    for (ClassId c : w.text.classes) {
        Vector row(layers);
        double s = 0.0;
        for (double& v : row) s += (v = e(rng));
        for (double& v : row) v /= s;
        w.weights.add_class(c, 0, row);
    }
    w.x = Matrix(n, d);
    for (double& v : w.x.data()) v = g(rng);
    return w;
}
}  // namespace

TEST_CASE("decision margin") {
    CHECK(decision_margin(Vector{3, 1, 2}) == 1.0);
    CHECK(decision_margin(Vector{1, 5}) == 4.0);
    CHECK(decision_margin(Vector{2, 2, 0}) == 0.0);
    CHECK(decision_margin(Vector{-1, -4, -2}) == 1.0);
    CHECK(code_of([] { decision_margin(Vector{1}); }) == ErrorCode::TooFewClasses);
}

TEST_CASE("prediction takes the argmax under the widest-margin row") {
    LayerFeatures text;
    text.classes = {0, 1, 2};
    text.layers.assign(2, Matrix(3, 2));
    // layer 0 separates class 0 sharply, layer 1 barely ranks class 2 first
    text.layers[0](0, 0) = 1.0;
    text.layers[0](1, 0) = 0.1;
    text.layers[1](2, 0) = 0.5;
    text.layers[1](1, 0) = 0.45;
    LayerWeights w(2);
    w.add_class(0, 0, Vector{0.2, 0.8});
    w.add_class(1, 0, Vector{0.9, 0.1});
    w.add_class(2, 0, Vector{0, 1});
    // logits under row 0: [.2, .38, .4] margin .02; row 1: [.9, .135, .05] margin .765; row 2: [0, .45, .5] margin .05
    const Prediction p = predict_detail(Vector{1, 0}, text, w);
    CHECK(p.margin_class == 1);
    CHECK(p.label == 0);
    CHECK(p.margin == Approx(0.765));

    // ties in margin go to the smaller class id
    LayerWeights tied(2);
    for (ClassId c : {0u, 1u, 2u}) tied.add_class(c, 0, Vector{0, 1});
    CHECK(predict_detail(Vector{1, 0}, text, tied).margin_class == 0);
    CHECK(predict(Vector{1, 0}, text, tied) == 2);

    LayerFeatures one;
    one.classes = {7};
    one.layers.assign(2, Matrix(1, 2));
    LayerWeights w1(2);
    w1.add_class(7, 0, Vector{1, 0});
    CHECK(predict(Vector{1, 0}, one, w1) == 7);
    CHECK(code_of([&] { predict(Vector{1, 0, 0}, text, w); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("prediction matches a brute-force oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RandomWorld w = random_world(seed, 2 + seed % 5, 3 + seed % 3, 5, 30);
        const std::size_t k = w.text.class_count();
        for (std::size_t i = 0; i < w.x.rows(); ++i) {
            // oracle: full logit matrix per row class, scan in id order
            double best_margin = -1.0;
            ClassId best_label = 0;
            for (ClassId row_class : w.text.classes) {
                std::vector<double> z(k, 0.0);
                for (std::size_t l = 0; l < w.text.layer_count(); ++l)
                    for (std::size_t c = 0; c < k; ++c) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < 5; ++j) s += w.x(i, j) * w.text.layers[l](c, j);
                        z[c] += w.weights.row(row_class)[l] * s;
                    }
                std::vector<double> sorted = z;
                std::sort(sorted.rbegin(), sorted.rend());
                const double m = sorted[0] - sorted[1];
                if (m > best_margin + 1e-12) {
                    best_margin = m;
                    best_label = w.text.classes[static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin())];
                }
            }
            CHECK(predict(w.x.row(i), w.text, w.weights) == best_label);
        }
    }
}

TEST_CASE("identical weight rows reduce to a plain argmax") {
    RandomWorld w = random_world(4, 6, 4, 5, 50);
    const Vector shared{0.1, 0.2, 0.3, 0.4};
    for (ClassId c : w.text.classes) w.weights.set_row(c, shared);
    for (std::size_t i = 0; i < w.x.rows(); ++i) {
        const Vector z = aggregate_logits(w.x.row(i), w.text, shared);
        const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
        CHECK(predict(w.x.row(i), w.text, w.weights) == w.text.classes[best]);
    }
}

TEST_CASE("serial and parallel predictions agree") {
    const RandomWorld w = random_world(5, 8, 5, 6, 257);
    const auto s = serial::predict_rows(w.x, w.text, w.weights);
    const auto p = parallel::predict_rows(w.x, w.text, w.weights);
    REQUIRE(s.size() == p.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].label == p[i].label);
        CHECK(s[i].margin_class == p[i].margin_class);
        CHECK(s[i].margin == p[i].margin);
    }
    Matrix wrong(3, 2);
    CHECK(code_of([&] { parallel::predict_rows(wrong, w.text, w.weights); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("final accuracy and forgetting on toy matrices") {
    const AccuracyMatrix plain = tenths({{9}, {8, 9}, {7, 6, 8}});
    CHECK(a_last(plain) == 21.0 / 30.0);
    CHECK(f_avg(plain) == ((0.9 - 0.7) + (0.9 - 0.6)) / 2);
    CHECK(f_avg(plain) == Approx(0.25).epsilon(1e-14));

    // later tasks improving earlier ones do not count as negative forgetting
    const AccuracyMatrix better = tenths({{5}, {6, 7}, {9, 8, 6}});
    CHECK(a_last(better) == 23.0 / 30.0);
    CHECK(f_avg(better) == 0.0);

    // the reference is the best earlier accuracy, not the first
    const AccuracyMatrix peak = tenths({{5}, {8, 9}, {7, 6, 3}});
    CHECK(f_avg(peak) == ((0.8 - 0.7) + (0.9 - 0.6)) / 2);
    CHECK(f_avg(peak) == Approx(0.2).epsilon(1e-14));
    CHECK(a_last(peak) == 16.0 / 30.0);

    // micro average weighs tasks by their test size
    AccuracyMatrix uneven(2);
    uneven.set(0, 0, 1, 1);
    uneven.set(1, 0, 1, 2);
    uneven.set(1, 1, 6, 8);
    CHECK(a_last(uneven) == 0.7);
    CHECK(f_avg(uneven) == 0.5);
}

TEST_CASE("metric errors") {
    AccuracyMatrix one(1);
    one.set(0, 0, 3, 4);
    CHECK(a_last(one) == 0.75);
    CHECK(code_of([&] { f_avg(one); }) == ErrorCode::SingleTask);

    AccuracyMatrix gap(3);
    gap.set(0, 0, 1, 2);
    gap.set(2, 0, 1, 2);
    gap.set(2, 2, 1, 2);
    CHECK(code_of([&] { a_last(gap); }) == ErrorCode::IncompleteMatrix);
    CHECK(code_of([&] { f_avg(gap); }) == ErrorCode::IncompleteMatrix);
    CHECK(code_of([&] { gap.set(0, 1, 1, 1); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { gap.set(1, 0, 3, 2); }) == ErrorCode::InvalidConfig);
    CHECK(gap.rows()[2] == std::vector<double>{0.5, 0.5});
}

TEST_CASE("head and tail breakdown") {
    const std::map<ClassId, std::size_t> counts{{0, 500}, {1, 150}, {2, 40}, {3, 5}};
    const std::map<ClassId, double> base{{0, 0.5}, {1, 0.5}, {2, 0.2}, {3, 0.1}};
    const std::map<ClassId, double> acc{{0, 0.6}, {1, 0.4}, {2, 0.5}, {3, 0.5}};
    const auto b = head_tail_breakdown(acc, counts, 100, base);
    CHECK(*b.head_acc == Approx(0.5));
    CHECK(*b.tail_acc == Approx(0.5));
    CHECK(*b.head_delta == Approx(0.0));
    CHECK(*b.tail_delta == Approx(0.35));
    CHECK(b.classes.size() == 4);
    CHECK(b.classes[2].tail);
    CHECK(!b.classes[1].tail);

    const auto none = head_tail_breakdown({{0, 0.6}}, counts, 100, base);
    CHECK(!none.tail_acc.has_value());
    CHECK(!none.tail_delta.has_value());

    const auto same = head_tail_breakdown(acc, counts, 100, acc);
    for (const auto& c : same.classes) CHECK(c.delta == 0.0);

    CHECK(code_of([&] { head_tail_breakdown({{9, 0.1}}, counts, 100, base); }) == ErrorCode::UnknownClass);
}
