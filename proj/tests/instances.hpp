#pragma once
// Random objective instances for derivative and decomposition checks.

#include <random>
#include <vector>

#include "oracles.hpp"
#include "taillight/trainer.hpp"

namespace instances {

using namespace taillight;

struct Lambdas {
    double alg = 0.025, kd = 1.0, con = 0.3, freq = 0.6;
};

struct Instance {
    Matrix features;
    std::vector<ClassId> labels;
    std::size_t original_count = 0;
    LayerFeatures text;
    LayerWeights weights;
    Adapter adapter;
    Adapter old_adapter;
    FrequencyPrior prior;
    std::set<ClassId> current;
    Lambdas lambdas;
    double logit_scale = 10.0;
    double temperature = 0.5;

    // Points into this instance: rebuild after copying.
    ObjectiveContext context() const {
        ObjectiveContext c;
        c.features = &features;
        c.labels = labels;
        c.original_count = original_count;
        c.text = &text;
        c.weights = &weights;
        c.old_adapter = &old_adapter;
        c.current = current;
        c.prior = &prior;
        c.lambda_alg = lambdas.alg;
        c.lambda_kd = lambdas.kd;
        c.lambda_con = lambdas.con;
        c.lambda_freq = lambdas.freq;
        c.logit_scale = logit_scale;
        c.temperature = temperature;
        return c;
    }
};

// d-dim features, `classes` seen classes of which the last half are current,
// `layers` tree layers, `batch` rows of which a quarter are replayed.
inline Instance random_instance(std::uint64_t seed, std::size_t d = 8, std::size_t classes = 4,
                                std::size_t layers = 3, std::size_t batch = 16) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Instance in;
    for (std::size_t c = 0; c < classes; ++c) in.text.classes.push_back(static_cast<ClassId>(c));
    in.text.layers.assign(layers, Matrix(classes, d));
    for (auto& m : in.text.layers)
        for (std::size_t c = 0; c < classes; ++c) {
            Vector v(d);
            for (double& x : v) x = g(rng);
            v = normalize(v);
            std::copy(v.begin(), v.end(), m.row(c).begin());
        }
    // one empty node, as for a class without refinement layers
    std::fill(in.text.layers[layers - 1].row(0).begin(), in.text.layers[layers - 1].row(0).end(), 0.0);

    in.weights = LayerWeights(layers);
    for (std::size_t c = 0; c < classes; ++c)
        in.weights.add_class(static_cast<ClassId>(c), c < classes / 2 ? 0 : 1, oracle::random_simplex_point(layers, rng));

    auto jitter = [&](double scale) {
        Adapter a = Adapter::identity(d);
        for (double& w : a.weight.data()) w += scale * g(rng);
        for (double& b : a.bias) b = scale * g(rng);
        return a;
    };
    in.adapter = jitter(0.2);
    in.old_adapter = jitter(0.2);

    in.features = Matrix(batch, d);
    in.original_count = batch - batch / 4;
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    for (std::size_t i = 0; i < batch; ++i) {
        const ClassId y = i < classes ? static_cast<ClassId>(i) : static_cast<ClassId>(pick(rng));
        in.labels.push_back(y);
        for (std::size_t k = 0; k < d; ++k) in.features(i, k) = 0.5 * g(rng) + in.text.layers[1](y, k);
    }

    std::map<ClassId, std::size_t> counts;
    std::uniform_int_distribution<std::size_t> count(1, 200);
    for (std::size_t c = classes / 2; c < classes; ++c) {
        in.current.insert(static_cast<ClassId>(c));
        counts[static_cast<ClassId>(c)] = count(rng);
    }
    in.prior = frequency_prior(counts, layers);
    return in;
}

inline Vector theta_flat(const Adapter& a) {
    Vector v(a.weight.data().begin(), a.weight.data().end());
    v.insert(v.end(), a.bias.begin(), a.bias.end());
    return v;
}

inline Adapter theta_unflat(std::span<const double> v, std::size_t d) {
    Adapter a = Adapter::identity(d);
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d * d), a.weight.data().begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(d * d), v.end(), a.bias.begin());
    return a;
}

struct GradientCheck {
    double theta_error = 0.0;
    double alpha_error = 0.0;  // worst class
};

inline GradientCheck check_gradients(const Instance& in, double h = 1e-6) {
    const std::size_t d = in.adapter.dim();
    const ObjectiveGradients g = gradients(in.context(), in.adapter);
    GradientCheck out;

    const auto f_theta = [&](std::span<const double> p) {
        return total_objective(in.context(), theta_unflat(p, d)).total();
    };
    Vector analytic = theta_flat(Adapter{g.weight, g.bias});
    out.theta_error = oracle::relative_error(analytic, finite_difference_gradient(f_theta, theta_flat(in.adapter), h));

    for (ClassId c : in.text.classes) {
        Instance probe = in;
        const auto f_alpha = [&](std::span<const double> row) {
            probe.weights.set_row_unchecked(c, Vector(row.begin(), row.end()));
            return total_objective(probe.context(), probe.adapter).total();
        };
        const Vector fd = finite_difference_gradient(f_alpha, in.weights.row(c), h);
        out.alpha_error = std::max(out.alpha_error, oracle::relative_error(g.alpha.at(c), fd));
    }
    return out;
}

}  // namespace instances
