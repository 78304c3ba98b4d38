#include "taillight/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "taillight/kernels.hpp"

namespace taillight {

using json = nlohmann::json;

void TrainConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (!(lr_theta > 0.0) || !(lr_alpha > 0.0)) bad("learning rates must be > 0");
    if (lambda_alg < 0.0 || lambda_kd < 0.0 || lambda_con < 0.0 || lambda_freq < 0.0) bad("lambdas must be >= 0");
    if (epochs < 1) bad("epochs must be >= 1");
    if (alpha_period < 1) bad("alpha_period must be >= 1");
    if (alpha_steps < 1) bad("alpha_steps must be >= 1");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (!(logit_scale > 0.0)) bad("logit_scale must be > 0");
    if (!(temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
    if (alpha_init != "uniform" && alpha_init != "fixed") bad("alpha_init must be \"uniform\" or \"fixed\"");
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"lambda_alg", c.lambda_alg},     {"lambda_kd", c.lambda_kd},
             {"lambda_con", c.lambda_con},     {"lambda_freq", c.lambda_freq},
             {"lr_theta", c.lr_theta},         {"lr_alpha", c.lr_alpha},
             {"epochs", c.epochs},             {"alpha_period", c.alpha_period},
             {"alpha_steps", c.alpha_steps},   {"batch_size", c.batch_size},
             {"logit_scale", c.logit_scale},   {"temperature", c.temperature},
             {"replay_cap", c.replay_cap},     {"train_adapter", c.train_adapter},
             {"learn_alpha", c.learn_alpha},   {"alpha_init", c.alpha_init}};
}

void from_json(const json& j, TrainConfig& c) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "train section must be an object");
    json defaults;
    to_json(defaults, c);
    for (const auto& [key, _] : j.items())
        if (!defaults.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown train field \"" + key + "\"");
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const json::exception&) {
            throw Error(ErrorCode::InvalidConfig, std::string("train field \"") + key + "\" has the wrong type");
        }
    };
    get("lambda_alg", c.lambda_alg);
    get("lambda_kd", c.lambda_kd);
    get("lambda_con", c.lambda_con);
    get("lambda_freq", c.lambda_freq);
    get("lr_theta", c.lr_theta);
    get("lr_alpha", c.lr_alpha);
    get("epochs", c.epochs);
    get("alpha_period", c.alpha_period);
    get("alpha_steps", c.alpha_steps);
    get("batch_size", c.batch_size);
    get("logit_scale", c.logit_scale);
    get("temperature", c.temperature);
    get("replay_cap", c.replay_cap);
    get("train_adapter", c.train_adapter);
    get("learn_alpha", c.learn_alpha);
    get("alpha_init", c.alpha_init);
}

namespace {

struct Evaluation {
    ObjectiveTerms terms;
    Vector ce_rows;     // CE_i / n
    Vector kd_rows;     // ||f_old - f|| / n
    Vector align_rows;  // per-row share of the symmetric KL
};

void check_context(const ObjectiveContext& ctx, const Adapter& adapter) {
    if (!ctx.features || !ctx.text || !ctx.weights)
        throw Error(ErrorCode::InvalidConfig, "objective context is incomplete");
    if (ctx.features->rows() != ctx.labels.size())
        throw Error(ErrorCode::ShapeMismatch, "features/labels length mismatch");
    if (ctx.original_count > ctx.labels.size()) throw Error(ErrorCode::ShapeMismatch, "original_count > batch");
    if (ctx.features->cols() != adapter.dim() || ctx.text->dim() != adapter.dim())
        throw Error(ErrorCode::DimensionMismatch, "feature, text and adapter dims disagree");
    if (ctx.weights->layer_count() != ctx.text->layer_count())
        throw Error(ErrorCode::DimensionMismatch, "alpha length != tree layer count");
    if (!(ctx.temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
    if (ctx.lambda_freq != 0.0 && !ctx.current.empty() && !ctx.prior)
        throw Error(ErrorCode::InvalidConfig, "frequency prior missing");
}

// Unit rows plus the original norms; rows below 1e-15 stay zero.
Matrix unit_rows(const Matrix& m, Vector& norms) {
    Matrix u(m.rows(), m.cols());
    norms.assign(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double n = norm2(m.row(i));
        norms[i] = n;
        if (n < 1e-15) continue;
        for (std::size_t k = 0; k < m.cols(); ++k) u(i, k) = m(i, k) / n;
    }
    return u;
}

// d/dx of x/||x|| applied to du.
void normalize_backward(std::span<const double> du, std::span<const double> u, double norm, std::span<double> out) {
    if (norm < 1e-15) return;
    const double proj = dot(du, u);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += (du[k] - proj * u[k]) / norm;
}

Evaluation evaluate(const ObjectiveContext& ctx, const Adapter& adapter, ObjectiveGradients* grad) {
    check_context(ctx, adapter);
    const Matrix& x = *ctx.features;
    const LayerFeatures& text = *ctx.text;
    const LayerWeights& weights = *ctx.weights;
    const std::size_t total_rows = x.rows();
    const std::size_t n = ctx.original_count;
    const std::size_t d = adapter.dim();
    const std::size_t classes = text.class_count();
    const std::size_t layers = text.layer_count();
    const double s = ctx.logit_scale;

    Evaluation ev;
    ev.terms.lambda_alg = ctx.lambda_alg;
    ev.terms.lambda_kd = ctx.lambda_kd;
    ev.terms.lambda_con = ctx.lambda_con;
    ev.terms.lambda_freq = ctx.lambda_freq;
    ev.ce_rows.assign(n, 0.0);
    ev.kd_rows.assign(n, 0.0);
    ev.align_rows.assign(total_rows, 0.0);

    const Matrix h = adapter.apply_rows(x);
    Matrix dh(total_rows, d);

    std::vector<std::size_t> idx(total_rows);
    for (std::size_t i = 0; i < total_rows; ++i) idx[i] = text.index_of(ctx.labels[i]);

    // Fused text matrix F_a for every label present.
    std::vector<Matrix> fused(classes);
    std::vector<bool> have(classes, false);
    for (std::size_t i = 0; i < total_rows; ++i) {
        if (have[idx[i]]) continue;
        fused[idx[i]] = text.fused_all(weights.row(ctx.labels[i]));
        have[idx[i]] = true;
    }

    if (grad) {
        grad->weight = Matrix(d, d);
        grad->bias.assign(d, 0.0);
        grad->alpha.clear();
        for (ClassId c : text.classes) grad->alpha[c] = Vector(layers, 0.0);
    }

    // Cross-entropy over B.
    Vector z(classes), p(classes);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix& f = fused[idx[i]];
        auto hi = h.row(i);
        double mx = -1e300;
        for (std::size_t c = 0; c < classes; ++c) {
            z[c] = s * dot(f.row(c), hi);
            mx = std::max(mx, z[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - mx);
        const double lse = mx + std::log(sum);
        const double ce = (lse - z[idx[i]]) / static_cast<double>(n);
        ev.ce_rows[i] = ce;
        ev.terms.ce += ce;
        if (!grad) continue;

        for (std::size_t c = 0; c < classes; ++c)
            p[c] = (std::exp(z[c] - lse) - (c == idx[i] ? 1.0 : 0.0)) * s / static_cast<double>(n);
        auto dhi = dh.row(i);
        for (std::size_t c = 0; c < classes; ++c) {
            auto fc = f.row(c);
            for (std::size_t k = 0; k < d; ++k) dhi[k] += p[c] * fc[k];
        }
        auto& da = grad->alpha.at(ctx.labels[i]);
        for (std::size_t l = 0; l < layers; ++l) {
            double acc = 0.0;
            for (std::size_t c = 0; c < classes; ++c) acc += p[c] * dot(hi, text.layers[l].row(c));
            da[l] += acc;
        }
    }

    // Distillation over B.
    if (ctx.old_adapter && n > 0) {
        for (std::size_t i = 0; i < n; ++i) {
            const Vector old = ctx.old_adapter->apply(x.row(i));
            auto hi = h.row(i);
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) sq += (hi[k] - old[k]) * (hi[k] - old[k]);
            const double dist = std::sqrt(sq);
            ev.kd_rows[i] = dist / static_cast<double>(n);
            ev.terms.distillation += ev.kd_rows[i];
            if (!grad || ctx.lambda_kd == 0.0 || dist == 0.0) continue;
            const double scale = ctx.lambda_kd / (dist * static_cast<double>(n));
            auto dhi = dh.row(i);
            for (std::size_t k = 0; k < d; ++k) dhi[k] += scale * (hi[k] - old[k]);
        }
    }

    // Alignment over B_bal.
    if (total_rows > 0) {
        Vector hn, vn;
        const Matrix uv = unit_rows(h, hn);
        Matrix v(total_rows, d);
        for (std::size_t i = 0; i < total_rows; ++i) {
            auto src = fused[idx[i]].row(idx[i]);
            std::copy(src.begin(), src.end(), v.row(i).begin());
        }
        const Matrix ut = unit_rows(v, vn);
        const auto rows = kernels::alignment_rows(kernels::gram(uv), kernels::gram(ut), ctx.temperature);
        for (std::size_t i = 0; i < total_rows; ++i) {
            ev.align_rows[i] = rows.row_loss[i];
            ev.terms.alignment += rows.row_loss[i];
        }
        if (grad && ctx.lambda_alg != 0.0) {
            Matrix gv = rows.grad_visual, gs = rows.grad_semantic;
            for (double& g : gv.data()) g *= ctx.lambda_alg;
            for (double& g : gs.data()) g *= ctx.lambda_alg;
            const Matrix duv = kernels::gram_backward(gv, uv);
            const Matrix dut = kernels::gram_backward(gs, ut);
            Vector dv(d);
            for (std::size_t i = 0; i < total_rows; ++i) {
                normalize_backward(duv.row(i), uv.row(i), hn[i], dh.row(i));
                std::fill(dv.begin(), dv.end(), 0.0);
                normalize_backward(dut.row(i), ut.row(i), vn[i], dv);
                auto& da = grad->alpha.at(ctx.labels[i]);
                for (std::size_t l = 0; l < layers; ++l) da[l] += dot(dv, text.layers[l].row(idx[i]));
            }
        }
    }

    if (grad) {
        for (std::size_t i = 0; i < total_rows; ++i) {
            auto dhi = dh.row(i);
            auto xi = x.row(i);
            for (std::size_t r = 0; r < d; ++r) {
                if (dhi[r] == 0.0) continue;
                grad->bias[r] += dhi[r];
                auto wr = grad->weight.row(r);
                for (std::size_t k = 0; k < d; ++k) wr[k] += dhi[r] * xi[k];
            }
        }
    }

    for (ClassId c : text.classes) {
        const auto& row = weights.row(c);
        const auto rc = entropy_regularizer(row);
        ev.terms.entropy += rc.value;
        if (grad)
            for (std::size_t l = 0; l < layers; ++l) grad->alpha.at(c)[l] += ctx.lambda_con * rc.gradient[l];
    }
    for (ClassId c : ctx.current) {
        if (!ctx.prior) break;
        const auto rf = freq_regularizer(weights.row(c), ctx.prior->log_prior.at(c));
        ev.terms.frequency += rf.value;
        if (grad)
            for (std::size_t l = 0; l < layers; ++l) grad->alpha.at(c)[l] += ctx.lambda_freq * rf.gradient[l];
    }

    if (grad) {
        auto finite = [](std::span<const double> v) {
            return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
        };
        bool ok = finite(grad->weight.data()) && finite(grad->bias);
        for (const auto& [_, g] : grad->alpha) ok = ok && finite(g);
        if (!ok) throw Error(ErrorCode::NonFiniteGradient, "objective gradient is not finite");
    }
    return ev;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double row_entropy(std::span<const double> a) {
    double e = 0.0;
    for (double v : a)
        if (v > 0.0) e -= v * std::log(v);
    return e;
}

}  // namespace

ObjectiveTerms total_objective(const ObjectiveContext& ctx, const Adapter& adapter) {
    return evaluate(ctx, adapter, nullptr).terms;
}

ObjectiveGradients gradients(const ObjectiveContext& ctx, const Adapter& adapter, ObjectiveTerms* terms) {
    ObjectiveGradients g;
    auto ev = evaluate(ctx, adapter, &g);
    if (terms) *terms = ev.terms;
    return g;
}

double per_class_objective(const ObjectiveContext& ctx, const Adapter& adapter, ClassId k) {
    const auto ev = evaluate(ctx, adapter, nullptr);
    double j = 0.0;
    for (std::size_t i = 0; i < ctx.labels.size(); ++i) {
        if (ctx.labels[i] != k) continue;
        if (i < ctx.original_count) j += ev.ce_rows[i] + ctx.lambda_kd * ev.kd_rows[i];
        j += ctx.lambda_alg * ev.align_rows[i];
    }
    if (ctx.weights->contains(k) && std::binary_search(ctx.text->classes.begin(), ctx.text->classes.end(), k))
        j += ctx.lambda_con * entropy_regularizer(ctx.weights->row(k)).value;
    if (ctx.current.count(k) && ctx.prior)
        j += ctx.lambda_freq * freq_regularizer(ctx.weights->row(k), ctx.prior->log_prior.at(k)).value;
    return j;
}

Adam::Adam(std::size_t dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(dim * dim + dim, 0.0), v_(dim * dim + dim, 0.0) {}

void Adam::step(Adapter& adapter, const Matrix& grad_w, std::span<const double> grad_b) {
    const std::size_t dd = grad_w.data().size();
    if (dd + grad_b.size() != m_.size()) throw Error(ErrorCode::DimensionMismatch, "Adam state size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](std::size_t i, double g, double& param) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
        param -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    };
    auto w = adapter.weight.data();
    auto gw = grad_w.data();
    for (std::size_t i = 0; i < dd; ++i) update(i, gw[i], w[i]);
    for (std::size_t i = 0; i < grad_b.size(); ++i) update(dd + i, grad_b[i], adapter.bias[i]);
}

Rng named_stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    return Rng(mix64(mix64(seed) ^ fnv1a64(name) ^ mix64(index + 0x51ed2701ULL)));
}

TaskState TaskState::initial(std::size_t dim) {
    TaskState s;
    s.adapter = Adapter::identity(dim);
    return s;
}

std::string EpochRecord::to_json_line() const {
    return json{{"task", task},
                {"epoch", epoch},
                {"batches", batches},
                {"ce", ce},
                {"alignment", alignment},
                {"distillation", distillation},
                {"entropy", entropy},
                {"frequency", frequency},
                {"theta_view", theta_view},
                {"alpha_update", alpha_update},
                {"alpha_entropy_mean", alpha_entropy_mean},
                {"alpha_entropy_min", alpha_entropy_min}}
        .dump();
}

void begin_task(TaskState& state, const TaskData& data, std::size_t layer_count, const TrainConfig& config) {
    if (layer_count < 3) throw Error(ErrorCode::DegenerateTree, "tree needs at least 3 layers");
    state.task = data.task;
    for (ClassId c : data.classes)
        if (std::find(state.seen.begin(), state.seen.end(), c) == state.seen.end()) state.seen.push_back(c);
    std::sort(state.seen.begin(), state.seen.end());

    state.current_counts.clear();
    for (ClassId c : data.classes) state.current_counts[c] = 0;
    for (ClassId y : data.train.labels) {
        auto it = state.current_counts.find(y);
        if (it == state.current_counts.end())
            throw Error(ErrorCode::UnknownClass, "training label " + std::to_string(y) + " not in task");
        ++it->second;
    }
    double total = 0.0;
    for (auto& [c, cnt] : state.current_counts) {
        if (cnt == 0) throw Error(ErrorCode::InvalidConfig, "class " + std::to_string(c) + " has no training rows");
        total += static_cast<double>(cnt);
    }
    state.mean_count = data.classes.empty() ? 0.0 : total / static_cast<double>(data.classes.size());

    if (state.weights.layer_count() < layer_count) state.weights.resize_layers(layer_count);
    for (ClassId c : data.classes) {
        if (state.weights.contains(c)) continue;
        if (config.alpha_init == "fixed") {
            Vector row(layer_count, 0.0);
            row[1] = 1.0;
            state.weights.add_class(c, data.task, std::move(row));
        } else {
            state.weights.add_uniform(c, data.task);
        }
    }
}

std::vector<EpochRecord> train_task(const TaskData& data, TaskState& state, const LayerFeatures& text,
                                    const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t rows = data.train.features.rows();
    const std::size_t d = state.adapter.dim();
    if (data.train.features.cols() != d) throw Error(ErrorCode::DimensionMismatch, "train dim != adapter dim");

    std::map<ClassId, std::size_t> depths;
    for (ClassId c : data.classes) depths[c] = std::min(class_depth(text, c), text.layer_count());
    const FrequencyPrior prior = frequency_prior(state.current_counts, text.layer_count(), depths);
    const std::set<ClassId> current(data.classes.begin(), data.classes.end());
    const Adapter* old = state.old_adapter ? &*state.old_adapter : nullptr;
    const bool replay = config.lambda_alg > 0.0;

    Rng shuffle_rng = named_stream(seed, "shuffle", data.task);
    Rng replay_rng = named_stream(seed, "replay", data.task);
    Rng alpha_rng = named_stream(seed, "alpha-replay", data.task);

    auto make_context = [&](const BalancedBatch& b) {
        ObjectiveContext ctx;
        ctx.features = &b.features;
        ctx.labels = b.labels;
        ctx.original_count = b.original_count;
        ctx.text = &text;
        ctx.weights = &state.weights;
        ctx.old_adapter = old;
        ctx.current = current;
        ctx.prior = &prior;
        ctx.lambda_alg = config.lambda_alg;
        ctx.lambda_kd = config.lambda_kd;
        ctx.lambda_con = config.lambda_con;
        ctx.lambda_freq = config.lambda_freq;
        ctx.logit_scale = config.logit_scale;
        ctx.temperature = config.temperature;
        return ctx;
    };
    auto gather = [&](std::span<const std::size_t> order, Rng& rng) {
        Matrix xb(order.size(), d);
        std::vector<ClassId> yb(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            auto src = data.train.features.row(order[i]);
            std::copy(src.begin(), src.end(), xb.row(i).begin());
            yb[i] = data.train.labels[order[i]];
        }
        return replay ? build_balanced_batch(xb, yb, state.memory, rng, config.replay_cap) : plain_batch(xb, yb);
    };

    std::vector<EpochRecord> log;
    const bool any_training = config.train_adapter || config.learn_alpha;
    Adam adam(d, config.lr_theta);
    std::vector<std::size_t> order(rows);

    for (std::size_t epoch = 1; any_training && epoch <= config.epochs && rows > 0; ++epoch) {
        EpochRecord rec;
        rec.task = data.task;
        rec.epoch = epoch;

        if (config.train_adapter) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = rows - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng() % (i + 1)]);
            for (std::size_t start = 0; start < rows; start += config.batch_size) {
                const std::size_t len = std::min(config.batch_size, rows - start);
                const BalancedBatch b = gather(std::span(order).subspan(start, len), replay_rng);
                ObjectiveTerms terms;
                const auto g = gradients(make_context(b), state.adapter, &terms);
                adam.step(state.adapter, g.weight, g.bias);
                rec.ce += terms.ce;
                rec.alignment += terms.alignment;
                rec.distillation += terms.distillation;
                rec.entropy += terms.entropy;
                rec.frequency += terms.frequency;
                rec.theta_view += terms.theta_view();
                ++rec.batches;
            }
            if (rec.batches > 0) {
                const double inv = 1.0 / static_cast<double>(rec.batches);
                rec.ce *= inv;
                rec.alignment *= inv;
                rec.distillation *= inv;
                rec.entropy *= inv;
                rec.frequency *= inv;
                rec.theta_view *= inv;
            }
        }

        if (config.learn_alpha && epoch % config.alpha_period == 0) {
            rec.alpha_update = true;
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t step = 0; step < config.alpha_steps; ++step) {
                std::map<ClassId, Vector> acc;
                std::size_t batches = 0;
                for (std::size_t start = 0; start < rows; start += config.batch_size) {
                    const std::size_t len = std::min(config.batch_size, rows - start);
                    const BalancedBatch b = gather(std::span(order).subspan(start, len), alpha_rng);
                    const auto g = gradients(make_context(b), state.adapter);
                    for (ClassId c : data.classes) {
                        auto& a = acc[c];
                        if (a.empty()) a.assign(g.alpha.at(c).size(), 0.0);
                        for (std::size_t l = 0; l < a.size(); ++l) a[l] += g.alpha.at(c)[l];
                    }
                    ++batches;
                }
                for (ClassId c : data.classes) {
                    if (state.weights.frozen(c)) continue;
                    Vector g = acc.at(c);
                    for (double& v : g) v /= static_cast<double>(batches);
                    state.weights.set_row(c, update_alpha(state.weights.row(c), g, config.lr_alpha));
                }
            }
        }

        double emin = 1e300, esum = 0.0;
        for (ClassId c : data.classes) {
            const double e = row_entropy(state.weights.row(c));
            esum += e;
            emin = std::min(emin, e);
        }
        rec.alpha_entropy_mean = data.classes.empty() ? 0.0 : esum / static_cast<double>(data.classes.size());
        rec.alpha_entropy_min = data.classes.empty() ? 0.0 : emin;
        log.push_back(rec);
    }

    state.old_adapter = state.adapter;
    for (ClassId c : data.classes) {
        std::size_t count = 0;
        for (ClassId y : data.train.labels) count += (y == c);
        Matrix xc(count, d);
        std::size_t r = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (data.train.labels[i] != c) continue;
            auto src = data.train.features.row(i);
            std::copy(src.begin(), src.end(), xc.row(r++).begin());
        }
        state.memory.store(update_statistics(c, xc));
        state.weights.freeze(c);
    }
    return log;
}

void save_checkpoint(const TaskState& state, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    state.adapter.save(directory / "adapter.bin");
    std::ofstream alpha(directory / "alpha.json", std::ios::trunc);
    if (!alpha) throw Error(ErrorCode::IoError, "cannot write alpha.json", (directory / "alpha.json").string());
    alpha << state.weights.to_json();
    state.memory.save(directory / "memory");
}

TaskState load_checkpoint(const std::filesystem::path& directory) {
    TaskState s;
    s.adapter = Adapter::load(directory / "adapter.bin");
    std::ifstream in(directory / "alpha.json");
    if (!in) throw Error(ErrorCode::IoError, "missing alpha.json", (directory / "alpha.json").string());
    std::stringstream text;
    text << in.rdbuf();
    s.weights = LayerWeights::from_json(text.str());
    s.seen = s.weights.classes();
    s.memory = MemoryBank::load(directory / "memory");
    return s;
}

}  // namespace taillight
