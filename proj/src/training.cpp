#include "gamcn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "gamcn/errors.hpp"

namespace gamcn {

Normalizer Normalizer::fit(std::span<const double> values, std::size_t conditions) {
    if (conditions == 0) throw ContractError("normalizer needs at least one condition");
    if (values.empty()) throw ContractError("cannot fit a normalizer on empty data");
    if (values.size() % conditions != 0) throw DimensionError("normalizer data is not a multiple of the condition count");
    const std::size_t rows = values.size() / conditions;
    Normalizer norm;
    norm.mu.assign(conditions, 0.0);
    norm.sigma.assign(conditions, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) norm.mu[i % conditions] += values[i];
    for (auto& m : norm.mu) m /= static_cast<double>(rows);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - norm.mu[i % conditions];
        norm.sigma[i % conditions] += d * d;
    }
    for (auto& s : norm.sigma) {
        s = std::sqrt(s / static_cast<double>(rows));
        if (s == 0.0) s = 1.0;
    }
    return norm;
}

Normalizer Normalizer::fit(const TrafficDataset& ds, std::size_t train_end) {
    if (train_end > ds.length()) throw ContractError("normalizer range exceeds the dataset");
    const std::size_t frame = ds.vertices * ds.condition_count();
    return fit(std::span<const double>(ds.values.data(), train_end * frame), ds.condition_count());
}

void Normalizer::apply(std::span<double> values) const {
    const std::size_t c = conditions();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (values[i] - mu[i % c]) / sigma[i % c];
}

void Normalizer::invert(std::span<double> values) const {
    const std::size_t c = conditions();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = values[i] * sigma[i % c] + mu[i % c];
}

Tensor Normalizer::apply(const Tensor& t) const {
    if (t.shape().back() != conditions()) throw DimensionError("normalizer condition count does not match the tensor");
    std::vector<double> v(t.values().begin(), t.values().end());
    apply(std::span<double>(v));
    return Tensor(t.shape(), std::move(v));
}

Tensor Normalizer::invert(const Tensor& t) const {
    if (t.shape().back() != conditions()) throw DimensionError("normalizer condition count does not match the tensor");
    std::vector<double> v(t.values().begin(), t.values().end());
    invert(std::span<double>(v));
    return Tensor(t.shape(), std::move(v));
}

std::vector<SampleWindow> normalize_windows(const std::vector<SampleWindow>& windows, const Normalizer& norm) {
    std::vector<SampleWindow> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        SampleWindow copy = w;
        copy.input = norm.apply(w.input);
        copy.target = norm.apply(w.target);
        out.push_back(std::move(copy));
    }
    return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& truth) {
    if (pred.shape() != truth.shape()) {
        throw DimensionError("mse_loss: prediction " + shape_string(pred.shape()) + " vs truth " +
                             shape_string(truth.shape()));
    }
    return mean_squared_error(pred, truth);
}

// ---------------------------------------------------------------------------

Adam::Adam(ParameterList& params, AdamConfig config) : params_(&params), config_(config) {
    if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(config.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i].tensor.size(), 0.0);
        v_[i].assign(params[i].tensor.size(), 0.0);
    }
}

void Adam::step() {
    auto& params = *params_;
    if (params.size() != m_.size()) throw ContractError("parameter list changed size after the optimizer was built");
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.grad()) {
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'; training aborted");
        }
    }
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = params[i].tensor;
        auto values = t.mutable_values();
        auto& m = m_[i];
        auto& v = v_[i];
        const bool has = t.has_grad();
        const auto grad = has ? t.grad() : std::span<const double>{};
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = has ? grad[k] : 0.0;
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            const double m_hat = m[k] / c1, v_hat = v[k] / c2;
            values[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    if (patience == 0) throw ConfigError("patience must be >= 1");
}

void write_history_line(std::ostream& out, const EpochRecord& r) {
    nlohmann::json j{{"epoch", r.epoch},
                     {"train_loss", r.train_loss},
                     {"val_loss", r.val_loss},
                     {"seconds", r.seconds},
                     {"phase", r.phase}};
    out << j.dump() << '\n';
    out.flush();
}

// ---------------------------------------------------------------------------

Trainer::Trainer(Gamcn& model, const TrainConfig& config)
    : model_(&model), config_(config), adam_(model.parameters(), config.adam()) {
    config_.validate();
}

double Trainer::step(std::span<const SampleWindow* const> batch) {
    if (batch.empty()) throw ContractError("empty training batch");
    auto& params = model_->parameters();
    zero_grads(params);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const SampleWindow* w : batch) {
        if (w->split != Split::train) {
            throw ContractError("window starting at stamp " + std::to_string(w->start) + " is tagged " +
                                to_string(w->split) + " and cannot drive parameter updates");
        }
        const Tensor loss = mse_loss(model_->forward(w->input, w->horizon_times), w->target);
        total += loss.item();
        backward(scale(loss, inv));
    }
    adam_.step();
    return total * inv;
}

double Trainer::evaluate(const std::vector<SampleWindow>& windows) const {
    if (windows.empty()) throw ConfigError("cannot evaluate on an empty window list");
    NoGradGuard guard;
    double total = 0.0;
    for (const auto& w : windows) total += mse_loss(model_->forward(w.input, w.horizon_times), w.target).item();
    return total / static_cast<double>(windows.size());
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    Rng rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

TrainResult train(Gamcn& model, const std::vector<SampleWindow>& train_windows,
                  const std::vector<SampleWindow>& val_windows, const TrainConfig& config, const TrainHooks& hooks,
                  std::ostream* history) {
    config.validate();
    if (train_windows.empty()) throw ConfigError("training split has no windows");
    if (val_windows.empty()) throw ConfigError("validation split has no windows");
    for (const auto& w : val_windows) {
        if (w.split != Split::val) throw ContractError("validation list contains a window tagged " + to_string(w.split));
    }
    Trainer trainer(model, config);
    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    auto best = snapshot(model.parameters());
    std::size_t since_best = 0;
    std::vector<const SampleWindow*> batch;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const auto order = epoch_order(train_windows.size(), config.seed, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        bool budget_hit = false;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            batch.clear();
            for (std::size_t k = b; k < std::min(order.size(), b + config.batch_size); ++k) {
                batch.push_back(&train_windows[order[k]]);
            }
            const double loss = trainer.step(batch);
            loss_sum += loss;
            ++batches;
            ++result.steps;
            if (hooks.on_step) hooks.on_step(result.steps, loss);
            if (config.max_steps && result.steps >= config.max_steps) {
                budget_hit = true;
                break;
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.val_loss = trainer.evaluate(val_windows);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.history.push_back(rec);
        if (history) write_history_line(*history, rec);

        const double metric = hooks.validation_metric ? hooks.validation_metric(epoch, rec.val_loss) : rec.val_loss;
        if (metric < result.best_val_loss) {
            result.best_val_loss = metric;
            result.best_epoch = epoch;
            best = snapshot(model.parameters());
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.stopped_early = true;
            break;
        }
        if (budget_hit) break;
    }
    restore(model.parameters(), best);
    return result;
}

Tensor predict(const Gamcn& model, const SampleWindow& window) {
    NoGradGuard guard;
    return model.forward(window.input, window.horizon_times);
}

}  // namespace gamcn
